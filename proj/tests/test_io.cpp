#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

#include "iontrap/commands.hpp"
#include "iontrap/tag_file.hpp"

using namespace iontrap;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("iontrap_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }
  [[nodiscard]] std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

TagStream random_stream(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> gap(0, 50'000'000);
  std::uniform_int_distribution<int> ch(0, 9);
  TagStream s;
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t += gap(rng);
    const int c = ch(rng);
    s.records.push_back({t, static_cast<std::uint8_t>(c == 9 ? kTriggerChannel : c % 2)});
  }
  return s;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(IONTRAP_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tag files

TEST(TagFile, RoundTripIsLossless) {
  TempDir dir;
  auto s = random_stream(100000, 1);
  s.channel_count = 2;
  const std::string meta = R"({"acquisition_span_ps":123456789012345,"note":"x"})";
  io::write_tag_file(dir / "a.tags", s, meta);
  const auto f = io::read_tag_file(dir / "a.tags");
  EXPECT_EQ(f.stream.records, s.records);
  EXPECT_EQ(f.header.metadata, meta);
  EXPECT_EQ(f.header.channel_count, 2);
  EXPECT_EQ(f.stream.acquisition_span_ps, 123456789012345ULL);
  EXPECT_EQ(fs::file_size(dir / "a.tags"), 19 + meta.size() + 9 * s.records.size());
}

TEST(TagFile, ByteLayoutIsLittleEndian) {
  TempDir dir;
  TagStream s;
  s.records = {{0x0102030405060708ULL, 1}};
  io::write_tag_file(dir / "b.tags", s, "{}");
  const auto bytes = slurp(dir / "b.tags");
  ASSERT_EQ(bytes.size(), 19u + 2u + 9u);
  EXPECT_EQ(bytes.substr(0, 8), "IONTAG01");
  EXPECT_EQ(bytes[8], 1);  // version
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(bytes[10], 1);  // resolution 1 ps
  EXPECT_EQ(bytes[14], 2);  // channel count
  EXPECT_EQ(bytes[15], 2);  // metadata length
  EXPECT_EQ(bytes.substr(19, 2), "{}");
  EXPECT_EQ(bytes[21], 0x08);
  EXPECT_EQ(bytes[28], 0x01);
  EXPECT_EQ(bytes[29], 1);
  // Without metadata the span falls back to the last record.
  EXPECT_EQ(io::read_tag_file(dir / "b.tags").stream.acquisition_span_ps, 0x0102030405060708ULL);
}

TEST(TagFile, ChunkedReadingMatches) {
  TempDir dir;
  const auto s = random_stream(10007, 2);
  io::write_tag_file(dir / "c.tags", s);
  io::TagFileReader reader(dir / "c.tags");
  std::vector<TimeTagRecord> all, chunk;
  while (reader.read_chunk(chunk, 333)) {
    EXPECT_LE(chunk.size(), 333u);
    all.insert(all.end(), chunk.begin(), chunk.end());
  }
  EXPECT_EQ(all, s.records);
}

TEST(TagFile, MalformedInputIsRejected) {
  TempDir dir;
  spit(dir / "bad.tags", "NOTATAG!xxxxxxxxxxxxxxxx");
  EXPECT_THROW((void)io::read_tag_file(dir / "bad.tags"), FormatError);
  spit(dir / "short.tags", "IONT");
  EXPECT_THROW((void)io::read_tag_file(dir / "short.tags"), FormatError);
  EXPECT_THROW((void)io::read_tag_file(dir / "missing.tags"), IoError);

  TagStream s;
  s.records = {{1, 0}, {2, 0}};
  io::write_tag_file(dir / "t.tags", s);
  auto bytes = slurp(dir / "t.tags");
  spit(dir / "trunc.tags", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW((void)io::read_tag_file(dir / "trunc.tags"), FormatError);
  bytes[8] = 9;
  spit(dir / "ver.tags", bytes);
  EXPECT_THROW((void)io::read_tag_file(dir / "ver.tags"), FormatError);

  TagStream unsorted;
  unsorted.records = {{5, 0}, {4, 0}};
  EXPECT_THROW(io::write_tag_file(dir / "u.tags", unsorted), OrderingError);
}

TEST(TagFile, StreamingHistogramMatchesInMemory) {
  TempDir dir;
  TagStream s;
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> gap(1e6);
  double t = 0.0;
  while (t < 0.3) {
    t += gap(rng);
    s.records.push_back({static_cast<std::uint64_t>(to_ps(t)), 0});
  }
  io::write_tag_file(dir / "s.tags", s);
  const auto a = cli::histogram_from_file(dir / "s.tags", 16e-9, 1e-3, false, 1);
  const auto b = cli::histogram_from_file(dir / "s.tags", 16e-9, 1e-3, true, 1);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_EQ(a.n_source_events, b.n_source_events);
}

// ---------------------------------------------------------------------------
// Commands

TEST(Commands, SimulateIsByteDeterministic) {
  TempDir dir;
  std::ostringstream out, err;
  cli::SimulateArgs args;
  args.duration = 1.0;
  args.seed = 77;
  args.output = dir / "a.tags";
  ASSERT_EQ(cli::cmd_simulate(args, out, err), 0);
  args.output = dir / "b.tags";
  ASSERT_EQ(cli::cmd_simulate(args, out, err), 0);
  EXPECT_EQ(slurp(dir / "a.tags"), slurp(dir / "b.tags"));
  args.seed = 78;
  args.output = dir / "c.tags";
  ASSERT_EQ(cli::cmd_simulate(args, out, err), 0);
  EXPECT_NE(slurp(dir / "a.tags"), slurp(dir / "c.tags"));
}

TEST(Commands, ZeroDurationWritesHeaderOnly) {
  TempDir dir;
  std::ostringstream out, err;
  cli::SimulateArgs args;
  args.duration = 0.0;
  args.output = dir / "z.tags";
  ASSERT_EQ(cli::cmd_simulate(args, out, err), 0);
  EXPECT_NE(err.str().find("warning"), std::string::npos);
  const auto f = io::read_tag_file(args.output);
  EXPECT_TRUE(f.stream.records.empty());
}

TEST(Commands, SpectrumCsvRoundTrip) {
  TempDir dir;
  std::ostringstream out, err;
  cli::SimulateArgs sim;
  sim.duration = 2.0;
  sim.output = dir / "r.tags";
  ASSERT_EQ(cli::cmd_simulate(sim, out, err), 0);
  cli::SpectrumArgs sa;
  sa.input = sim.output;
  sa.output = dir / "r.spectrum.csv";
  sa.max_lag = 1e-3;
  sa.histogram_output = dir / "r.hist.csv";
  ASSERT_EQ(cli::cmd_spectrum(sa, out, err), 0);
  const auto s = cli::read_spectrum_csv(sa.output);
  const auto direct = corr::power_spectrum(cli::histogram_from_file(sim.output, 16e-9, 1e-3, false, 0), sa.spectrum);
  ASSERT_EQ(s.size(), direct.size());
  for (std::size_t j = 0; j < s.size(); j += 97) {
    EXPECT_EQ(s.frequencies[j], direct.frequencies[j]);
    EXPECT_EQ(s.amplitudes[j], direct.amplitudes[j]);
    EXPECT_EQ(s.transform[j], direct.transform[j]);
  }
  const auto h = cli::read_csv(sa.histogram_output);
  EXPECT_EQ(h.columns, (std::vector<std::string>{"lag_s", "count"}));
  EXPECT_EQ(h.rows.size(), 62500u);
}

TEST(Commands, ReportNeedsFitReports) {
  TempDir dir;
  std::ostringstream out;
  cli::ReportArgs args;
  args.directory = dir.path().string();
  EXPECT_THROW(cli::cmd_report(args, out, out), MissingInputError);
}

TEST(Commands, ErrorsMapToExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(cli::run_command([]() -> int { throw ConfigError("interferometer.contrast_nu", "must lie in [0, 1]"); }, err), 2);
  EXPECT_NE(err.str().find("\"key\":\"interferometer.contrast_nu\""), std::string::npos) << err.str();
  err.str("");
  EXPECT_EQ(cli::run_command([]() -> int { throw MissingInputError("none", {"*.fit.json"}); }, err), 2);
  EXPECT_EQ(cli::run_command([]() -> int { throw FormatError("bad"); }, err), 1);
  EXPECT_EQ(cli::run_command([]() -> int { throw AmbiguityError("amb", 12.5); }, err), 1);
  EXPECT_EQ(cli::run_command([]() -> int { return 0; }, err), 0);
}

TEST(Commands, FormattingRoundTrips) {
  for (double v : {16e-9, 1.6465e6, 0.1, 1.0 / 3.0, 123456789.123, -2.5e-300}) {
    EXPECT_EQ(std::stod(cli::fmt(v)), v) << cli::fmt(v);
  }
  EXPECT_EQ(cli::fmt(16e-9), "1.6e-08");
}

// ---------------------------------------------------------------------------
// Executable

TEST(Cli, InvalidContrastExitsTwoNamingTheKey) {
  TempDir dir;
  spit(dir / "bad.ini", "[interferometer]\ncontrast_nu = 1.5\n");
  const auto r = run_cli(dir, "simulate --config " + (dir / "bad.ini") + " --output " + (dir / "x.tags"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("interferometer.contrast_nu"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "x.tags"));
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(run_cli(dir, "").code, 2);
  EXPECT_EQ(run_cli(dir, "spectrum").code, 2);
  EXPECT_EQ(run_cli(dir, "spectrum a.tags --output b.csv --bin 16parsecs").code, 2);
  EXPECT_EQ(run_cli(dir, "report " + dir.path().string()).code, 2);
  EXPECT_EQ(run_cli(dir, "spectrum " + (dir / "missing.tags") + " --output " + (dir / "o.csv")).code, 1);
  EXPECT_EQ(run_cli(dir, "--help").code, 0);
}

TEST(Cli, ThermalPipelineAndDeterministicReport) {
  TempDir dir;
  ASSERT_EQ(run_cli(dir, "simulate --duration 20s --seed 3 --output " + (dir / "run.tags")).code, 0);
  ASSERT_EQ(run_cli(dir, "spectrum " + (dir / "run.tags") + " --max-lag 5ms --output " + (dir / "run.spectrum.csv")).code, 0);
  const auto fit = run_cli(dir, "fit " + (dir / "run.spectrum.csv") + " --output " + (dir / "run.fit.json"));
  ASSERT_EQ(fit.code, 0) << fit.err;
  const auto j = nlohmann::json::parse(slurp(dir / "run.fit.json"));
  ASSERT_GE(j["fits"].size(), 1u);
  for (const auto& f : j["fits"]) EXPECT_TRUE(f["converged"].get<bool>());
  ASSERT_EQ(run_cli(dir, "nsr " + (dir / "run.tags") + " --lags 0.25ms,0.5ms --output " + (dir / "run.nsr.csv")).code, 0);

  ASSERT_EQ(run_cli(dir, "report " + dir.path().string() + " --output " + (dir / "rep1")).code, 0);
  ASSERT_EQ(run_cli(dir, "report " + dir.path().string() + " --output " + (dir / "rep2")).code, 0);
  for (const auto& name : {"frequency_table.csv", "report.json", "fig2_run.csv", "fig3_nsr.csv"}) {
    ASSERT_TRUE(fs::exists(dir.path() / "rep1" / name)) << name;
    EXPECT_EQ(slurp((dir.path() / "rep1" / name).string()), slurp((dir.path() / "rep2" / name).string())) << name;
  }
}

TEST(Cli, PulsedPipelineRecoversTruth) {
  TempDir dir;
  spit(dir / "p.ini", "[simulation]\nregime = pulsed\nduration = 30\nseed = 5\n");
  ASSERT_EQ(run_cli(dir, "simulate --config " + (dir / "p.ini") + " --output " + (dir / "p.tags")).code, 0);
  const auto r = run_cli(dir, "pulsed " + (dir / "p.tags") + " --output " + (dir / "p.pulsed.json") +
                                  " --histograms " + (dir / "p.hist"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "p.pulsed.json"));
  EXPECT_EQ(j["n"].get<long>(), 578);
  const double f = j["frequency"].get<double>();
  const double sf = j["sigma_frequency"].get<double>();
  EXPECT_LT(std::abs(f - 1.6465e6), 3.0 * sf);
  EXPECT_TRUE(fs::exists(dir / "p.hist1.csv"));
  EXPECT_TRUE(fs::exists(dir / "p.hist2.csv"));
}
