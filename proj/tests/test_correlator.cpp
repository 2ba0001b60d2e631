#include <gtest/gtest.h>

#include <random>

#include "iontrap/correlator.hpp"

using namespace iontrap;
using namespace iontrap::corr;

namespace {

std::vector<std::uint64_t> random_tags(std::size_t n, std::uint64_t span_ps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> d(0, span_ps);
  std::vector<std::uint64_t> t(n);
  for (auto& x : t) x = d(rng);
  std::sort(t.begin(), t.end());
  return t;
}

std::vector<std::uint64_t> brute_force(const std::vector<std::uint64_t>& t, std::uint64_t bin, std::uint64_t max_lag) {
  std::vector<std::uint64_t> c((max_lag + bin - 1) / bin, 0);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const auto d = t[j] - t[i];
      if (d == 0 || d > max_lag) continue;
      ++c[(d - 1) / bin];  // lag in (k bin, (k+1) bin]
    }
  return c;
}

TagStream stream_of(const std::vector<std::uint64_t>& t) {
  TagStream s;
  for (std::size_t i = 0; i < t.size(); ++i) s.records.push_back({t[i], static_cast<std::uint8_t>(i % 2)});
  return s;
}

}  // namespace

TEST(Correlator, SinglePairLandsInItsBin) {
  // 100 ns at 8 ns bins: (12*8, 13*8] = (96, 104].
  const std::vector<std::uint64_t> t{0, 100000};
  const auto h = correlation_histogram_ps(t, 8000, 1000000);
  ASSERT_EQ(h.counts.size(), 125u);
  EXPECT_EQ(h.counts[12], 1u);
  EXPECT_EQ(h.total_pairs(), 1u);
}

TEST(Correlator, BinEdgesAreLeftOpen) {
  const std::vector<std::uint64_t> t{0, 8000, 16001};
  const auto h = correlation_histogram_ps(t, 8000, 80000);
  EXPECT_EQ(h.counts[0], 1u);  // 8000 -> (0, 8000]
  EXPECT_EQ(h.counts[1], 1u);  // 8001 and ...
  EXPECT_EQ(h.counts[2], 1u);  // 16001 -> (16000, 24000]
  const std::vector<std::uint64_t> same{5, 5, 5};
  EXPECT_EQ(correlation_histogram_ps(same, 8000, 80000).total_pairs(), 0u);
}

TEST(Correlator, MatchesBruteForce) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = random_tags(3000, 200'000'000, seed);  // dense: ~15 tags per us
    for (std::uint64_t bin : {1000u, 16000u, 7777u}) {
      const std::uint64_t max_lag = 2'000'000;
      const auto h = correlation_histogram_ps(t, bin, max_lag, {.threads = 1});
      EXPECT_EQ(h.counts, brute_force(t, bin, max_lag)) << seed << " " << bin;
    }
  }
}

TEST(Correlator, LagAtMaxIsIncludedAndRaggedLastBin) {
  const std::vector<std::uint64_t> t{0, 1000, 1001};
  const auto h = correlation_histogram_ps(t, 300, 1000);
  ASSERT_EQ(h.counts.size(), 4u);
  EXPECT_EQ(h.counts[3], 1u);  // lag 1000 in (900, 1200]
  EXPECT_EQ(h.total_pairs(), 2u);  // 1001 exceeds the max lag
}

TEST(Correlator, ThreadCountDoesNotChangeCounts) {
  const auto t = random_tags(200000, 4'000'000'000ULL, 9);
  const auto one = correlation_histogram_ps(t, 16000, 5'000'000, {.threads = 1});
  for (unsigned threads : {2u, 3u, 7u, 16u}) {
    EXPECT_EQ(correlation_histogram_ps(t, 16000, 5'000'000, {.threads = threads}).counts, one.counts) << threads;
  }
}

TEST(Correlator, StreamingMatchesOneShot) {
  const auto t = random_tags(50000, 1'000'000'000ULL, 4);
  const auto ref = correlation_histogram_ps(t, 16000, 5'000'000, {.threads = 1});
  for (std::size_t chunk : {1u, 17u, 1000u, 60000u}) {
    StreamingCorrelator s(16000, 5'000'000);
    for (std::size_t i = 0; i < t.size(); i += chunk)
      s.push(std::span<const std::uint64_t>(t).subspan(i, std::min(chunk, t.size() - i)));
    const auto h = s.finish();
    EXPECT_EQ(h.counts, ref.counts) << chunk;
    EXPECT_EQ(h.n_source_events, t.size());
    EXPECT_EQ(h.acquisition_span_ps, t.back() - t.front());
  }
}

// Pair counts are additive: cross pairs between two well-separated segments vanish.
TEST(Correlator, SeparatedSegmentsAdd) {
  auto a = random_tags(20000, 500'000'000, 5);
  auto b = random_tags(20000, 500'000'000, 6);
  for (auto& x : b) x += 600'000'000;  // gap larger than max lag
  auto both = a;
  both.insert(both.end(), b.begin(), b.end());
  const auto ha = correlation_histogram_ps(a, 16000, 5'000'000);
  const auto hb = correlation_histogram_ps(b, 16000, 5'000'000);
  const auto hab = correlation_histogram_ps(both, 16000, 5'000'000);
  for (std::size_t k = 0; k < hab.counts.size(); ++k) EXPECT_EQ(hab.counts[k], ha.counts[k] + hb.counts[k]);
}

TEST(Correlator, ChannelsAreMergedAndTriggersIgnored) {
  TagStream s;
  s.records = {{0, 0}, {50, kTriggerChannel}, {1000, 1}, {2000, 0}};
  const auto h = correlation_histogram(s, 1e-9, 10e-9);
  EXPECT_EQ(h.n_source_events, 3u);
  EXPECT_EQ(h.counts[0], 2u);  // 0->1000 and 1000->2000, across channels
  EXPECT_EQ(h.counts[1], 1u);
}

TEST(Correlator, EmptyInputWarns) {
  const auto h = correlation_histogram(TagStream{}, 16e-9, 5e-3);
  EXPECT_EQ(h.total_pairs(), 0u);
  ASSERT_EQ(h.warnings.size(), 1u);
  StreamingCorrelator s(16000, 5'000'000);
  EXPECT_EQ(s.finish().warnings.size(), 1u);
}

TEST(Correlator, RejectsUnsortedInputAndBadGeometry) {
  const std::vector<std::uint64_t> t{10, 5};
  EXPECT_THROW((void)correlation_histogram_ps(t, 1, 100), OrderingError);
  StreamingCorrelator s(1, 100);
  const std::vector<std::uint64_t> first{10}, second{5};
  s.push(first);
  EXPECT_THROW(s.push(second), OrderingError);
  const std::vector<std::uint64_t> ok{1, 2};
  EXPECT_THROW((void)correlation_histogram_ps(ok, 0, 100), PreconditionError);
  EXPECT_THROW((void)correlation_histogram_ps(ok, 200, 100), PreconditionError);
  EXPECT_THROW((void)correlation_histogram(TagStream{}, -1.0, 1.0), PreconditionError);
}

TEST(Correlator, PoissonStreamNormalisesToOne) {
  const auto t = random_tags(400000, 8'000'000'000ULL, 12);
  const auto h = correlation_histogram_ps(t, 16000, 1'000'000);
  const auto g = normalized_g2(h);
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  // ~20 expected pairs per bin, 62 bins: relative error about 3 %.
  EXPECT_NEAR(mean, 1.0, 0.03);
}
