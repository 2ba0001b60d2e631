#pragma once

// Two-photon correlation histogram over positive lags.
//
// counts[k] holds the number of ordered pairs (i < j) of photon time tags with
// lag t_j - t_i in (k*bin, (k+1)*bin] and lag <= max_lag. All detector
// channels are merged before pairing. Zero lags (coincident tags on
// different channels) fall in no bin.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "iontrap/error.hpp"
#include "iontrap/time_tag.hpp"
#include "iontrap/units.hpp"

namespace iontrap::corr {

struct CorrelationHistogram {
  std::uint64_t bin_width_ps = 0;
  std::uint64_t max_lag_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_source_events = 0;
  std::uint64_t acquisition_span_ps = 0;
  std::vector<std::string> warnings;

  [[nodiscard]] double bin_width() const { return static_cast<double>(bin_width_ps) * kPicosecond; }
  [[nodiscard]] double max_lag() const { return static_cast<double>(max_lag_ps) * kPicosecond; }
  [[nodiscard]] double acquisition_span() const {
    return static_cast<double>(acquisition_span_ps) * kPicosecond;
  }
  /// Lag at the centre of bin k, in seconds.
  [[nodiscard]] double lag_center(std::size_t k) const {
    return (static_cast<double>(k) + 0.5) * bin_width();
  }
  [[nodiscard]] std::uint64_t total_pairs() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

struct CorrelatorOptions {
  unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

inline std::size_t bin_count(std::uint64_t bin_ps, std::uint64_t max_lag_ps) {
  return static_cast<std::size_t>((max_lag_ps + bin_ps - 1) / bin_ps);
}

inline void check_geometry(std::uint64_t bin_ps, std::uint64_t max_lag_ps) {
  if (bin_ps == 0) throw PreconditionError("bin width must be at least 1 ps");
  if (max_lag_ps < bin_ps) throw PreconditionError("max lag must be at least one bin width");
}

/// Exact floor(d / bin) for d < 2^53 without a 64-bit division: a floating
/// estimate corrected by at most one step either way.
struct BinIndexer {
  std::uint64_t bin;
  double inv;

  explicit BinIndexer(std::uint64_t b) : bin(b), inv(1.0 / static_cast<double>(b)) {}

  [[nodiscard]] std::uint64_t operator()(std::uint64_t d) const {
    auto q = static_cast<std::uint64_t>(static_cast<double>(d) * inv);
    if (q * bin > d) {
      --q;
    } else if ((q + 1) * bin <= d) {
      ++q;
    }
    return q;
  }
};

/// Adds the pairs whose earlier member has index in [begin, end). Later
/// members may lie beyond `end`; that is the max_lag overlap between chunks.
inline void accumulate_pairs(std::span<const std::uint64_t> t, std::size_t begin, std::size_t end,
                             std::uint64_t max_lag_ps, const BinIndexer& index,
                             std::span<std::uint64_t> counts) {
  const std::size_t n = t.size();
  for (std::size_t i = begin; i < end; ++i) {
    const std::uint64_t ti = t[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::uint64_t d = t[j] - ti;
      if (d > max_lag_ps) break;
      if (d == 0) continue;
      ++counts[index(d - 1)];
    }
  }
}

inline void check_sorted(std::span<const std::uint64_t> t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] < t[i - 1]) throw OrderingError("time tags not sorted at index " + std::to_string(i));
}

}  // namespace detail

/// Histogram of a sorted photon timestamp sequence (picoseconds). The
/// sequence is cut into contiguous chunks processed concurrently; every pair
/// belongs to the chunk of its earlier member, so the merged integer counts
/// equal the sequential result exactly.
[[nodiscard]] inline CorrelationHistogram correlation_histogram_ps(std::span<const std::uint64_t> timestamps,
                                                                   std::uint64_t bin_ps,
                                                                   std::uint64_t max_lag_ps,
                                                                   CorrelatorOptions options = {}) {
  detail::check_geometry(bin_ps, max_lag_ps);
  detail::check_sorted(timestamps);

  CorrelationHistogram h;
  h.bin_width_ps = bin_ps;
  h.max_lag_ps = max_lag_ps;
  h.counts.assign(detail::bin_count(bin_ps, max_lag_ps), 0);
  h.n_source_events = timestamps.size();
  if (!timestamps.empty()) h.acquisition_span_ps = timestamps.back() - timestamps.front();
  if (timestamps.empty()) {
    h.warnings.emplace_back("empty stream: histogram is all zero");
    return h;
  }

  const detail::BinIndexer index(bin_ps);
  unsigned threads = options.threads != 0 ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, timestamps.size() / 4096)));

  if (threads <= 1) {
    detail::accumulate_pairs(timestamps, 0, timestamps.size(), max_lag_ps, index, h.counts);
    return h;
  }

  std::vector<std::vector<std::uint64_t>> partial(threads, std::vector<std::uint64_t>(h.counts.size(), 0));
  {
    std::vector<std::jthread> pool;
    const std::size_t n = timestamps.size();
    for (unsigned c = 0; c < threads; ++c) {
      const std::size_t begin = n * c / threads;
      const std::size_t end = n * (c + 1) / threads;
      pool.emplace_back([&, begin, end, c] {
        detail::accumulate_pairs(timestamps, begin, end, max_lag_ps, index, partial[c]);
      });
    }
  }
  for (const auto& p : partial)
    for (std::size_t k = 0; k < p.size(); ++k) h.counts[k] += p[k];
  return h;
}

/// Histogram of a tag stream with bin width and max lag in seconds (rounded
/// to whole picoseconds). Trigger records are ignored.
[[nodiscard]] inline CorrelationHistogram correlation_histogram(const TagStream& stream, double bin_width,
                                                                double max_lag, CorrelatorOptions options = {}) {
  if (!(bin_width > 0.0) || !(max_lag > 0.0)) throw PreconditionError("bin width and max lag must be positive");
  const auto ts = photon_timestamps(stream);
  auto h = correlation_histogram_ps(ts, static_cast<std::uint64_t>(to_ps(bin_width)),
                                    static_cast<std::uint64_t>(to_ps(max_lag)), options);
  if (stream.acquisition_span_ps > 0) h.acquisition_span_ps = stream.acquisition_span_ps;
  return h;
}

/// Incremental version for streamed input. Timestamps are pushed in order
/// in arbitrary chunks; the result is identical to the one-shot histogram.
class StreamingCorrelator {
public:
  StreamingCorrelator(std::uint64_t bin_ps, std::uint64_t max_lag_ps) : index_(bin_ps) {
    detail::check_geometry(bin_ps, max_lag_ps);
    hist_.bin_width_ps = bin_ps;
    hist_.max_lag_ps = max_lag_ps;
    hist_.counts.assign(detail::bin_count(bin_ps, max_lag_ps), 0);
  }

  void push(std::span<const std::uint64_t> chunk) {
    for (auto t : chunk) {
      if (any_ && t < last_) throw OrderingError("time tags not sorted in streamed input");
      if (!any_) first_ = t;
      any_ = true;
      last_ = t;
      buffer_.push_back(t);
    }
    hist_.n_source_events += chunk.size();
    if (buffer_.empty()) return;
    // Earlier members whose partners are all buffered can be finalised.
    const std::uint64_t newest = buffer_.back();
    std::size_t done = 0;
    while (done < buffer_.size() && newest - buffer_[done] > hist_.max_lag_ps) ++done;
    detail::accumulate_pairs(buffer_, 0, done, hist_.max_lag_ps, index_, hist_.counts);
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(done));
  }

  [[nodiscard]] CorrelationHistogram finish() {
    detail::accumulate_pairs(buffer_, 0, buffer_.size(), hist_.max_lag_ps, index_, hist_.counts);
    buffer_.clear();
    if (any_) hist_.acquisition_span_ps = last_ - first_;
    else hist_.warnings.emplace_back("empty stream: histogram is all zero");
    return hist_;
  }

private:
  detail::BinIndexer index_;
  CorrelationHistogram hist_;
  std::vector<std::uint64_t> buffer_;
  std::uint64_t first_ = 0;
  std::uint64_t last_ = 0;
  bool any_ = false;
};

/// Counts divided by the expected number of uncorrelated pairs per bin,
/// N^2 * bin / T * (1 - tau/T). Equals 1 for a Poisson stream.
[[nodiscard]] inline std::vector<double> normalized_g2(const CorrelationHistogram& h) {
  std::vector<double> g(h.counts.size(), 0.0);
  const double span = h.acquisition_span();
  if (span <= 0.0 || h.n_source_events == 0) return g;
  const double n = static_cast<double>(h.n_source_events);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double expected = n * n / span * h.bin_width() * (1.0 - h.lag_center(k) / span);
    g[k] = expected > 0.0 ? static_cast<double>(h.counts[k]) / expected : 0.0;
  }
  return g;
}

}  // namespace iontrap::corr
