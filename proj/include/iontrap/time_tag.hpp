#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iontrap/error.hpp"

namespace iontrap {

/// Channel reserved for pulsed-drive trigger markers.
inline constexpr std::uint8_t kTriggerChannel = 255;

struct TimeTagRecord {
  std::uint64_t timestamp_ps = 0;
  std::uint8_t channel = 0;

  [[nodiscard]] bool is_trigger() const noexcept { return channel == kTriggerChannel; }
  friend auto operator<=>(const TimeTagRecord&, const TimeTagRecord&) = default;
};

/// An acquisition: time-ordered records plus the detector count and the
/// nominal span of the acquisition window.
struct TagStream {
  std::vector<TimeTagRecord> records;
  std::uint8_t channel_count = 2;
  std::uint64_t acquisition_span_ps = 0;

  friend bool operator==(const TagStream&, const TagStream&) = default;
};

/// Photon timestamps of a stream with trigger records removed. Throws
/// OrderingError if the records are not sorted.
[[nodiscard]] inline std::vector<std::uint64_t> photon_timestamps(std::span<const TimeTagRecord> records) {
  std::vector<std::uint64_t> out;
  out.reserve(records.size());
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.timestamp_ps < last)
      throw OrderingError("time tags not sorted at record " + std::to_string(i));
    last = r.timestamp_ps;
    if (!r.is_trigger()) out.push_back(r.timestamp_ps);
  }
  return out;
}

[[nodiscard]] inline std::vector<std::uint64_t> photon_timestamps(const TagStream& stream) {
  return photon_timestamps(std::span<const TimeTagRecord>(stream.records));
}

}  // namespace iontrap
