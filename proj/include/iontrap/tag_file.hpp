#pragma once

// Native binary time-tag file.
//
// Header: magic "IONTAG01", u16 version, u32 resolution in ps, u8 channel
// count, u32 metadata length, metadata bytes (UTF-8 JSON). Then fixed 9-byte
// records: u64 timestamp_ps, u8 channel. All integers little-endian.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iontrap/error.hpp"
#include "iontrap/time_tag.hpp"

namespace iontrap::io {

inline constexpr std::array<char, 8> kTagMagic{'I', 'O', 'N', 'T', 'A', 'G', '0', '1'};
inline constexpr std::uint16_t kTagFormatVersion = 1;
inline constexpr std::size_t kTagRecordSize = 9;

struct TagFileHeader {
  std::uint16_t version = kTagFormatVersion;
  std::uint32_t resolution_ps = 1;
  std::uint8_t channel_count = 2;
  std::string metadata;  // JSON text

  friend bool operator==(const TagFileHeader&, const TagFileHeader&) = default;
};

namespace detail {

template <class T>
void put_le(char* out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
}

template <class T>
T get_le(const char* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace detail

/// Sequential writer. Records must arrive in non-decreasing timestamp order.
class TagFileWriter {
 public:
  TagFileWriter(const std::string& path, const TagFileHeader& header) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open " + path + " for writing");
    std::vector<char> buf(8 + 2 + 4 + 1 + 4);
    std::memcpy(buf.data(), kTagMagic.data(), 8);
    detail::put_le<std::uint16_t>(buf.data() + 8, header.version);
    detail::put_le<std::uint32_t>(buf.data() + 10, header.resolution_ps);
    detail::put_le<std::uint8_t>(buf.data() + 14, header.channel_count);
    detail::put_le<std::uint32_t>(buf.data() + 15, static_cast<std::uint32_t>(header.metadata.size()));
    out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out_.write(header.metadata.data(), static_cast<std::streamsize>(header.metadata.size()));
    check();
  }

  void write(std::span<const TimeTagRecord> records) {
    buffer_.resize(records.size() * kTagRecordSize);
    char* p = buffer_.data();
    for (const auto& r : records) {
      if (r.timestamp_ps < last_) throw OrderingError("records must be written in timestamp order");
      last_ = r.timestamp_ps;
      detail::put_le<std::uint64_t>(p, r.timestamp_ps);
      p[8] = static_cast<char>(r.channel);
      p += kTagRecordSize;
    }
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    count_ += records.size();
    check();
  }

  void close() {
    if (!out_.is_open()) return;
    out_.flush();
    check();
    out_.close();
  }

  ~TagFileWriter() {
    if (out_.is_open()) out_.close();
  }

  [[nodiscard]] std::uint64_t records_written() const { return count_; }

 private:
  void check() {
    if (!out_) throw IoError("write to " + path_ + " failed");
  }

  std::string path_;
  std::ofstream out_;
  std::vector<char> buffer_;
  std::uint64_t last_ = 0;
  std::uint64_t count_ = 0;
};

/// Sequential reader; never holds more than one chunk of records.
class TagFileReader {
 public:
  explicit TagFileReader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw IoError("cannot open " + path);
    std::array<char, 19> buf{};
    in_.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in_.gcount() != static_cast<std::streamsize>(buf.size())) throw FormatError(path + ": truncated header");
    if (std::memcmp(buf.data(), kTagMagic.data(), 8) != 0) throw FormatError(path + ": bad magic, not a tag file");
    header_.version = detail::get_le<std::uint16_t>(buf.data() + 8);
    if (header_.version != kTagFormatVersion)
      throw FormatError(path + ": unsupported format version " + std::to_string(header_.version));
    header_.resolution_ps = detail::get_le<std::uint32_t>(buf.data() + 10);
    if (header_.resolution_ps == 0) throw FormatError(path + ": zero timestamp resolution");
    header_.channel_count = detail::get_le<std::uint8_t>(buf.data() + 14);
    const auto meta_len = detail::get_le<std::uint32_t>(buf.data() + 15);
    header_.metadata.resize(meta_len);
    in_.read(header_.metadata.data(), meta_len);
    if (in_.gcount() != static_cast<std::streamsize>(meta_len)) throw FormatError(path + ": truncated metadata");
  }

  [[nodiscard]] const TagFileHeader& header() const { return header_; }

  /// Reads up to `max_records` records into `out` (cleared first). Returns
  /// false at end of file.
  bool read_chunk(std::vector<TimeTagRecord>& out, std::size_t max_records = 1 << 20) {
    out.clear();
    buffer_.resize(max_records * kTagRecordSize);
    in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got % kTagRecordSize != 0) throw FormatError(path_ + ": truncated record at end of file");
    out.reserve(got / kTagRecordSize);
    for (std::size_t off = 0; off < got; off += kTagRecordSize) {
      const TimeTagRecord r{detail::get_le<std::uint64_t>(buffer_.data() + off),
                            static_cast<std::uint8_t>(buffer_[off + 8])};
      if (r.timestamp_ps < last_)
        throw OrderingError(path_ + ": timestamps not sorted at record " + std::to_string(index_));
      last_ = r.timestamp_ps;
      ++index_;
      out.push_back(r);
    }
    return !out.empty();
  }

 private:
  std::string path_;
  std::ifstream in_;
  TagFileHeader header_;
  std::vector<char> buffer_;
  std::uint64_t last_ = 0;
  std::uint64_t index_ = 0;
};

inline void write_tag_file(const std::string& path, const TagStream& stream, std::string metadata = "{}") {
  TagFileHeader h;
  h.channel_count = stream.channel_count;
  h.metadata = std::move(metadata);
  TagFileWriter w(path, h);
  w.write(stream.records);
  w.close();
}

struct LoadedTagFile {
  TagFileHeader header;
  TagStream stream;
};

/// Loads a whole file. The acquisition span is taken from the metadata key
/// "acquisition_span_ps" when present, else from the last record.
[[nodiscard]] inline LoadedTagFile read_tag_file(const std::string& path) {
  TagFileReader reader(path);
  LoadedTagFile f;
  f.header = reader.header();
  f.stream.channel_count = f.header.channel_count;
  std::vector<TimeTagRecord> chunk;
  while (reader.read_chunk(chunk)) f.stream.records.insert(f.stream.records.end(), chunk.begin(), chunk.end());
  f.stream.acquisition_span_ps = f.stream.records.empty() ? 0 : f.stream.records.back().timestamp_ps;
  const auto meta = nlohmann::json::parse(f.header.metadata, nullptr, false);
  if (meta.is_object() && meta.contains("acquisition_span_ps") && meta["acquisition_span_ps"].is_number_unsigned())
    f.stream.acquisition_span_ps = meta["acquisition_span_ps"].get<std::uint64_t>();
  return f;
}

}  // namespace iontrap::io
