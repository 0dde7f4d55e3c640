#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace homsim {

// One detector click: picosecond timestamp and detector channel (0 or 1).
struct TimeTag {
    std::uint64_t t_ps = 0;
    std::uint8_t channel = 0;
};

// An ordered click record sequence (non-decreasing timestamps).  A stream may
// hold one channel or both, depending on how it was produced.
struct TimeTagStream {
    std::vector<TimeTag> tags;

    std::size_t size() const { return tags.size(); }
    bool empty() const { return tags.empty(); }

    // Throws config_error on a decreasing timestamp or a channel outside
    // {0, 1}, naming the offending record index.
    void validate() const;
};

// Binary tag-file layout (little-endian):
//   header, 16 bytes: magic "TTAG", version u16 = 1, reserved u16 = 0,
//                     record count u64
//   records, 16 bytes each: timestamp_ps u64, channel u8, 7 zero bytes
inline constexpr std::uint16_t kTagFormatVersion = 1;
inline constexpr std::size_t kTagHeaderBytes = 16;
inline constexpr std::size_t kTagRecordBytes = 16;

// Streaming reader with bounded memory: records are pulled in fixed-size
// chunks regardless of file length.  Validates the header eagerly and each
// record lazily (monotonicity by record index, truncation by byte offset).
class TagFileReader {
public:
    explicit TagFileReader(const std::string& path);
    ~TagFileReader();
    TagFileReader(const TagFileReader&) = delete;
    TagFileReader& operator=(const TagFileReader&) = delete;

    // Declared record count from the header.
    std::uint64_t count() const { return count_; }

    // Fetches the next record; returns false at a clean end of stream.
    // Throws io_error on truncation/corruption, config_error on invalid
    // record content.
    bool next(TimeTag& out);

private:
    void refill();

    std::FILE* file_ = nullptr;
    std::string path_;
    std::uint64_t count_ = 0;
    std::uint64_t read_ = 0;
    std::uint64_t last_t_ = 0;
    std::vector<unsigned char> buf_;
    std::size_t buf_pos_ = 0;
    std::size_t buf_len_ = 0;
};

// Streaming writer; the header's record count is patched on close().
class TagFileWriter {
public:
    explicit TagFileWriter(const std::string& path);
    ~TagFileWriter();
    TagFileWriter(const TagFileWriter&) = delete;
    TagFileWriter& operator=(const TagFileWriter&) = delete;

    void append(const TimeTag& tag);
    void close();

private:
    void flush_buf();

    std::FILE* file_ = nullptr;
    std::string path_;
    std::uint64_t written_ = 0;
    std::uint64_t last_t_ = 0;
    std::vector<unsigned char> buf_;
};

// Whole-file convenience wrappers over the streaming classes.
TimeTagStream read_tags(const std::string& path);
void write_tags(const TimeTagStream& stream, const std::string& path);

}  // namespace homsim
