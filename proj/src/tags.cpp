#include "homsim/tags.hpp"

#include <cstring>

#include "homsim/errors.hpp"

namespace homsim {

namespace {

constexpr char kMagic[4] = {'T', 'T', 'A', 'G'};
constexpr std::size_t kChunkRecords = 4096;

void put_u16(unsigned char* p, std::uint16_t v) {
    p[0] = static_cast<unsigned char>(v & 0xff);
    p[1] = static_cast<unsigned char>(v >> 8);
}

void put_u64(unsigned char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

void TimeTagStream::validate() const {
    std::uint64_t last = 0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i].channel > 1)
            throw config_error("tag record " + std::to_string(i) +
                               ": channel must be 0 or 1");
        if (i > 0 && tags[i].t_ps < last)
            throw config_error("tag record " + std::to_string(i) +
                               ": timestamps must be non-decreasing");
        last = tags[i].t_ps;
    }
}

TagFileReader::TagFileReader(const std::string& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "rb");
    if (file_ == nullptr) throw io_error("cannot open tag file: " + path);
    unsigned char header[kTagHeaderBytes];
    std::size_t got = std::fread(header, 1, sizeof header, file_);
    if (got != sizeof header) {
        std::fclose(file_);
        file_ = nullptr;
        throw io_error("truncated tag file header at byte offset " +
                       std::to_string(got) + ": " + path);
    }
    if (std::memcmp(header, kMagic, 4) != 0) {
        std::fclose(file_);
        file_ = nullptr;
        throw io_error("bad magic in tag file: " + path);
    }
    std::uint16_t version = get_u16(header + 4);
    if (version != kTagFormatVersion) {
        std::fclose(file_);
        file_ = nullptr;
        throw io_error("unsupported tag file version " +
                       std::to_string(version) + ": " + path);
    }
    count_ = get_u64(header + 8);
    buf_.resize(kChunkRecords * kTagRecordBytes);
}

TagFileReader::~TagFileReader() {
    if (file_ != nullptr) std::fclose(file_);
}

void TagFileReader::refill() {
    buf_len_ = std::fread(buf_.data(), 1, buf_.size(), file_);
    buf_pos_ = 0;
}

bool TagFileReader::next(TimeTag& out) {
    if (read_ == count_) {
        // Confirm there is no trailing garbage beyond the declared count.
        if (buf_pos_ == buf_len_) {
            unsigned char extra;
            if (std::fread(&extra, 1, 1, file_) == 1)
                throw io_error("tag file has data beyond declared record count: " +
                               path_);
        }
        return false;
    }
    if (buf_pos_ == buf_len_) {
        refill();
        if (buf_len_ == 0) {
            std::uint64_t offset = kTagHeaderBytes + read_ * kTagRecordBytes;
            throw io_error("truncated tag file at byte offset " +
                           std::to_string(offset) + " (record " +
                           std::to_string(read_) + " of " +
                           std::to_string(count_) + "): " + path_);
        }
    }
    if (buf_len_ - buf_pos_ < kTagRecordBytes) {
        // Partial record at the end of the file.
        std::size_t have = buf_len_ - buf_pos_;
        std::uint64_t offset = kTagHeaderBytes + read_ * kTagRecordBytes + have;
        throw io_error("truncated tag record at byte offset " +
                       std::to_string(offset) + " (record " +
                       std::to_string(read_) + "): " + path_);
    }
    const unsigned char* rec = buf_.data() + buf_pos_;
    out.t_ps = get_u64(rec);
    out.channel = rec[8];
    if (out.channel > 1)
        throw config_error("tag record " + std::to_string(read_) +
                           ": channel must be 0 or 1: " + path_);
    if (read_ > 0 && out.t_ps < last_t_)
        throw config_error("tag record " + std::to_string(read_) +
                           ": timestamps must be non-decreasing: " + path_);
    last_t_ = out.t_ps;
    buf_pos_ += kTagRecordBytes;
    ++read_;
    return true;
}

TagFileWriter::TagFileWriter(const std::string& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "wb");
    if (file_ == nullptr) throw io_error("cannot create tag file: " + path);
    unsigned char header[kTagHeaderBytes] = {};
    std::memcpy(header, kMagic, 4);
    put_u16(header + 4, kTagFormatVersion);
    put_u16(header + 6, 0);
    put_u64(header + 8, 0);  // patched in close()
    if (std::fwrite(header, 1, sizeof header, file_) != sizeof header)
        throw io_error("failed to write tag file header: " + path);
    buf_.reserve(kChunkRecords * kTagRecordBytes);
}

TagFileWriter::~TagFileWriter() {
    try {
        close();
    } catch (...) {
        // Destructor must not throw; close() explicitly to observe errors.
    }
}

void TagFileWriter::flush_buf() {
    if (buf_.empty()) return;
    if (std::fwrite(buf_.data(), 1, buf_.size(), file_) != buf_.size())
        throw io_error("failed to write tag records: " + path_);
    buf_.clear();
}

void TagFileWriter::append(const TimeTag& tag) {
    if (file_ == nullptr) throw io_error("tag file already closed: " + path_);
    if (tag.channel > 1)
        throw config_error("tag record " + std::to_string(written_) +
                           ": channel must be 0 or 1");
    if (written_ > 0 && tag.t_ps < last_t_)
        throw config_error("tag record " + std::to_string(written_) +
                           ": timestamps must be non-decreasing");
    last_t_ = tag.t_ps;
    unsigned char rec[kTagRecordBytes] = {};
    put_u64(rec, tag.t_ps);
    rec[8] = tag.channel;
    buf_.insert(buf_.end(), rec, rec + sizeof rec);
    if (buf_.size() >= kChunkRecords * kTagRecordBytes) flush_buf();
    ++written_;
}

void TagFileWriter::close() {
    if (file_ == nullptr) return;
    flush_buf();
    unsigned char cnt[8];
    put_u64(cnt, written_);
    if (std::fseek(file_, 8, SEEK_SET) != 0 ||
        std::fwrite(cnt, 1, sizeof cnt, file_) != sizeof cnt) {
        std::fclose(file_);
        file_ = nullptr;
        throw io_error("failed to finalize tag file header: " + path_);
    }
    int rc = std::fclose(file_);
    file_ = nullptr;
    if (rc != 0) throw io_error("failed to close tag file: " + path_);
}

TimeTagStream read_tags(const std::string& path) {
    TagFileReader reader(path);
    TimeTagStream stream;
    stream.tags.reserve(static_cast<std::size_t>(reader.count()));
    TimeTag tag;
    while (reader.next(tag)) stream.tags.push_back(tag);
    return stream;
}

void write_tags(const TimeTagStream& stream, const std::string& path) {
    TagFileWriter writer(path);
    for (const auto& tag : stream.tags) writer.append(tag);
    writer.close();
}

}  // namespace homsim
