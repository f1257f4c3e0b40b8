#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdnsl {

using Bytes = std::vector<uint8_t>;

std::string hex_encode(const uint8_t* data, size_t len);
std::string hex_encode(const Bytes& data);
std::optional<Bytes> hex_decode(const std::string& hex);

// Thrown by ByteReader on overrun or trailing-byte violations.
class ShortRead : public std::runtime_error {
public:
    explicit ShortRead(const std::string& what) : std::runtime_error(what) {}
};

// Big-endian primitive writer with length-prefixed strings. All canonical
// serialization in the project goes through this so digests are stable.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(const uint8_t* data, size_t len);
    void raw(const Bytes& data) { raw(data.data(), data.size()); }
    // u32 length prefix + bytes
    void str(const std::string& s);
    void bytes(const Bytes& b);

    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    Bytes buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t len) : d_(data), n_(len) {}
    explicit ByteReader(const Bytes& b) : d_(b.data()), n_(b.size()) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    Bytes raw(size_t len);
    std::string str();
    Bytes bytes();

    size_t pos() const { return pos_; }
    size_t remaining() const { return n_ - pos_; }
    bool done() const { return pos_ == n_; }
    // Throws ShortRead unless every byte was consumed.
    void expect_done(const char* context) const;

private:
    void need(size_t k) const;
    const uint8_t* d_;
    size_t n_;
    size_t pos_ = 0;
};

}  // namespace pdnsl
