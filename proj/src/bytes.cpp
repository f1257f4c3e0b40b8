#include "pdnsl/bytes.hpp"

namespace pdnsl {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

std::string hex_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        out.push_back(kHexDigits[data[i] >> 4]);
        out.push_back(kHexDigits[data[i] & 0x0f]);
    }
    return out;
}

std::string hex_encode(const Bytes& data) { return hex_encode(data.data(), data.size()); }

std::optional<Bytes> hex_decode(const std::string& hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<uint8_t>(hi << 4 | lo));
    }
    return out;
}

void ByteWriter::u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
}

void ByteWriter::u32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        buf_.push_back(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::u64(uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        buf_.push_back(static_cast<uint8_t>(v >> shift));
}

void ByteWriter::raw(const uint8_t* data, size_t len) { buf_.insert(buf_.end(), data, data + len); }

void ByteWriter::str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::bytes(const Bytes& b) {
    u32(static_cast<uint32_t>(b.size()));
    raw(b);
}

void ByteReader::need(size_t k) const {
    if (n_ - pos_ < k) throw ShortRead("byte reader overrun");
}

uint8_t ByteReader::u8() {
    need(1);
    return d_[pos_++];
}

uint16_t ByteReader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(d_[pos_] << 8 | d_[pos_ + 1]);
    pos_ += 2;
    return v;
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | d_[pos_ + i];
    pos_ += 4;
    return v;
}

uint64_t ByteReader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | d_[pos_ + i];
    pos_ += 8;
    return v;
}

Bytes ByteReader::raw(size_t len) {
    need(len);
    Bytes out(d_ + pos_, d_ + pos_ + len);
    pos_ += len;
    return out;
}

std::string ByteReader::str() {
    uint32_t len = u32();
    need(len);
    std::string out(reinterpret_cast<const char*>(d_ + pos_), len);
    pos_ += len;
    return out;
}

Bytes ByteReader::bytes() {
    uint32_t len = u32();
    return raw(len);
}

void ByteReader::expect_done(const char* context) const {
    if (!done()) throw ShortRead(std::string("trailing bytes after ") + context);
}

}  // namespace pdnsl
