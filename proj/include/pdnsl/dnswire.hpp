#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pdnsl/bytes.hpp"
#include "pdnsl/ip.hpp"

// DNS wire-format parsing and encoding, enough to pull query/response
// pairs for A, AAAA and MX records out of captured traffic. Everything in
// here is pure: no shared state, safe from any thread.
namespace pdnsl::dnswire {

inline constexpr uint16_t kTypeA = 1;
inline constexpr uint16_t kTypeMx = 15;
inline constexpr uint16_t kTypeAaaa = 28;
inline constexpr uint16_t kClassIn = 1;
inline constexpr size_t kHeaderBytes = 12;
inline constexpr int kMaxPointerHops = 128;
inline constexpr size_t kMaxNameWireBytes = 255;
inline constexpr size_t kMaxLabelBytes = 63;

enum class ParseErrc {
    truncated_message,
    malformed_name,
    malformed_record,
};

enum class EncodeErrc {
    name_too_long,
    rdata_length_mismatch,
    section_overflow,
};

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ParseErrc code() const { return code_; }

private:
    ParseErrc code_;
};

class EncodeError : public std::runtime_error {
public:
    EncodeError(EncodeErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    EncodeErrc code() const { return code_; }

private:
    EncodeErrc code_;
};

// A domain name as a label sequence. Raw label case is preserved so encode
// round-trips exactly; comparison and presentation are case-insensitive.
class DnsName {
public:
    DnsName() = default;
    explicit DnsName(std::vector<std::string> labels) : labels_(std::move(labels)) {}

    // "a.b.c" or "." for root; does not support escaped dots
    static DnsName from_presentation(const std::string& text);

    const std::vector<std::string>& labels() const { return labels_; }
    bool is_root() const { return labels_.empty(); }
    std::string presentation() const;  // lowercased, dot-joined, "." for root
    size_t wire_length() const;        // label bytes + length octets + terminator

    bool operator==(const DnsName& other) const;
    bool operator!=(const DnsName& other) const { return !(*this == other); }

private:
    std::vector<std::string> labels_;
};

struct DnsFlags {
    bool qr = false;  // 0 = query, 1 = response
    uint8_t opcode = 0;
    bool aa = false;
    bool tc = false;
    bool rd = false;
    bool ra = false;
    uint8_t rcode = 0;

    uint16_t pack() const;
    static DnsFlags unpack(uint16_t raw);
    bool operator==(const DnsFlags&) const = default;
};

struct Question {
    DnsName qname;
    uint16_t qtype = 0;
    uint16_t qclass = kClassIn;
    bool operator==(const Question&) const = default;
};

struct MxRdata {
    uint16_t preference = 0;
    DnsName exchange;
    bool operator==(const MxRdata&) const = default;
};

// Typed payload for A/AAAA/MX; anything else is carried as opaque bytes.
using Rdata = std::variant<Ipv4Address, Ipv6Address, MxRdata, Bytes>;

struct ResourceRecord {
    DnsName name;
    uint16_t rtype = 0;
    uint16_t rclass = kClassIn;
    uint32_t ttl = 0;
    Rdata rdata = Bytes{};
    bool operator==(const ResourceRecord&) const = default;
};

struct DnsMessage {
    uint16_t id = 0;
    DnsFlags flags;
    std::vector<Question> questions;
    std::vector<ResourceRecord> answers;
    std::vector<ResourceRecord> authorities;
    std::vector<ResourceRecord> additionals;
    bool operator==(const DnsMessage&) const = default;
};

// Throws ParseError; never returns a partial message. Compression pointers
// are resolved (bounded at kMaxPointerHops); unknown record types come back
// opaque. Bytes past the declared sections are ignored.
DnsMessage parse_message(const uint8_t* data, size_t len);
DnsMessage parse_message(const Bytes& data);

// Canonical wire bytes, never emits compression. Throws EncodeError.
Bytes encode_message(const DnsMessage& msg);

// Text form of an answer payload: dotted quad, canonical IPv6, MX exchange
// name, or hex for opaque rdata.
std::string rdata_text(const ResourceRecord& rr);

}  // namespace pdnsl::dnswire
