#include "pdnsl/dnswire.hpp"

#include <algorithm>
#include <cctype>

namespace pdnsl::dnswire {

namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool label_equal_ci(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (lower(a[i]) != lower(b[i])) return false;
    return true;
}

struct Cursor {
    const uint8_t* data;
    size_t len;
    size_t pos = 0;

    uint8_t u8() {
        if (pos + 1 > len) throw ParseError(ParseErrc::truncated_message, "unexpected end of message");
        return data[pos++];
    }
    uint16_t u16() {
        if (pos + 2 > len) throw ParseError(ParseErrc::truncated_message, "unexpected end of message");
        uint16_t v = static_cast<uint16_t>(data[pos] << 8 | data[pos + 1]);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        if (pos + 4 > len) throw ParseError(ParseErrc::truncated_message, "unexpected end of message");
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | data[pos + i];
        pos += 4;
        return v;
    }
};

DnsName parse_name(Cursor& cur) {
    std::vector<std::string> labels;
    size_t wire_len = 1;  // terminator
    int hops = 0;
    size_t resume = 0;
    bool jumped = false;

    for (;;) {
        uint8_t len = cur.u8();
        if (len == 0) break;
        uint8_t tag = len & 0xc0;
        if (tag == 0xc0) {
            uint8_t lo = cur.u8();
            if (++hops > kMaxPointerHops)
                throw ParseError(ParseErrc::malformed_name, "compression pointer loop");
            size_t offset = static_cast<size_t>(len & 0x3f) << 8 | lo;
            if (offset >= cur.len)
                throw ParseError(ParseErrc::malformed_name, "compression pointer out of range");
            if (!jumped) {
                resume = cur.pos;
                jumped = true;
            }
            cur.pos = offset;
            continue;
        }
        if (tag != 0)
            throw ParseError(ParseErrc::malformed_name, "reserved label type");
        wire_len += 1 + len;
        if (wire_len > kMaxNameWireBytes)
            throw ParseError(ParseErrc::malformed_name, "name exceeds 255 bytes");
        if (cur.pos + len > cur.len)
            throw ParseError(ParseErrc::truncated_message, "label runs past end of message");
        labels.emplace_back(reinterpret_cast<const char*>(cur.data + cur.pos), len);
        cur.pos += len;
    }
    if (jumped) cur.pos = resume;
    return DnsName(std::move(labels));
}

ResourceRecord parse_rr(Cursor& cur) {
    ResourceRecord rr;
    rr.name = parse_name(cur);
    rr.rtype = cur.u16();
    rr.rclass = cur.u16();
    rr.ttl = cur.u32();
    uint16_t rdlen = cur.u16();
    if (cur.pos + rdlen > cur.len)
        throw ParseError(ParseErrc::truncated_message, "rdata runs past end of message");
    size_t end = cur.pos + rdlen;

    switch (rr.rtype) {
        case kTypeA: {
            if (rdlen != 4) throw ParseError(ParseErrc::malformed_record, "A rdata must be 4 bytes");
            Ipv4Address addr;
            std::copy(cur.data + cur.pos, cur.data + end, addr.octets.begin());
            rr.rdata = addr;
            cur.pos = end;
            break;
        }
        case kTypeAaaa: {
            if (rdlen != 16)
                throw ParseError(ParseErrc::malformed_record, "AAAA rdata must be 16 bytes");
            Ipv6Address addr;
            std::copy(cur.data + cur.pos, cur.data + end, addr.octets.begin());
            rr.rdata = addr;
            cur.pos = end;
            break;
        }
        case kTypeMx: {
            MxRdata mx;
            mx.preference = cur.u16();
            mx.exchange = parse_name(cur);  // may point anywhere in the message
            if (cur.pos != end)
                throw ParseError(ParseErrc::malformed_record, "MX rdata length mismatch");
            rr.rdata = std::move(mx);
            break;
        }
        default: {
            rr.rdata = Bytes(cur.data + cur.pos, cur.data + end);
            cur.pos = end;
            break;
        }
    }
    return rr;
}

void encode_name(ByteWriter& w, const DnsName& name) {
    if (name.wire_length() > kMaxNameWireBytes)
        throw EncodeError(EncodeErrc::name_too_long, "name exceeds 255 bytes");
    for (const auto& label : name.labels()) {
        if (label.empty() || label.size() > kMaxLabelBytes)
            throw EncodeError(EncodeErrc::name_too_long, "label must be 1-63 bytes");
        w.u8(static_cast<uint8_t>(label.size()));
        w.raw(reinterpret_cast<const uint8_t*>(label.data()), label.size());
    }
    w.u8(0);
}

void encode_rr(ByteWriter& w, const ResourceRecord& rr) {
    encode_name(w, rr.name);
    w.u16(rr.rtype);
    w.u16(rr.rclass);
    w.u32(rr.ttl);

    ByteWriter rd;
    switch (rr.rtype) {
        case kTypeA: {
            auto* addr = std::get_if<Ipv4Address>(&rr.rdata);
            if (!addr)
                throw EncodeError(EncodeErrc::rdata_length_mismatch, "A record needs IPv4 rdata");
            rd.raw(addr->octets.data(), addr->octets.size());
            break;
        }
        case kTypeAaaa: {
            auto* addr = std::get_if<Ipv6Address>(&rr.rdata);
            if (!addr)
                throw EncodeError(EncodeErrc::rdata_length_mismatch, "AAAA record needs IPv6 rdata");
            rd.raw(addr->octets.data(), addr->octets.size());
            break;
        }
        case kTypeMx: {
            auto* mx = std::get_if<MxRdata>(&rr.rdata);
            if (!mx)
                throw EncodeError(EncodeErrc::rdata_length_mismatch, "MX record needs MX rdata");
            rd.u16(mx->preference);
            encode_name(rd, mx->exchange);
            break;
        }
        default: {
            auto* raw = std::get_if<Bytes>(&rr.rdata);
            if (!raw)
                throw EncodeError(EncodeErrc::rdata_length_mismatch,
                                  "typed rdata under an opaque record type");
            rd.raw(*raw);
            break;
        }
    }
    if (rd.size() > 0xffff)
        throw EncodeError(EncodeErrc::rdata_length_mismatch, "rdata exceeds 65535 bytes");
    w.u16(static_cast<uint16_t>(rd.size()));
    w.raw(rd.data());
}

}  // namespace

DnsName DnsName::from_presentation(const std::string& text) {
    if (text.empty() || text == ".") return DnsName{};
    std::vector<std::string> labels;
    size_t start = 0;
    std::string body = text;
    if (!body.empty() && body.back() == '.') body.pop_back();
    while (start <= body.size()) {
        size_t dot = body.find('.', start);
        if (dot == std::string::npos) dot = body.size();
        labels.push_back(body.substr(start, dot - start));
        start = dot + 1;
        if (dot == body.size()) break;
    }
    return DnsName(std::move(labels));
}

std::string DnsName::presentation() const {
    if (labels_.empty()) return ".";
    std::string out;
    for (size_t i = 0; i < labels_.size(); ++i) {
        if (i) out.push_back('.');
        for (char c : labels_[i]) out.push_back(lower(c));
    }
    return out;
}

size_t DnsName::wire_length() const {
    size_t n = 1;
    for (const auto& label : labels_) n += 1 + label.size();
    return n;
}

bool DnsName::operator==(const DnsName& other) const {
    if (labels_.size() != other.labels_.size()) return false;
    for (size_t i = 0; i < labels_.size(); ++i)
        if (!label_equal_ci(labels_[i], other.labels_[i])) return false;
    return true;
}

uint16_t DnsFlags::pack() const {
    uint16_t v = 0;
    if (qr) v |= 0x8000;
    v |= static_cast<uint16_t>((opcode & 0x0f) << 11);
    if (aa) v |= 0x0400;
    if (tc) v |= 0x0200;
    if (rd) v |= 0x0100;
    if (ra) v |= 0x0080;
    v |= rcode & 0x0f;
    return v;
}

DnsFlags DnsFlags::unpack(uint16_t raw) {
    DnsFlags f;
    f.qr = raw & 0x8000;
    f.opcode = (raw >> 11) & 0x0f;
    f.aa = raw & 0x0400;
    f.tc = raw & 0x0200;
    f.rd = raw & 0x0100;
    f.ra = raw & 0x0080;
    f.rcode = raw & 0x0f;
    return f;
}

DnsMessage parse_message(const uint8_t* data, size_t len) {
    if (len < kHeaderBytes)
        throw ParseError(ParseErrc::truncated_message, "message shorter than header");
    Cursor cur{data, len};

    DnsMessage msg;
    msg.id = cur.u16();
    msg.flags = DnsFlags::unpack(cur.u16());
    uint16_t qd = cur.u16();
    uint16_t an = cur.u16();
    uint16_t ns = cur.u16();
    uint16_t ar = cur.u16();

    msg.questions.reserve(qd);
    for (uint16_t i = 0; i < qd; ++i) {
        Question q;
        q.qname = parse_name(cur);
        q.qtype = cur.u16();
        q.qclass = cur.u16();
        msg.questions.push_back(std::move(q));
    }
    for (uint16_t i = 0; i < an; ++i) msg.answers.push_back(parse_rr(cur));
    for (uint16_t i = 0; i < ns; ++i) msg.authorities.push_back(parse_rr(cur));
    for (uint16_t i = 0; i < ar; ++i) msg.additionals.push_back(parse_rr(cur));
    return msg;
}

DnsMessage parse_message(const Bytes& data) { return parse_message(data.data(), data.size()); }

Bytes encode_message(const DnsMessage& msg) {
    auto check_count = [](size_t n) {
        if (n > 0xffff) throw EncodeError(EncodeErrc::section_overflow, "section exceeds 65535 entries");
        return static_cast<uint16_t>(n);
    };

    ByteWriter w;
    w.u16(msg.id);
    w.u16(msg.flags.pack());
    w.u16(check_count(msg.questions.size()));
    w.u16(check_count(msg.answers.size()));
    w.u16(check_count(msg.authorities.size()));
    w.u16(check_count(msg.additionals.size()));

    for (const auto& q : msg.questions) {
        encode_name(w, q.qname);
        w.u16(q.qtype);
        w.u16(q.qclass);
    }
    for (const auto& rr : msg.answers) encode_rr(w, rr);
    for (const auto& rr : msg.authorities) encode_rr(w, rr);
    for (const auto& rr : msg.additionals) encode_rr(w, rr);
    return w.take();
}

std::string rdata_text(const ResourceRecord& rr) {
    if (auto* v4 = std::get_if<Ipv4Address>(&rr.rdata)) return v4->text();
    if (auto* v6 = std::get_if<Ipv6Address>(&rr.rdata)) return v6->text();
    if (auto* mx = std::get_if<MxRdata>(&rr.rdata)) return mx->exchange.presentation();
    return hex_encode(std::get<Bytes>(rr.rdata));
}

}  // namespace pdnsl::dnswire
