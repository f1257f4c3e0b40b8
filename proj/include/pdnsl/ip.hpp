#pragma once

#include <array>
#include <optional>
#include <string>

namespace pdnsl {

struct Ipv4Address {
    std::array<uint8_t, 4> octets{};

    static std::optional<Ipv4Address> parse(const std::string& text);
    std::string text() const;  // dotted quad
    bool operator==(const Ipv4Address&) const = default;
};

struct Ipv6Address {
    std::array<uint8_t, 16> octets{};

    static std::optional<Ipv6Address> parse(const std::string& text);
    std::string text() const;  // RFC 5952 canonical: lowercase, longest zero run compressed
    bool operator==(const Ipv6Address&) const = default;
};

// Canonical text for an IPv4/IPv6 literal; nullopt if not an address.
std::optional<std::string> canonical_ip(const std::string& text);

}  // namespace pdnsl
