#include "pdnsl/ip.hpp"

#include <arpa/inet.h>

namespace pdnsl {

std::optional<Ipv4Address> Ipv4Address::parse(const std::string& text) {
    Ipv4Address addr;
    if (inet_pton(AF_INET, text.c_str(), addr.octets.data()) != 1) return std::nullopt;
    return addr;
}

std::string Ipv4Address::text() const {
    char buf[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, octets.data(), buf, sizeof(buf));
    return buf;
}

std::optional<Ipv6Address> Ipv6Address::parse(const std::string& text) {
    Ipv6Address addr;
    if (inet_pton(AF_INET6, text.c_str(), addr.octets.data()) != 1) return std::nullopt;
    return addr;
}

std::string Ipv6Address::text() const {
    char buf[INET6_ADDRSTRLEN];
    inet_ntop(AF_INET6, octets.data(), buf, sizeof(buf));
    return buf;
}

std::optional<std::string> canonical_ip(const std::string& text) {
    if (auto v4 = Ipv4Address::parse(text)) return v4->text();
    if (auto v6 = Ipv6Address::parse(text)) return v6->text();
    return std::nullopt;
}

}  // namespace pdnsl
