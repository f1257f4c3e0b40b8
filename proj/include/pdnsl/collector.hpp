#pragma once

#include <array>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdnsl/dnswire.hpp"

// Turns parsed DNS responses into deduplicated ten-field observation
// records and handles their JSON interchange form. The last two fields
// (client_ip, resolver_ip) are the personal sub-record; everything that
// projects or splits records preserves that partition.
namespace pdnsl::collector {

// Schema order. The serialized object carries exactly these names.
inline const std::array<std::string, 10> kFieldNames = {
    "chain_id",  "record_id", "domain",      "answer_ip", "ttl",
    "ts_seconds", "ts_millis", "visit_count", "client_ip", "resolver_ip"};
inline const std::array<std::string, 2> kPrivateFieldNames = {"client_ip", "resolver_ip"};

struct PassiveDnsRecord {
    std::string chain_id;
    std::string record_id;
    std::string domain;
    std::string answer_ip;
    uint32_t ttl = 0;
    uint64_t ts_seconds = 0;
    uint32_t ts_millis = 0;
    uint64_t visit_count = 1;
    std::string client_ip;
    std::string resolver_ip;

    bool operator==(const PassiveDnsRecord&) const = default;
};

// nullopt when the record satisfies its invariants, else the reason.
std::optional<std::string> validate_record(const PassiveDnsRecord& r);

enum class CollectErrc { not_a_response, no_qualifying_answers };

class CollectError : public std::runtime_error {
public:
    CollectError(CollectErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    CollectErrc code() const { return code_; }

private:
    CollectErrc code_;
};

enum class JsonErrc { schema_violation, invariant_violation };

class JsonError : public std::runtime_error {
public:
    JsonError(JsonErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    JsonErrc code() const { return code_; }

private:
    JsonErrc code_;
};

struct ObservationKey {
    std::string client_ip;  // canonical text
    std::string domain;     // lowercased presentation form
    uint16_t rtype = 0;
    std::string answer_ip;

    bool operator==(const ObservationKey&) const = default;
    // 128-bit hash of the key, 32 hex chars; deterministic and replay-stable
    std::string record_id() const;
};

// Single-line JSON object with the ten field names in schema order.
std::string to_json(const PassiveDnsRecord& r);
// Accepts any field order but requires exactly the ten-field schema.
// Throws JsonError.
PassiveDnsRecord from_json(const std::string& text);

// (public_json, private_json) given the private field names; both single-line,
// fields in schema order.
std::pair<std::string, std::string> split_json(const PassiveDnsRecord& r,
                                               const std::vector<std::string>& private_fields);
// Default split: the two personal fields stripped.
std::string public_json(const PassiveDnsRecord& r);

class Collector {
public:
    explicit Collector(std::string chain_id) : chain_id_(std::move(chain_id)) {}

    // One record per qualifying (A/AAAA/MX) answer. A repeated observation
    // key bumps visit_count and refreshes the timestamps on the existing
    // record id instead of minting a new one. Throws CollectError.
    std::vector<PassiveDnsRecord> observe(const dnswire::DnsMessage& response,
                                          const std::string& client_ip,
                                          const std::string& resolver_ip,
                                          uint64_t now_unix_millis);

    size_t cache_size() const;
    const std::string& chain_id() const { return chain_id_; }

private:
    std::string chain_id_;
    mutable std::mutex mu_;  // serializes the read-modify-write on the cache
    std::unordered_map<std::string, PassiveDnsRecord> cache_;  // keyed by record_id
};

}  // namespace pdnsl::collector
