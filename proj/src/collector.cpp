#include "pdnsl/collector.hpp"

#include <algorithm>

#include "json.hpp"
#include "pdnsl/crypto.hpp"

namespace pdnsl::collector {

using ordered_json = nlohmann::ordered_json;

std::optional<std::string> validate_record(const PassiveDnsRecord& r) {
    if (r.ts_millis >= 1000) return "ts_millis must be below 1000";
    if (r.visit_count < 1) return "visit_count must be at least 1";
    return std::nullopt;
}

std::string ObservationKey::record_id() const {
    ByteWriter w;
    w.str(client_ip);
    w.str(domain);
    w.u16(rtype);
    w.str(answer_ip);
    auto digest = crypto::sha256(w.data());
    return hex_encode(digest.data(), 16);
}

namespace {

ordered_json record_to_ordered(const PassiveDnsRecord& r) {
    ordered_json j;
    j["chain_id"] = r.chain_id;
    j["record_id"] = r.record_id;
    j["domain"] = r.domain;
    j["answer_ip"] = r.answer_ip;
    j["ttl"] = r.ttl;
    j["ts_seconds"] = r.ts_seconds;
    j["ts_millis"] = r.ts_millis;
    j["visit_count"] = r.visit_count;
    j["client_ip"] = r.client_ip;
    j["resolver_ip"] = r.resolver_ip;
    return j;
}

}  // namespace

std::string to_json(const PassiveDnsRecord& r) { return record_to_ordered(r).dump(); }

PassiveDnsRecord from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw JsonError(JsonErrc::schema_violation, "not a JSON object");
    if (j.size() != kFieldNames.size())
        throw JsonError(JsonErrc::schema_violation, "record must have exactly ten fields");
    for (const auto& name : kFieldNames)
        if (!j.contains(name))
            throw JsonError(JsonErrc::schema_violation, "missing field: " + name);

    auto str_field = [&](const char* name) {
        const auto& v = j.at(name);
        if (!v.is_string())
            throw JsonError(JsonErrc::schema_violation, std::string(name) + " must be a string");
        return v.get<std::string>();
    };
    auto uint_field = [&](const char* name, uint64_t max) {
        const auto& v = j.at(name);
        if (!v.is_number_unsigned())
            throw JsonError(JsonErrc::schema_violation,
                            std::string(name) + " must be an unsigned integer");
        uint64_t u = v.get<uint64_t>();
        if (u > max)
            throw JsonError(JsonErrc::schema_violation, std::string(name) + " out of range");
        return u;
    };

    PassiveDnsRecord r;
    r.chain_id = str_field("chain_id");
    r.record_id = str_field("record_id");
    r.domain = str_field("domain");
    r.answer_ip = str_field("answer_ip");
    r.ttl = static_cast<uint32_t>(uint_field("ttl", 0xffffffffull));
    r.ts_seconds = uint_field("ts_seconds", ~0ull);
    r.ts_millis = static_cast<uint32_t>(uint_field("ts_millis", 0xffffffffull));
    r.visit_count = uint_field("visit_count", ~0ull);
    r.client_ip = str_field("client_ip");
    r.resolver_ip = str_field("resolver_ip");

    if (auto reason = validate_record(r))
        throw JsonError(JsonErrc::invariant_violation, *reason);
    return r;
}

std::pair<std::string, std::string> split_json(const PassiveDnsRecord& r,
                                               const std::vector<std::string>& private_fields) {
    ordered_json full = record_to_ordered(r);
    ordered_json pub;
    ordered_json priv;
    for (const auto& name : kFieldNames) {
        bool is_private =
            std::find(private_fields.begin(), private_fields.end(), name) != private_fields.end();
        (is_private ? priv : pub)[name] = full.at(name);
    }
    return {pub.dump(), priv.dump()};
}

std::string public_json(const PassiveDnsRecord& r) {
    return split_json(r, {kPrivateFieldNames.begin(), kPrivateFieldNames.end()}).first;
}

std::vector<PassiveDnsRecord> Collector::observe(const dnswire::DnsMessage& response,
                                                 const std::string& client_ip,
                                                 const std::string& resolver_ip,
                                                 uint64_t now_unix_millis) {
    if (!response.flags.qr)
        throw CollectError(CollectErrc::not_a_response, "message is a query, not a response");

    std::vector<const dnswire::ResourceRecord*> qualifying;
    for (const auto& rr : response.answers)
        if (rr.rtype == dnswire::kTypeA || rr.rtype == dnswire::kTypeAaaa ||
            rr.rtype == dnswire::kTypeMx)
            qualifying.push_back(&rr);
    if (qualifying.empty())
        throw CollectError(CollectErrc::no_qualifying_answers, "no A/AAAA/MX answers");

    std::string client = canonical_ip(client_ip).value_or(client_ip);
    std::string resolver = canonical_ip(resolver_ip).value_or(resolver_ip);
    std::string domain = response.questions.empty() ? qualifying.front()->name.presentation()
                                                    : response.questions.front().qname.presentation();

    std::vector<PassiveDnsRecord> out;
    out.reserve(qualifying.size());
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto* rr : qualifying) {
        ObservationKey key{client, domain, rr->rtype, dnswire::rdata_text(*rr)};
        std::string id = key.record_id();
        auto it = cache_.find(id);
        if (it == cache_.end()) {
            PassiveDnsRecord r;
            r.chain_id = chain_id_;
            r.record_id = id;
            r.domain = domain;
            r.answer_ip = key.answer_ip;
            r.ttl = rr->ttl;
            r.ts_seconds = now_unix_millis / 1000;
            r.ts_millis = static_cast<uint32_t>(now_unix_millis % 1000);
            r.visit_count = 1;
            r.client_ip = client;
            r.resolver_ip = resolver;
            it = cache_.emplace(id, std::move(r)).first;
        } else {
            it->second.visit_count += 1;
            it->second.ts_seconds = now_unix_millis / 1000;
            it->second.ts_millis = static_cast<uint32_t>(now_unix_millis % 1000);
            it->second.ttl = rr->ttl;  // latest answer wins; TTL is volatile
        }
        out.push_back(it->second);
    }
    return out;
}

size_t Collector::cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
}

}  // namespace pdnsl::collector
