#include "pdnsl/netconfig.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace pdnsl::net {

using nlohmann::json;

namespace {

json policy_to_json(const identity::Policy& p) {
    json j;
    switch (p.kind) {
        case identity::Policy::Kind::endorsement: j["kind"] = "endorsement"; break;
        case identity::Policy::Kind::read: j["kind"] = "read"; break;
        case identity::Policy::Kind::write: j["kind"] = "write"; break;
    }
    j["min_signatures"] = p.min_signatures;
    if (p.required_role) j["role"] = identity::role_name(*p.required_role);
    j["orgs"] = p.orgs;
    return j;
}

identity::Policy policy_from_json(const json& j) {
    identity::Policy p;
    std::string kind = j.value("kind", "endorsement");
    if (kind == "endorsement")
        p.kind = identity::Policy::Kind::endorsement;
    else if (kind == "read")
        p.kind = identity::Policy::Kind::read;
    else if (kind == "write")
        p.kind = identity::Policy::Kind::write;
    else
        throw InvalidConfig("unknown policy kind: " + kind);
    p.min_signatures = j.value("min_signatures", 1u);
    if (j.contains("role")) {
        auto role = identity::role_from_name(j.at("role").get<std::string>());
        if (!role) throw InvalidConfig("unknown role in policy");
        p.required_role = *role;
    }
    if (j.contains("orgs")) p.orgs = j.at("orgs").get<std::vector<std::string>>();
    return p;
}

}  // namespace

NetworkConfig NetworkConfig::default_config() {
    NetworkConfig c;
    c.orgs = {{"Org1", {"peer0", "peer1"}}, {"Org2", {"peer0", "peer1"}}};
    c.orderers = {"orderer0"};

    c.endorsement_policy.kind = identity::Policy::Kind::endorsement;
    c.endorsement_policy.min_signatures = 1;
    c.endorsement_policy.required_role = identity::Role::peer;

    c.public_read_policy.kind = identity::Policy::Kind::read;
    c.public_read_policy.min_signatures = 1;  // any consortium member

    ledger::CollectionConfig coll;
    coll.name = "pdns_private";
    coll.member_orgs = {"Org1"};
    coll.block_to_live = 0;
    coll.read_policy.kind = identity::Policy::Kind::read;
    coll.read_policy.orgs = {"Org1"};
    coll.write_policy.kind = identity::Policy::Kind::write;
    coll.write_policy.orgs = {"Org1"};
    c.collections = {coll};
    return c;
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InvalidConfig("config is not a JSON object");

    NetworkConfig c;
    try {
        c.chain_id = j.value("chain_id", c.chain_id);
        for (const auto& org : j.at("orgs")) {
            OrgConfig oc;
            oc.name = org.at("name").get<std::string>();
            oc.peers = org.at("peers").get<std::vector<std::string>>();
            c.orgs.push_back(std::move(oc));
        }
        c.orderers = j.at("orderers").get<std::vector<std::string>>();
        c.batch_max_count = j.value("batch_max_count", c.batch_max_count);
        c.batch_max_wait_ms = j.value("batch_max_wait_ms", c.batch_max_wait_ms);
        if (j.contains("endorsement_policy"))
            c.endorsement_policy = policy_from_json(j.at("endorsement_policy"));
        else {
            c.endorsement_policy = default_config().endorsement_policy;
        }
        if (j.contains("public_read_policy"))
            c.public_read_policy = policy_from_json(j.at("public_read_policy"));
        for (const auto& coll : j.value("collections", json::array())) {
            ledger::CollectionConfig cc;
            cc.name = coll.at("name").get<std::string>();
            cc.member_orgs = coll.at("member_orgs").get<std::vector<std::string>>();
            cc.block_to_live = coll.value("block_to_live", 0ull);
            if (coll.contains("read_policy"))
                cc.read_policy = policy_from_json(coll.at("read_policy"));
            else {
                cc.read_policy.kind = identity::Policy::Kind::read;
                cc.read_policy.orgs = cc.member_orgs;
            }
            if (coll.contains("write_policy"))
                cc.write_policy = policy_from_json(coll.at("write_policy"));
            else {
                cc.write_policy.kind = identity::Policy::Kind::write;
                cc.write_policy.orgs = cc.member_orgs;
            }
            if (coll.contains("private_fields"))
                cc.private_fields = coll.at("private_fields").get<std::vector<std::string>>();
            c.collections.push_back(std::move(cc));
        }
        c.link_delay_ms = j.value("link_delay_ms", c.link_delay_ms);
        c.link_drop_rate = j.value("link_drop_rate", c.link_drop_rate);
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string NetworkConfig::to_json() const {
    json j;
    j["chain_id"] = chain_id;
    j["orgs"] = json::array();
    for (const auto& org : orgs) j["orgs"].push_back({{"name", org.name}, {"peers", org.peers}});
    j["orderers"] = orderers;
    j["batch_max_count"] = batch_max_count;
    j["batch_max_wait_ms"] = batch_max_wait_ms;
    j["endorsement_policy"] = policy_to_json(endorsement_policy);
    j["public_read_policy"] = policy_to_json(public_read_policy);
    j["collections"] = json::array();
    for (const auto& coll : collections) {
        json cj;
        cj["name"] = coll.name;
        cj["member_orgs"] = coll.member_orgs;
        cj["block_to_live"] = coll.block_to_live;
        cj["read_policy"] = policy_to_json(coll.read_policy);
        cj["write_policy"] = policy_to_json(coll.write_policy);
        cj["private_fields"] = coll.private_fields;
        j["collections"].push_back(std::move(cj));
    }
    j["link_delay_ms"] = link_delay_ms;
    j["link_drop_rate"] = link_drop_rate;
    return j.dump(2);
}

std::vector<std::string> NetworkConfig::org_names() const {
    std::vector<std::string> out;
    out.reserve(orgs.size());
    for (const auto& org : orgs) out.push_back(org.name);
    return out;
}

bool NetworkConfig::has_org(const std::string& name) const {
    return std::any_of(orgs.begin(), orgs.end(),
                       [&](const OrgConfig& o) { return o.name == name; });
}

void NetworkConfig::validate() const {
    if (orgs.empty()) throw InvalidConfig("at least one org required");
    if (orderers.empty()) throw InvalidConfig("at least one orderer required");
    if (batch_max_count == 0) throw InvalidConfig("batch_max_count must be positive");

    std::set<std::string> org_seen;
    for (const auto& org : orgs) {
        if (org.name.empty()) throw InvalidConfig("org name must be non-empty");
        if (!org_seen.insert(org.name).second)
            throw InvalidConfig("duplicate org name: " + org.name);
        if (org.peers.empty()) throw InvalidConfig("org " + org.name + " has no peers");
        std::set<std::string> peer_seen;
        for (const auto& peer : org.peers)
            if (!peer_seen.insert(peer).second)
                throw InvalidConfig("duplicate peer " + peer + " in org " + org.name);
    }
    std::set<std::string> orderer_seen;
    for (const auto& o : orderers)
        if (!orderer_seen.insert(o).second) throw InvalidConfig("duplicate orderer name: " + o);

    auto check_policy = [&](const identity::Policy& p, const std::string& where) {
        if (p.min_signatures < 1)
            throw InvalidConfig(where + ": min_signatures must be at least 1");
        for (const auto& org : p.orgs)
            if (!has_org(org))
                throw InvalidConfig(where + ": policy references unknown org " + org);
    };
    check_policy(endorsement_policy, "endorsement_policy");
    check_policy(public_read_policy, "public_read_policy");

    std::set<std::string> coll_seen;
    const std::set<std::string> schema(collector::kFieldNames.begin(),
                                       collector::kFieldNames.end());
    for (const auto& coll : collections) {
        if (coll.name.empty()) throw InvalidConfig("collection name must be non-empty");
        if (!coll_seen.insert(coll.name).second)
            throw InvalidConfig("duplicate collection name: " + coll.name);
        if (coll.member_orgs.empty())
            throw InvalidConfig("collection " + coll.name + " has no member orgs");
        for (const auto& org : coll.member_orgs)
            if (!has_org(org))
                throw InvalidConfig("collection " + coll.name + " references unknown org " + org);
        check_policy(coll.read_policy, "collection " + coll.name + " read_policy");
        check_policy(coll.write_policy, "collection " + coll.name + " write_policy");
        if (coll.private_fields.empty())
            throw InvalidConfig("collection " + coll.name + " has no private fields");
        for (const auto& field : coll.private_fields)
            if (!schema.count(field))
                throw InvalidConfig("collection " + coll.name + " names unknown field " + field);
    }
}

}  // namespace pdnsl::net
