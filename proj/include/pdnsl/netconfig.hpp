#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pdnsl/ledger.hpp"

namespace pdnsl::net {

class InvalidConfig : public std::runtime_error {
public:
    explicit InvalidConfig(const std::string& what) : std::runtime_error(what) {}
};

struct OrgConfig {
    std::string name;
    std::vector<std::string> peers;
    bool operator==(const OrgConfig&) const = default;
};

// Declarative network topology plus the policies and collection configs the
// nodes enforce. Defaults to two orgs of two peers each, one orderer, one
// CA, with the personal sub-record collection owned by Org1.
struct NetworkConfig {
    std::string chain_id = "pdns-main";
    std::vector<OrgConfig> orgs;
    std::vector<std::string> orderers;
    uint32_t batch_max_count = 50;
    uint64_t batch_max_wait_ms = 200;
    identity::Policy endorsement_policy;
    identity::Policy public_read_policy;
    std::vector<ledger::CollectionConfig> collections;
    double link_delay_ms = 1.0;
    double link_drop_rate = 0.0;

    static NetworkConfig default_config();
    static NetworkConfig from_json(const std::string& text);  // throws InvalidConfig
    std::string to_json() const;

    void validate() const;  // throws InvalidConfig
    std::vector<std::string> org_names() const;
    bool has_org(const std::string& name) const;

    bool operator==(const NetworkConfig&) const = default;
};

}  // namespace pdnsl::net
