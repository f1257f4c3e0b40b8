#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdnsl/network.hpp"

// The identity-gated store/query surface: endorse -> order -> commit for
// writes, policy-checked reads against peer state. Synchronous calls drive
// the simulation until the outcome is known.
namespace pdnsl::txflow {

enum class TxErrc {
    access_denied,
    not_found,
    purged,
    policy_violation,
    endorsement_failure,
    invalid_record,
    invalid_config,
    unknown_field,
    bad_selector,
    no_live_peer,
    internal,
};

class TxError : public std::runtime_error {
public:
    TxError(TxErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    TxErrc code() const { return code_; }

private:
    TxErrc code_;
};

struct TxResult {
    enum class Status { committed, rejected, pending };

    std::string tx_id;
    Status status = Status::rejected;
    uint64_t block_height = 0;  // when committed
    std::string reason;         // when rejected (or queued note when pending)

    bool committed() const { return status == Status::committed; }
};

// Commits the genesis block on every node. Throws TxError(invalid_config)
// when the chain already exists. Returns the genesis height (0).
uint64_t init_chain(net::Network& network);

struct HistoryEntry {
    uint64_t height = 0;
    std::string tx_id;
    std::string value_json;
};

class Client : public net::Node, public net::ClientHook {
public:
    // bus name: "<org>/<subject>" of the identity
    Client(net::Network& network, identity::Identity id);
    ~Client() override;

    const identity::Certificate& certificate() const { return identity_.certificate; }

    // Splits the record against the collection config, gathers endorsements
    // from one live peer per org, submits, and drives the network until the
    // transaction commits or is rejected. Domain rejections come back in the
    // TxResult rather than as exceptions; `pending` means no live orderer
    // accepted it yet and it stays queued for resubmission.
    TxResult store_record(const collector::PassiveDnsRecord& record);

    // Queue-and-go variant used for batching; settle() drives everything
    // outstanding to completion.
    std::string store_record_async(const collector::PassiveDnsRecord& record);
    void settle();
    std::optional<TxResult> status(const std::string& tx_id) const;

    // Throws TxError (access_denied, unknown_field, bad_selector, no_live_peer).
    std::vector<std::string> query_public(const ledger::Selector& selector);
    std::vector<std::string> query_public(const std::string& selector_text);
    // Throws TxError (access_denied, not_found, purged, no_live_peer).
    std::string query_private(const std::string& record_id);
    // Throws TxError (access_denied, not_found, no_live_peer).
    std::vector<HistoryEntry> get_history(const std::string& record_id);

    void handle(const net::Envelope& env) override;
    void on_orderer_active(const std::string& orderer_name) override;

private:
    struct Outstanding {
        ledger::Transaction tx;
        std::vector<ledger::PrivatePayload> payloads;
        bool submitted = false;
    };

    TxResult prepare_and_queue(const collector::PassiveDnsRecord& record);
    std::optional<TxResult> endorse_and_build(const collector::PassiveDnsRecord& record,
                                              Outstanding& out);
    void flush();
    net::QueryResponse roundtrip_query(const std::string& kind, const std::string& body_json,
                                       bool private_route);
    std::string fresh_tx_id();

    net::Network& network_;
    identity::Identity identity_;
    uint64_t nonce_counter_ = 0;
    uint64_t nonce_base_ = 0;

    std::map<std::string, Outstanding> outstanding_;  // tx_id -> queued/submitted
    std::map<std::string, TxResult> results_;         // tx_id -> final outcome

    // per-roundtrip response slots
    std::vector<net::ProposalResponse> proposal_responses_;
    std::optional<net::QueryResponse> query_response_;
};

}  // namespace pdnsl::txflow
