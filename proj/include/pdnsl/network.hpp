#pragma once

#include <deque>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "pdnsl/netconfig.hpp"

// Peers, orderers and block delivery over an in-process message bus.
// Everything is a discrete-event simulation under one seeded scheduler:
// each node is a sequential actor, messages carry a virtual-time delivery
// stamp, and runs are reproducible event-for-event for a given seed.
namespace pdnsl::net {

class Network;

// ---------------------------------------------------------------------------
// Messages

struct SubmitTx {
    ledger::Transaction tx;
    std::vector<ledger::PrivatePayload> payloads;
};
struct SubmitAck {
    std::string tx_id;
    bool accepted = false;
    std::string reason;
};
struct TxCommitted {
    std::string tx_id;
    uint64_t height = 0;
    bool valid = true;
};
struct DeliverBlock {
    ledger::BlockPtr block;
    std::vector<ledger::PrivatePayload> payloads;  // membership-filtered sidecar
};
struct GossipRequest {
    uint64_t from_height = 0;
};
struct GossipResponse {
    std::vector<ledger::BlockPtr> blocks;
    uint64_t responder_height = 0;
};
struct PrivateFetchRequest {
    std::vector<ledger::PrivateDigest> wanted;
};
struct PrivateFetchResponse {
    std::vector<ledger::PrivatePayload> entries;
};
struct ProposalRequest {
    std::string body_json;
    identity::Certificate caller;
    Bytes caller_sig;
};
struct ProposalResponse {
    std::string tx_id;
    bool ok = false;
    std::string reason;
    identity::SignatureEntry endorsement;
    std::string payload_sha256_hex;  // digest of the tx bytes the endorser signed
};
struct QueryRequest {
    std::string kind;  // public | private | history
    std::string body_json;
    identity::Certificate caller;
    Bytes caller_sig;
};
struct QueryResponse {
    std::string kind;
    std::string status;  // ok | denied | not_found | purged | unknown_field | bad_selector | error
    std::string body_json;
};
struct CutTimer {
    uint64_t generation = 0;
};

using Message =
    std::variant<SubmitTx, SubmitAck, TxCommitted, DeliverBlock, GossipRequest, GossipResponse,
                 PrivateFetchRequest, PrivateFetchResponse, ProposalRequest, ProposalResponse,
                 QueryRequest, QueryResponse, CutTimer>;

std::string message_kind(const Message& msg);
// Full JSON rendering of the payload as it crosses the link; this is the
// surface the privacy audits scan.
std::string message_body_json(const Message& msg);

struct Envelope {
    double at_ms = 0;
    uint64_t seq = 0;
    std::string src;
    std::string dst;
    Message msg;
};

struct TranscriptEntry {
    double t_ms = 0;
    uint64_t seq = 0;
    std::string src;
    std::string dst;
    std::string kind;
    std::string note;  // delivered | buffered | dropped | lost
    std::string body_json;
};

std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& entries);

// Canonical bytes a caller signs on query/proposal requests; peers verify
// against the same construction.
Bytes query_sign_bytes(const std::string& kind, const std::string& body);
Bytes proposal_sign_bytes(const std::string& body);

// ---------------------------------------------------------------------------
// Bus and nodes

class Node {
public:
    Node(Network& net, std::string name) : net_(net), name_(std::move(name)) {}
    virtual ~Node() = default;

    const std::string& name() const { return name_; }
    bool live() const { return live_; }
    void set_live(bool live) { live_ = live; }
    std::deque<Envelope>& inbox() { return inbox_; }

    virtual void handle(const Envelope& env) = 0;

protected:
    void send(const std::string& dst, Message msg);
    void send_self(Message msg, double delay_ms);

    Network& net_;
    std::string name_;
    bool live_ = true;
    std::deque<Envelope> inbox_;  // messages that arrived while down
};

class Bus {
public:
    Bus(uint64_t seed, double default_delay_ms, double drop_rate)
        : rng_(seed), delay_ms_(default_delay_ms), drop_rate_(drop_rate) {}

    void register_node(Node* node);
    void unregister_node(const std::string& name);
    Node* find(const std::string& name) const;

    void send(const std::string& src, const std::string& dst, Message msg);
    void schedule(const std::string& src, const std::string& dst, Message msg, double delay_ms);
    // Re-injects a buffered envelope at the current time, preserving order.
    void replay(Envelope env);

    // Processes events until the queue drains. Throws if max_events is hit
    // (a runaway loop in a test is better caught than waited out).
    size_t run_until_idle(size_t max_events = 5'000'000);

    double now_ms() const { return now_ms_; }
    std::mt19937_64& rng() { return rng_; }

    const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
    void clear_transcript() { transcript_.clear(); }

private:
    struct Later {
        bool operator()(const Envelope& a, const Envelope& b) const {
            if (a.at_ms != b.at_ms) return a.at_ms > b.at_ms;
            return a.seq > b.seq;
        }
    };

    void log(const Envelope& env, const char* note);

    std::map<std::string, Node*> nodes_;
    std::priority_queue<Envelope, std::vector<Envelope>, Later> queue_;
    std::vector<TranscriptEntry> transcript_;
    std::mt19937_64 rng_;
    double now_ms_ = 0;
    uint64_t next_seq_ = 0;
    double delay_ms_;
    double drop_rate_;
};

// ---------------------------------------------------------------------------
// Peer

class PeerNode : public Node {
public:
    PeerNode(Network& net, std::string name, identity::Identity id);

    const std::string& org() const { return identity_.certificate.org; }
    const identity::Identity& identity() const { return identity_; }

    const ledger::Chain& chain() const { return chain_; }
    const ledger::WorldState& world() const { return world_; }
    const ledger::PrivateStore& priv() const { return priv_; }

    bool is_member(const std::string& collection) const;

    // Out-of-band append used for genesis, chain reload and bulk loads.
    void bootstrap_block(const ledger::BlockPtr& block,
                         const std::vector<ledger::PrivatePayload>& payloads);
    void bootstrap_private(const ledger::PrivatePayload& payload);

    // Anti-entropy: fetch missing blocks from a live peer, validating the
    // hash links of everything received before appending.
    void start_sync();
    bool behind() const;

    // Fault hook: serve tampered blocks to gossip requests.
    bool gossip_tamper = false;

    void handle(const Envelope& env) override;

    uint64_t blocks_fetched_via_gossip = 0;

private:
    friend class Network;

    void on_deliver(const Envelope& env);
    void on_gossip_request(const Envelope& env);
    void on_gossip_response(const Envelope& env);
    void on_private_fetch_request(const Envelope& env);
    void on_private_fetch_response(const Envelope& env);
    void on_proposal(const Envelope& env);
    void on_query(const Envelope& env);

    bool verify_cert_cached(const identity::Certificate& cert);
    bool expected_validity(const ledger::Transaction& tx);
    // Validates and commits; returns false (chain untouched) on any mismatch.
    bool commit_block(const ledger::BlockPtr& block,
                      const std::vector<ledger::PrivatePayload>& payloads);
    void apply_block(const ledger::Block& block,
                     const std::vector<ledger::PrivatePayload>& payloads);
    void drain_stash();
    void reconcile_private();
    std::vector<std::string> sync_candidates() const;

    identity::Identity identity_;
    ledger::Chain chain_;
    ledger::WorldState world_;
    ledger::PrivateStore priv_;
    std::set<std::string> queryable_fields_;
    std::map<uint64_t, DeliverBlock> stash_;
    std::set<std::string> suspects_;
    bool sync_in_flight_ = false;
    bool private_fetch_in_flight_ = false;
    bool parked_sync_ = false;     // wanted to sync but found no live source
    bool parked_private_ = false;  // missing payloads with no live member source
    std::unordered_map<std::string, bool> cert_cache_;
};

// ---------------------------------------------------------------------------
// Orderer

class OrdererNode : public Node {
public:
    OrdererNode(Network& net, std::string name, identity::Identity id, bool active);

    bool active() const { return active_; }
    const ledger::Chain& chain() const { return chain_; }
    uint64_t delivered_height() const { return chain_.empty() ? 0 : chain_.height(); }
    size_t pending_count() const { return queue_.size(); }

    void bootstrap_block(const ledger::BlockPtr& block);
    // Promote a standby: catch up from live peers, then start batching.
    void activate();
    void handle(const Envelope& env) override;

private:
    friend class Network;

    struct Pending {
        ledger::Transaction tx;
        std::vector<ledger::PrivatePayload> payloads;
        std::string submitter;
    };

    void on_submit(const Envelope& env);
    void cut();
    bool verify_cert_cached(const identity::Certificate& cert);

    identity::Identity identity_;
    ledger::Chain chain_;
    bool active_ = false;
    std::vector<Pending> queue_;
    std::map<std::string, uint64_t> committed_;  // tx_id -> height
    std::set<std::string> pending_ids_;
    uint64_t timer_generation_ = 0;
    std::unordered_map<std::string, bool> cert_cache_;
};

// ---------------------------------------------------------------------------
// Network controller

enum class FaultKind { crash, recover, orderer_failover };

// Callbacks for submitting clients that need to react to control-plane
// changes (orderer failover/recovery triggers resubmission).
class ClientHook {
public:
    virtual ~ClientHook() = default;
    virtual void on_orderer_active(const std::string& orderer_name) = 0;
};

struct NetworkSetup {
    NetworkConfig config;
    crypto::PublicKey ca_public_key{};
    // Bus-name keyed identities: "Org1/peer0", "orderer0", "Org1/client".
    std::map<std::string, identity::Identity> identities;

    // Deterministic CA and identities derived from a master seed; issues one
    // "client" identity per org alongside peers and orderers.
    static NetworkSetup fresh(const NetworkConfig& config, uint64_t master_seed);
};

inline constexpr const char* kOrdererOrg = "OrdererOrg";

std::string peer_bus_name(const std::string& org, const std::string& peer);

class Network {
public:
    Network(NetworkSetup setup, uint64_t scheduler_seed);

    Bus& bus() { return bus_; }
    const NetworkConfig& config() const { return setup_.config; }
    const crypto::PublicKey& ca_public_key() const { return setup_.ca_public_key; }
    const std::vector<std::string>& consortium() const { return consortium_; }
    const identity::Identity* identity_of(const std::string& bus_name) const;
    const ledger::CollectionConfig* collection_config(const std::string& name) const;

    PeerNode* peer(const std::string& bus_name);
    std::vector<PeerNode*> peers();
    std::vector<std::string> live_peer_names(const std::string& excluding = "") const;
    OrdererNode* orderer(const std::string& name);
    OrdererNode* active_orderer();

    bool genesis_committed() const { return genesis_done_; }
    void commit_genesis();  // throws InvalidConfig when already initialized
    uint64_t delivered_height();

    void inject_fault(const std::string& node_name, FaultKind kind);

    void register_client(Node* client_node, ClientHook* hook);
    void unregister_client(const std::string& name);

    // Builds fully endorsed blocks locally and bootstraps them onto every
    // node. Setup path for benches and fixtures; the measured operations
    // still go through the endorse -> order -> commit flow.
    uint64_t bulk_load(const std::vector<collector::PassiveDnsRecord>& records,
                       const std::string& creator_bus_name, const std::string& endorser_bus_name,
                       size_t records_per_block = 500);

    // Reload path: replay persisted blocks (and member payloads) onto all nodes.
    void load_chain(const std::vector<ledger::BlockPtr>& blocks,
                    const std::vector<ledger::PrivatePayload>& payloads);

    void on_orderer_active(const std::string& name);

private:
    friend class PeerNode;
    friend class OrdererNode;

    NetworkSetup setup_;
    std::vector<std::string> consortium_;
    Bus bus_;
    std::vector<std::unique_ptr<PeerNode>> peer_nodes_;
    std::vector<std::unique_ptr<OrdererNode>> orderer_nodes_;
    std::map<std::string, ClientHook*> client_hooks_;
    bool genesis_done_ = false;
};

}  // namespace pdnsl::net
