#include "pdnsl/network.hpp"

#include <algorithm>

#include "json.hpp"

namespace pdnsl::net {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Transcript rendering

namespace {

json cert_to_json(const identity::Certificate& cert) {
    return json{{"subject", cert.subject},
                {"org", cert.org},
                {"role", identity::role_name(cert.role)},
                {"public_key", hex_encode(cert.public_key.data(), cert.public_key.size())},
                {"ca_signature", hex_encode(cert.ca_signature)}};
}

json tx_to_json(const ledger::Transaction& tx) {
    json writes = json::array();
    for (const auto& pw : tx.public_writes) writes.push_back({{"key", pw.key}, {"value", pw.value_json}});
    json digests = json::array();
    for (const auto& pd : tx.private_digests)
        digests.push_back({{"collection", pd.collection},
                           {"key", pd.key},
                           {"digest", crypto::digest_hex(pd.digest)}});
    json endorsements = json::array();
    for (const auto& e : tx.endorsements)
        endorsements.push_back({{"cert", cert_to_json(e.cert)}, {"signature", hex_encode(e.signature)}});
    return json{{"tx_id", tx.tx_id},
                {"creator", cert_to_json(tx.creator)},
                {"public_writes", std::move(writes)},
                {"private_digests", std::move(digests)},
                {"endorsements", std::move(endorsements)},
                {"timestamp_ms", tx.timestamp_ms},
                {"valid", tx.valid}};
}

json block_to_json(const ledger::Block& block) {
    json txs = json::array();
    for (const auto& tx : block.transactions) txs.push_back(tx_to_json(tx));
    return json{{"number", block.number},
                {"prev_hash", crypto::digest_hex(block.prev_hash)},
                {"data_hash", crypto::digest_hex(block.data_hash)},
                {"transactions", std::move(txs)}};
}

json payloads_to_json(const std::vector<ledger::PrivatePayload>& payloads) {
    json arr = json::array();
    for (const auto& p : payloads)
        arr.push_back({{"collection", p.collection}, {"key", p.key}, {"value", p.value_json}});
    return arr;
}

}  // namespace

std::string message_kind(const Message& msg) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SubmitTx>) return "SubmitTx";
            else if constexpr (std::is_same_v<T, SubmitAck>) return "SubmitAck";
            else if constexpr (std::is_same_v<T, TxCommitted>) return "TxCommitted";
            else if constexpr (std::is_same_v<T, DeliverBlock>) return "DeliverBlock";
            else if constexpr (std::is_same_v<T, GossipRequest>) return "GossipRequest";
            else if constexpr (std::is_same_v<T, GossipResponse>) return "GossipResponse";
            else if constexpr (std::is_same_v<T, PrivateFetchRequest>) return "PrivateFetchRequest";
            else if constexpr (std::is_same_v<T, PrivateFetchResponse>) return "PrivateFetchResponse";
            else if constexpr (std::is_same_v<T, ProposalRequest>) return "ProposalRequest";
            else if constexpr (std::is_same_v<T, ProposalResponse>) return "ProposalResponse";
            else if constexpr (std::is_same_v<T, QueryRequest>) return "QueryRequest";
            else if constexpr (std::is_same_v<T, QueryResponse>) return "QueryResponse";
            else return "CutTimer";
        },
        msg);
}

std::string message_body_json(const Message& msg) {
    json body = std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SubmitTx>) {
                return json{{"tx", tx_to_json(m.tx)}, {"payloads", payloads_to_json(m.payloads)}};
            } else if constexpr (std::is_same_v<T, SubmitAck>) {
                return json{{"tx_id", m.tx_id}, {"accepted", m.accepted}, {"reason", m.reason}};
            } else if constexpr (std::is_same_v<T, TxCommitted>) {
                return json{{"tx_id", m.tx_id}, {"height", m.height}, {"valid", m.valid}};
            } else if constexpr (std::is_same_v<T, DeliverBlock>) {
                return json{{"block", block_to_json(*m.block)},
                            {"payloads", payloads_to_json(m.payloads)}};
            } else if constexpr (std::is_same_v<T, GossipRequest>) {
                return json{{"from_height", m.from_height}};
            } else if constexpr (std::is_same_v<T, GossipResponse>) {
                json blocks = json::array();
                for (const auto& b : m.blocks) blocks.push_back(block_to_json(*b));
                return json{{"blocks", std::move(blocks)},
                            {"responder_height", m.responder_height}};
            } else if constexpr (std::is_same_v<T, PrivateFetchRequest>) {
                json wanted = json::array();
                for (const auto& w : m.wanted)
                    wanted.push_back({{"collection", w.collection},
                                      {"key", w.key},
                                      {"digest", crypto::digest_hex(w.digest)}});
                return json{{"wanted", std::move(wanted)}};
            } else if constexpr (std::is_same_v<T, PrivateFetchResponse>) {
                return json{{"entries", payloads_to_json(m.entries)}};
            } else if constexpr (std::is_same_v<T, ProposalRequest>) {
                return json{{"body", m.body_json},
                            {"caller", cert_to_json(m.caller)},
                            {"signature", hex_encode(m.caller_sig)}};
            } else if constexpr (std::is_same_v<T, ProposalResponse>) {
                return json{{"tx_id", m.tx_id},
                            {"ok", m.ok},
                            {"reason", m.reason},
                            {"endorsement",
                             json{{"cert", cert_to_json(m.endorsement.cert)},
                                  {"signature", hex_encode(m.endorsement.signature)}}},
                            {"payload_sha256", m.payload_sha256_hex}};
            } else if constexpr (std::is_same_v<T, QueryRequest>) {
                return json{{"kind", m.kind},
                            {"body", m.body_json},
                            {"caller", cert_to_json(m.caller)},
                            {"signature", hex_encode(m.caller_sig)}};
            } else if constexpr (std::is_same_v<T, QueryResponse>) {
                return json{{"kind", m.kind}, {"status", m.status}, {"body", m.body_json}};
            } else {
                return json{{"generation", m.generation}};
            }
        },
        msg);
    return body.dump();
}

std::string transcript_to_jsonl(const std::vector<TranscriptEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        ordered_json j;
        j["type"] = "msg";
        j["t_ms"] = e.t_ms;
        j["seq"] = e.seq;
        j["src"] = e.src;
        j["dst"] = e.dst;
        j["kind"] = e.kind;
        j["note"] = e.note;
        j["body"] = e.body_json;
        out += j.dump();
        out += "\n";
    }
    return out;
}

Bytes query_sign_bytes(const std::string& kind, const std::string& body) {
    ByteWriter w;
    w.str("query");
    w.str(kind);
    w.str(body);
    return w.take();
}

Bytes proposal_sign_bytes(const std::string& body) {
    ByteWriter w;
    w.str("proposal");
    w.str(body);
    return w.take();
}

// ---------------------------------------------------------------------------
// Bus

void Node::send(const std::string& dst, Message msg) { net_.bus().send(name_, dst, std::move(msg)); }

void Node::send_self(Message msg, double delay_ms) {
    net_.bus().schedule(name_, name_, std::move(msg), delay_ms);
}

void Bus::register_node(Node* node) { nodes_[node->name()] = node; }

void Bus::unregister_node(const std::string& name) { nodes_.erase(name); }

Node* Bus::find(const std::string& name) const {
    auto it = nodes_.find(name);
    return it == nodes_.end() ? nullptr : it->second;
}

void Bus::log(const Envelope& env, const char* note) {
    TranscriptEntry entry;
    entry.t_ms = env.at_ms;
    entry.seq = env.seq;
    entry.src = env.src;
    entry.dst = env.dst;
    entry.kind = message_kind(env.msg);
    entry.note = note;
    entry.body_json = message_body_json(env.msg);
    transcript_.push_back(std::move(entry));
}

void Bus::send(const std::string& src, const std::string& dst, Message msg) {
    if (src != dst && drop_rate_ > 0) {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        if (dist(rng_) < drop_rate_) {
            Envelope env{now_ms_, next_seq_++, src, dst, std::move(msg)};
            log(env, "dropped");
            return;
        }
    }
    schedule(src, dst, std::move(msg), delay_ms_);
}

void Bus::schedule(const std::string& src, const std::string& dst, Message msg, double delay_ms) {
    Envelope env{now_ms_ + delay_ms, next_seq_++, src, dst, std::move(msg)};
    queue_.push(std::move(env));
}

void Bus::replay(Envelope env) {
    env.at_ms = now_ms_;
    env.seq = next_seq_++;
    queue_.push(std::move(env));
}

size_t Bus::run_until_idle(size_t max_events) {
    size_t processed = 0;
    while (!queue_.empty()) {
        if (++processed > max_events) throw std::runtime_error("bus event budget exhausted");
        Envelope env = queue_.top();
        queue_.pop();
        now_ms_ = env.at_ms;
        Node* node = find(env.dst);
        if (!node) {
            log(env, "lost");
            continue;
        }
        if (!node->live()) {
            log(env, "buffered");
            node->inbox().push_back(std::move(env));
            continue;
        }
        log(env, "delivered");
        node->handle(env);
    }
    return processed;
}

// ---------------------------------------------------------------------------
// Peer

std::string peer_bus_name(const std::string& org, const std::string& peer) {
    return org + "/" + peer;
}

PeerNode::PeerNode(Network& net, std::string name, identity::Identity id)
    : Node(net, std::move(name)), identity_(std::move(id)) {
    const auto& config = net_.config();
    queryable_fields_ = {collector::kFieldNames.begin(), collector::kFieldNames.end()};
    for (const auto& coll : config.collections) {
        priv_.register_collection(coll);
        for (const auto& field : coll.private_fields) queryable_fields_.erase(field);
    }
}

bool PeerNode::is_member(const std::string& collection) const {
    const auto* config = priv_.collection(collection);
    if (!config) return false;
    return std::find(config->member_orgs.begin(), config->member_orgs.end(), org()) !=
           config->member_orgs.end();
}

bool PeerNode::verify_cert_cached(const identity::Certificate& cert) {
    std::string key = crypto::digest_hex(crypto::sha256(cert.serialize()));
    auto it = cert_cache_.find(key);
    if (it != cert_cache_.end()) return it->second;
    bool ok = identity::verify_certificate(cert, net_.ca_public_key());
    cert_cache_.emplace(std::move(key), ok);
    return ok;
}

bool PeerNode::expected_validity(const ledger::Transaction& tx) {
    if (!verify_cert_cached(tx.creator)) return false;
    return identity::evaluate_policy(
        net_.config().endorsement_policy, tx.endorsements, tx.endorsement_payload(),
        net_.ca_public_key(), net_.consortium(),
        [this](const identity::Certificate& cert) { return verify_cert_cached(cert); });
}

bool PeerNode::commit_block(const ledger::BlockPtr& block,
                            const std::vector<ledger::PrivatePayload>& payloads) {
    for (const auto& tx : block->transactions)
        if (tx.valid != expected_validity(tx)) return false;
    try {
        chain_.append_block(block);
    } catch (const ledger::LedgerError&) {
        return false;
    }
    apply_block(*block, payloads);
    return true;
}

void PeerNode::apply_block(const ledger::Block& block,
                           const std::vector<ledger::PrivatePayload>& payloads) {
    for (const auto& tx : block.transactions) {
        if (!tx.valid) continue;
        for (const auto& pw : tx.public_writes)
            world_.apply(pw.key, pw.value_json, block.number, tx.tx_id);
        for (const auto& pd : tx.private_digests)
            priv_.record_digest(pd.collection, pd.key, pd.digest, block.number);
    }
    for (const auto& payload : payloads) {
        if (!is_member(payload.collection)) continue;
        auto info = priv_.digest_info(payload.collection, payload.key);
        if (!info || ledger::value_digest(payload.value_json) != info->digest)
            continue;  // tampered or stale sidecar; reconciliation will retry
        priv_.put(payload.collection, payload.key, payload.value_json, info->height);
    }
    priv_.purge_expired(block.number);
}

void PeerNode::bootstrap_block(const ledger::BlockPtr& block,
                               const std::vector<ledger::PrivatePayload>& payloads) {
    chain_.append_block(block);
    apply_block(*block, payloads);
}

void PeerNode::bootstrap_private(const ledger::PrivatePayload& payload) {
    if (!is_member(payload.collection)) return;
    auto info = priv_.digest_info(payload.collection, payload.key);
    if (!info || ledger::value_digest(payload.value_json) != info->digest) return;
    priv_.put(payload.collection, payload.key, payload.value_json, info->height);
    if (!chain_.empty()) priv_.purge_expired(chain_.height());
}

bool PeerNode::behind() const { return parked_sync_ || !stash_.empty(); }

std::vector<std::string> PeerNode::sync_candidates() const {
    auto live = net_.live_peer_names(name_);
    std::vector<std::string> fresh;
    std::vector<std::string> suspect;
    for (const auto& name : live)
        (suspects_.count(name) ? suspect : fresh).push_back(name);
    // suspects last; the active orderer is the source of last resort
    fresh.insert(fresh.end(), suspect.begin(), suspect.end());
    if (fresh.empty()) {
        auto* orderer = net_.active_orderer();
        if (orderer && orderer->live()) fresh.push_back(orderer->name());
    }
    return fresh;
}

void PeerNode::start_sync() {
    if (sync_in_flight_) return;
    auto candidates = sync_candidates();
    if (candidates.empty()) {
        parked_sync_ = true;
        return;
    }
    parked_sync_ = false;
    std::uniform_int_distribution<size_t> dist(0, candidates.size() - 1);
    // non-suspects are ordered first; draw among them when possible
    size_t fresh_count = 0;
    for (const auto& c : candidates)
        if (!suspects_.count(c)) ++fresh_count;
    size_t pick = fresh_count > 0 ? std::uniform_int_distribution<size_t>(0, fresh_count - 1)(
                                        net_.bus().rng())
                                  : dist(net_.bus().rng());
    sync_in_flight_ = true;
    send(candidates[pick], GossipRequest{chain_.next_number()});
}

void PeerNode::on_deliver(const Envelope& env) {
    const auto& msg = std::get<DeliverBlock>(env.msg);
    uint64_t number = msg.block->number;
    uint64_t next = chain_.next_number();
    if (number < next) return;  // already committed
    if (number > next) {
        stash_[number] = msg;
        if (!sync_in_flight_) start_sync();
        return;
    }
    if (!commit_block(msg.block, msg.payloads)) return;
    drain_stash();
    // fetch payloads this block references but did not carry (e.g. after a gap)
    for (const auto& tx : msg.block->transactions)
        for (const auto& pd : tx.private_digests)
            if (tx.valid && is_member(pd.collection) && !priv_.get(pd.collection, pd.key) &&
                priv_.has_digest(pd.collection, pd.key)) {
                reconcile_private();
                return;
            }
}

void PeerNode::drain_stash() {
    for (;;) {
        auto it = stash_.find(chain_.next_number());
        if (it == stash_.end()) break;
        DeliverBlock entry = std::move(it->second);
        stash_.erase(it);
        if (!commit_block(entry.block, entry.payloads)) break;
    }
}

void PeerNode::on_gossip_request(const Envelope& env) {
    const auto& req = std::get<GossipRequest>(env.msg);
    GossipResponse resp;
    resp.responder_height = chain_.empty() ? 0 : chain_.height();
    if (!chain_.empty())
        for (uint64_t h = req.from_height; h <= chain_.height(); ++h)
            resp.blocks.push_back(chain_.share(h));

    if (gossip_tamper && !resp.blocks.empty()) {
        // serve one corrupted block; receivers must catch it via the hash links
        size_t idx = resp.blocks.size() / 2;
        ledger::Block copy = *resp.blocks[idx];
        if (!copy.transactions.empty() && !copy.transactions[0].public_writes.empty())
            copy.transactions[0].public_writes[0].value_json += "X";
        else
            copy.prev_hash[0] ^= 0xff;
        resp.blocks[idx] = std::make_shared<const ledger::Block>(std::move(copy));
    }
    send(env.src, std::move(resp));
}

void PeerNode::on_gossip_response(const Envelope& env) {
    const auto& resp = std::get<GossipResponse>(env.msg);
    sync_in_flight_ = false;
    bool bad = false;
    for (const auto& block : resp.blocks) {
        if (block->number < chain_.next_number()) continue;
        if (block->number != chain_.next_number() || !commit_block(block, {})) {
            bad = true;
            break;
        }
        ++blocks_fetched_via_gossip;
    }
    if (bad) {
        suspects_.insert(env.src);
        start_sync();
        return;
    }
    drain_stash();
    if (!chain_.empty() && resp.responder_height > chain_.height()) {
        start_sync();
        return;
    }
    reconcile_private();
}

void PeerNode::reconcile_private() {
    if (private_fetch_in_flight_) return;
    uint64_t height = chain_.empty() ? 0 : chain_.height();
    auto missing = priv_.missing_payloads(height);
    std::vector<ledger::PrivateDigest> mine;
    for (auto& entry : missing)
        if (is_member(entry.collection)) mine.push_back(std::move(entry));
    if (mine.empty()) {
        parked_private_ = false;
        return;
    }

    // one collection per round; progress on response re-triggers
    const std::string& collection = mine.front().collection;
    std::vector<ledger::PrivateDigest> wanted;
    for (auto& entry : mine)
        if (entry.collection == collection) wanted.push_back(std::move(entry));

    const auto* config = priv_.collection(collection);
    std::vector<std::string> sources;
    for (const auto& name : net_.live_peer_names(name_)) {
        auto* other = net_.peer(name);
        if (other && std::find(config->member_orgs.begin(), config->member_orgs.end(),
                               other->org()) != config->member_orgs.end())
            sources.push_back(name);
    }
    if (sources.empty()) {
        parked_private_ = true;
        return;
    }
    parked_private_ = false;
    std::uniform_int_distribution<size_t> dist(0, sources.size() - 1);
    private_fetch_in_flight_ = true;
    send(sources[dist(net_.bus().rng())], PrivateFetchRequest{std::move(wanted)});
}

void PeerNode::on_private_fetch_request(const Envelope& env) {
    const auto& req = std::get<PrivateFetchRequest>(env.msg);
    PrivateFetchResponse resp;
    auto* requester = net_.peer(env.src);
    if (!requester) {
        send(env.src, std::move(resp));
        return;
    }
    for (const auto& want : req.wanted) {
        const auto* config = priv_.collection(want.collection);
        if (!config || !is_member(want.collection)) continue;
        bool requester_member =
            std::find(config->member_orgs.begin(), config->member_orgs.end(), requester->org()) !=
            config->member_orgs.end();
        if (!requester_member) continue;  // payloads never leave the membership
        if (auto value = priv_.get(want.collection, want.key))
            resp.entries.push_back({want.collection, want.key, *value});
    }
    send(env.src, std::move(resp));
}

void PeerNode::on_private_fetch_response(const Envelope& env) {
    const auto& resp = std::get<PrivateFetchResponse>(env.msg);
    private_fetch_in_flight_ = false;
    size_t applied = 0;
    for (const auto& entry : resp.entries) {
        if (!is_member(entry.collection)) continue;
        auto info = priv_.digest_info(entry.collection, entry.key);
        if (!info || ledger::value_digest(entry.value_json) != info->digest) continue;
        priv_.put(entry.collection, entry.key, entry.value_json, info->height);
        ++applied;
    }
    if (!chain_.empty()) priv_.purge_expired(chain_.height());
    if (applied > 0) reconcile_private();  // terminates: strictly fewer missing each round
}

void PeerNode::on_proposal(const Envelope& env) {
    const auto& req = std::get<ProposalRequest>(env.msg);
    ProposalResponse resp;

    auto fail = [&](const std::string& reason) {
        resp.ok = false;
        resp.reason = reason;
        send(env.src, resp);
    };

    json body = json::parse(req.body_json, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return fail("malformed proposal body");
    resp.tx_id = body.value("tx_id", "");

    if (!verify_cert_cached(req.caller)) return fail("invalid caller certificate");
    if (!identity::verify_signature(req.caller, proposal_sign_bytes(req.body_json),
                                    req.caller_sig))
        return fail("invalid caller signature");

    std::string collection_name = body.value("collection", "");
    const auto* coll = priv_.collection(collection_name);
    if (!coll) return fail("unknown collection: " + collection_name);
    if (!identity::org_satisfies(coll->write_policy, req.caller.org, net_.consortium()))
        return fail("PolicyViolation: org " + req.caller.org + " may not write " + collection_name);

    if (!body.contains("tx_id") || !body.contains("timestamp_ms") ||
        !body.contains("public_json"))
        return fail("missing proposal fields");
    std::string public_json = body.at("public_json").get<std::string>();
    json pub = json::parse(public_json, nullptr, false);
    if (pub.is_discarded() || !pub.is_object()) return fail("malformed public record");

    // execute: derive the write set and check the field partition
    std::set<std::string> expected_public(collector::kFieldNames.begin(),
                                          collector::kFieldNames.end());
    for (const auto& field : coll->private_fields) expected_public.erase(field);
    std::set<std::string> actual_public;
    for (const auto& [key, value] : pub.items()) actual_public.insert(key);
    if (actual_public != expected_public) return fail("InvalidRecord: wrong public field set");
    if (!pub.at("record_id").is_string()) return fail("InvalidRecord: record_id must be a string");
    std::string record_key = pub.at("record_id").get<std::string>();
    if (record_key.empty()) return fail("InvalidRecord: empty record_id");
    if (!pub.at("ts_millis").is_number_unsigned() || pub.at("ts_millis").get<uint64_t>() >= 1000)
        return fail("InvalidRecord: ts_millis out of range");
    if (!pub.at("visit_count").is_number_unsigned() || pub.at("visit_count").get<uint64_t>() < 1)
        return fail("InvalidRecord: visit_count must be positive");

    crypto::Digest32 digest;
    if (is_member(collection_name)) {
        if (!body.contains("private_json")) return fail("missing private payload");
        std::string private_json = body.at("private_json").get<std::string>();
        json priv_doc = json::parse(private_json, nullptr, false);
        if (priv_doc.is_discarded() || !priv_doc.is_object())
            return fail("malformed private record");
        std::set<std::string> actual_private;
        for (const auto& [key, value] : priv_doc.items()) actual_private.insert(key);
        if (actual_private !=
            std::set<std::string>(coll->private_fields.begin(), coll->private_fields.end()))
            return fail("InvalidRecord: wrong private field set");
        digest = ledger::value_digest(private_json);
        if (body.contains("private_digest_hex")) {
            auto claimed = crypto::digest_from_hex(body.at("private_digest_hex"));
            if (!claimed || *claimed != digest) return fail("private digest mismatch");
        }
    } else {
        if (!body.contains("private_digest_hex")) return fail("missing private digest");
        auto claimed = crypto::digest_from_hex(body.at("private_digest_hex"));
        if (!claimed) return fail("malformed private digest");
        digest = *claimed;
    }

    ledger::Transaction core;
    core.tx_id = body.at("tx_id").get<std::string>();
    core.creator = req.caller;
    core.public_writes = {{record_key, public_json}};
    core.private_digests = {{collection_name, record_key, digest}};
    core.timestamp_ms = body.at("timestamp_ms").get<uint64_t>();

    Bytes payload = core.endorsement_payload();
    resp.ok = true;
    resp.endorsement.cert = identity_.certificate;
    resp.endorsement.signature = identity::sign(identity_, payload);
    resp.payload_sha256_hex = crypto::digest_hex(crypto::sha256(payload));
    send(env.src, std::move(resp));
}

void PeerNode::on_query(const Envelope& env) {
    const auto& req = std::get<QueryRequest>(env.msg);
    QueryResponse resp;
    resp.kind = req.kind;

    auto reply = [&](const std::string& status, const json& body) {
        resp.status = status;
        resp.body_json = body.dump();
        send(env.src, resp);
    };

    if (!verify_cert_cached(req.caller) ||
        !identity::verify_signature(req.caller, query_sign_bytes(req.kind, req.body_json),
                                    req.caller_sig))
        return reply("denied", json{{"reason", "invalid caller credentials"}});

    json body = json::parse(req.body_json, nullptr, false);
    if (body.is_discarded() || !body.is_object())
        return reply("error", json{{"reason", "malformed query body"}});

    if (req.kind == "public") {
        if (!identity::org_satisfies(net_.config().public_read_policy, req.caller.org,
                                     net_.consortium()))
            return reply("denied", json{{"reason", "org not in read policy"}});
        ledger::Selector selector;
        try {
            selector = ledger::Selector::parse(body.value("selector", ""));
        } catch (const ledger::LedgerError& e) {
            return reply("bad_selector", json{{"reason", e.what()}});
        }
        try {
            auto rows = world_.rich_query(selector, queryable_fields_);
            json arr = json::array();
            for (const auto& [key, value] : rows) arr.push_back(json::parse(value));
            return reply("ok", arr);
        } catch (const ledger::LedgerError& e) {
            return reply("unknown_field", json{{"reason", e.what()}});
        }
    }

    if (req.kind == "private") {
        std::string record_id = body.value("record_id", "");
        bool admitted_somewhere = false;
        for (const auto& coll : net_.config().collections) {
            if (!identity::org_satisfies(coll.read_policy, req.caller.org, net_.consortium()))
                continue;
            admitted_somewhere = true;
            if (!is_member(coll.name))
                return reply("error", json{{"reason", "peer is not a member of " + coll.name}});
            if (priv_.has_digest(coll.name, record_id)) {
                if (auto value = priv_.get(coll.name, record_id))
                    return reply("ok", json::parse(*value));
                return reply("purged", json{{"reason", "payload expired; digest remains on-chain"}});
            }
        }
        if (!admitted_somewhere)
            return reply("denied", json{{"reason", "org " + req.caller.org +
                                                       " is not a collection member"}});
        return reply("not_found", json{{"reason", "no such record id"}});
    }

    if (req.kind == "history") {
        if (!identity::org_satisfies(net_.config().public_read_policy, req.caller.org,
                                     net_.consortium()))
            return reply("denied", json{{"reason", "org not in read policy"}});
        std::string record_id = body.value("record_id", "");
        const auto* versions = world_.history(record_id);
        if (!versions) return reply("not_found", json{{"reason", "no such record id"}});
        json arr = json::array();
        for (const auto& v : *versions)
            arr.push_back({{"height", v.height}, {"tx_id", v.tx_id}, {"value", json::parse(v.value_json)}});
        return reply("ok", arr);
    }

    reply("error", json{{"reason", "unknown query kind: " + req.kind}});
}

void PeerNode::handle(const Envelope& env) {
    if (std::holds_alternative<DeliverBlock>(env.msg)) return on_deliver(env);
    if (std::holds_alternative<GossipRequest>(env.msg)) return on_gossip_request(env);
    if (std::holds_alternative<GossipResponse>(env.msg)) return on_gossip_response(env);
    if (std::holds_alternative<PrivateFetchRequest>(env.msg)) return on_private_fetch_request(env);
    if (std::holds_alternative<PrivateFetchResponse>(env.msg))
        return on_private_fetch_response(env);
    if (std::holds_alternative<ProposalRequest>(env.msg)) return on_proposal(env);
    if (std::holds_alternative<QueryRequest>(env.msg)) return on_query(env);
    // everything else is not addressed to peers
}

// ---------------------------------------------------------------------------
// Orderer

OrdererNode::OrdererNode(Network& net, std::string name, identity::Identity id, bool active)
    : Node(net, std::move(name)), identity_(std::move(id)), active_(active) {}

void OrdererNode::bootstrap_block(const ledger::BlockPtr& block) {
    chain_.append_block(block);
    for (const auto& tx : block->transactions) committed_[tx.tx_id] = block->number;
}

bool OrdererNode::verify_cert_cached(const identity::Certificate& cert) {
    std::string key = crypto::digest_hex(crypto::sha256(cert.serialize()));
    auto it = cert_cache_.find(key);
    if (it != cert_cache_.end()) return it->second;
    bool ok = identity::verify_certificate(cert, net_.ca_public_key());
    cert_cache_.emplace(std::move(key), ok);
    return ok;
}

void OrdererNode::on_submit(const Envelope& env) {
    const auto& msg = std::get<SubmitTx>(env.msg);
    const std::string& tx_id = msg.tx.tx_id;

    if (!active_) {
        send(env.src, SubmitAck{tx_id, false, "orderer not active"});
        return;
    }
    if (!verify_cert_cached(msg.tx.creator)) {
        send(env.src, SubmitAck{tx_id, false, "BadCreatorCertificate"});
        return;
    }
    auto committed = committed_.find(tx_id);
    if (committed != committed_.end()) {
        // resubmission of something already ordered (e.g. across a failover)
        send(env.src, SubmitAck{tx_id, true, "duplicate"});
        bool valid = true;
        for (const auto& tx : chain_.at(committed->second).transactions)
            if (tx.tx_id == tx_id) valid = tx.valid;
        send(env.src, TxCommitted{tx_id, committed->second, valid});
        return;
    }
    if (pending_ids_.count(tx_id)) {
        send(env.src, SubmitAck{tx_id, true, "pending"});
        return;
    }

    pending_ids_.insert(tx_id);
    queue_.push_back(Pending{msg.tx, msg.payloads, env.src});
    send(env.src, SubmitAck{tx_id, true, "queued"});

    if (queue_.size() >= net_.config().batch_max_count)
        cut();
    else if (queue_.size() == 1)
        send_self(CutTimer{++timer_generation_},
                  static_cast<double>(net_.config().batch_max_wait_ms));
}

void OrdererNode::cut() {
    if (queue_.empty()) return;
    ++timer_generation_;  // invalidate any armed timer

    size_t count = std::min<size_t>(queue_.size(), net_.config().batch_max_count);
    std::vector<Pending> batch(std::make_move_iterator(queue_.begin()),
                               std::make_move_iterator(queue_.begin() + count));
    queue_.erase(queue_.begin(), queue_.begin() + count);

    std::vector<ledger::Transaction> txs;
    txs.reserve(batch.size());
    auto verifier = [this](const identity::Certificate& cert) { return verify_cert_cached(cert); };
    for (auto& pending : batch) {
        ledger::Transaction tx = std::move(pending.tx);
        tx.valid = verify_cert_cached(tx.creator) &&
                   identity::evaluate_policy(net_.config().endorsement_policy, tx.endorsements,
                                             tx.endorsement_payload(), net_.ca_public_key(),
                                             net_.consortium(), verifier);
        txs.push_back(std::move(tx));
    }

    crypto::Digest32 prev{};
    if (!chain_.empty()) prev = chain_.blocks().back()->header_hash();
    auto block = std::make_shared<const ledger::Block>(
        ledger::make_block(chain_.next_number(), prev, std::move(txs)));
    chain_.append_block(block);
    uint64_t height = block->number;

    for (const auto& tx : block->transactions) {
        committed_[tx.tx_id] = height;
        pending_ids_.erase(tx.tx_id);
    }

    // deliver with the sidecar filtered per receiving org's memberships
    for (const auto& org : net_.config().orgs) {
        std::vector<ledger::PrivatePayload> org_payloads;
        for (const auto& pending : batch)
            for (const auto& payload : pending.payloads) {
                const auto* coll = net_.collection_config(payload.collection);
                if (coll && std::find(coll->member_orgs.begin(), coll->member_orgs.end(),
                                      org.name) != coll->member_orgs.end())
                    org_payloads.push_back(payload);
            }
        for (const auto& peer : org.peers) {
            std::string name = peer_bus_name(org.name, peer);
            Node* node = net_.bus().find(name);
            if (node && node->live()) send(name, DeliverBlock{block, org_payloads});
        }
    }
    for (const auto& orderer_name : net_.config().orderers) {
        if (orderer_name == name_) continue;
        Node* node = net_.bus().find(orderer_name);
        if (node && node->live()) send(orderer_name, DeliverBlock{block, {}});
    }
    for (const auto& pending : batch) {
        bool valid = false;
        for (const auto& tx : block->transactions)
            if (tx.tx_id == pending.tx.tx_id) {
                valid = tx.valid;
                break;
            }
        send(pending.submitter, TxCommitted{pending.tx.tx_id, height, valid});
    }

    if (!queue_.empty())
        send_self(CutTimer{timer_generation_}, static_cast<double>(net_.config().batch_max_wait_ms));
}

void OrdererNode::activate() {
    active_ = true;
    auto candidates = net_.live_peer_names();
    if (candidates.empty()) {
        net_.on_orderer_active(name_);
        return;
    }
    std::uniform_int_distribution<size_t> dist(0, candidates.size() - 1);
    send(candidates[dist(net_.bus().rng())], GossipRequest{chain_.next_number()});
}

void OrdererNode::handle(const Envelope& env) {
    if (std::holds_alternative<SubmitTx>(env.msg)) return on_submit(env);
    if (std::holds_alternative<CutTimer>(env.msg)) {
        const auto& timer = std::get<CutTimer>(env.msg);
        if (timer.generation == timer_generation_ && !queue_.empty()) cut();
        return;
    }
    if (std::holds_alternative<DeliverBlock>(env.msg)) {
        const auto& msg = std::get<DeliverBlock>(env.msg);
        if (msg.block->number == chain_.next_number()) bootstrap_block(msg.block);
        return;
    }
    if (std::holds_alternative<GossipRequest>(env.msg)) {
        const auto& req = std::get<GossipRequest>(env.msg);
        GossipResponse resp;
        resp.responder_height = chain_.empty() ? 0 : chain_.height();
        if (!chain_.empty())
            for (uint64_t h = req.from_height; h <= chain_.height(); ++h)
                resp.blocks.push_back(chain_.share(h));
        send(env.src, std::move(resp));
        return;
    }
    if (std::holds_alternative<GossipResponse>(env.msg)) {
        const auto& resp = std::get<GossipResponse>(env.msg);
        for (const auto& block : resp.blocks) {
            if (block->number != chain_.next_number()) continue;
            try {
                bootstrap_block(block);
            } catch (const ledger::LedgerError&) {
                break;
            }
        }
        if (active_) net_.on_orderer_active(name_);
        return;
    }
}

// ---------------------------------------------------------------------------
// Network

NetworkSetup NetworkSetup::fresh(const NetworkConfig& config, uint64_t master_seed) {
    config.validate();
    NetworkSetup setup;
    setup.config = config;

    auto derive_seed = [&](const std::string& label) {
        ByteWriter w;
        w.u64(master_seed);
        w.str(label);
        auto digest = crypto::sha256(w.data());
        crypto::Seed seed;
        std::copy(digest.begin(), digest.end(), seed.begin());
        return seed;
    };

    identity::CertificateAuthority ca =
        identity::CertificateAuthority::from_seed(derive_seed("ca"));
    setup.ca_public_key = ca.public_key();

    auto issue = [&](const std::string& bus_name, const std::string& subject,
                     const std::string& org, identity::Role role) {
        identity::Identity id;
        id.signing_key = crypto::SigningKey::from_seed(derive_seed("key/" + bus_name));
        id.certificate = ca.issue(subject, org, role, id.signing_key.public_key);
        setup.identities.emplace(bus_name, std::move(id));
    };

    for (const auto& org : config.orgs) {
        for (const auto& peer : org.peers)
            issue(peer_bus_name(org.name, peer), peer, org.name, identity::Role::peer);
        issue(org.name + "/client", "client", org.name, identity::Role::client);
    }
    for (const auto& orderer : config.orderers)
        issue(orderer, orderer, kOrdererOrg, identity::Role::orderer);
    return setup;
}

Network::Network(NetworkSetup setup, uint64_t scheduler_seed)
    : setup_(std::move(setup)),
      consortium_(setup_.config.org_names()),
      bus_(scheduler_seed, setup_.config.link_delay_ms, setup_.config.link_drop_rate) {
    setup_.config.validate();
    for (const auto& org : setup_.config.orgs)
        for (const auto& peer : org.peers) {
            std::string name = peer_bus_name(org.name, peer);
            auto it = setup_.identities.find(name);
            if (it == setup_.identities.end())
                throw InvalidConfig("missing identity for " + name);
            peer_nodes_.push_back(std::make_unique<PeerNode>(*this, name, it->second));
            bus_.register_node(peer_nodes_.back().get());
        }
    bool first = true;
    for (const auto& orderer : setup_.config.orderers) {
        auto it = setup_.identities.find(orderer);
        if (it == setup_.identities.end()) throw InvalidConfig("missing identity for " + orderer);
        orderer_nodes_.push_back(std::make_unique<OrdererNode>(*this, orderer, it->second, first));
        bus_.register_node(orderer_nodes_.back().get());
        first = false;
    }
}

const identity::Identity* Network::identity_of(const std::string& bus_name) const {
    auto it = setup_.identities.find(bus_name);
    return it == setup_.identities.end() ? nullptr : &it->second;
}

const ledger::CollectionConfig* Network::collection_config(const std::string& name) const {
    for (const auto& coll : setup_.config.collections)
        if (coll.name == name) return &coll;
    return nullptr;
}

PeerNode* Network::peer(const std::string& bus_name) {
    for (auto& node : peer_nodes_)
        if (node->name() == bus_name) return node.get();
    return nullptr;
}

std::vector<PeerNode*> Network::peers() {
    std::vector<PeerNode*> out;
    out.reserve(peer_nodes_.size());
    for (auto& node : peer_nodes_) out.push_back(node.get());
    return out;
}

std::vector<std::string> Network::live_peer_names(const std::string& excluding) const {
    std::vector<std::string> out;
    for (const auto& node : peer_nodes_)
        if (node->live() && node->name() != excluding) out.push_back(node->name());
    return out;
}

OrdererNode* Network::orderer(const std::string& name) {
    for (auto& node : orderer_nodes_)
        if (node->name() == name) return node.get();
    return nullptr;
}

OrdererNode* Network::active_orderer() {
    for (auto& node : orderer_nodes_)
        if (node->active() && node->live()) return node.get();
    return nullptr;
}

void Network::commit_genesis() {
    if (genesis_done_) throw InvalidConfig("chain already initialized");
    auto genesis =
        std::make_shared<const ledger::Block>(ledger::make_block(0, crypto::Digest32{}, {}));
    for (auto& peer : peer_nodes_) peer->bootstrap_block(genesis, {});
    for (auto& orderer : orderer_nodes_) orderer->bootstrap_block(genesis);
    genesis_done_ = true;
}

uint64_t Network::delivered_height() {
    for (auto& node : orderer_nodes_)
        if (node->active()) return node->delivered_height();
    return 0;
}

void Network::inject_fault(const std::string& node_name, FaultKind kind) {
    Node* node = bus_.find(node_name);
    switch (kind) {
        case FaultKind::crash: {
            if (node) node->set_live(false);
            return;
        }
        case FaultKind::recover: {
            if (!node) return;
            node->set_live(true);
            while (!node->inbox().empty()) {
                bus_.replay(std::move(node->inbox().front()));
                node->inbox().pop_front();
            }
            if (auto* peer_node = peer(node_name)) {
                peer_node->start_sync();
            } else if (auto* orderer_node = orderer(node_name)) {
                bool other_active = false;
                for (auto& other : orderer_nodes_)
                    if (other.get() != orderer_node && other->active() && other->live())
                        other_active = true;
                if (other_active)
                    orderer_node->active_ = false;
                else if (orderer_node->active_)
                    orderer_node->activate();
            }
            // a node coming back may unblock peers that were parked
            for (auto& peer_node : peer_nodes_) {
                if (!peer_node->live() || peer_node->name() == node_name) continue;
                if (peer_node->behind()) peer_node->start_sync();
                if (peer_node->parked_private_) peer_node->reconcile_private();
            }
            return;
        }
        case FaultKind::orderer_failover: {
            auto* failing = orderer(node_name);
            if (failing) {
                failing->set_live(false);
                failing->active_ = false;
            }
            for (auto& candidate : orderer_nodes_) {
                if (!candidate->live() || candidate->active()) continue;
                candidate->activate();
                return;
            }
            return;  // no standby: submissions queue client-side
        }
    }
}

void Network::register_client(Node* client_node, ClientHook* hook) {
    bus_.register_node(client_node);
    if (hook) client_hooks_[client_node->name()] = hook;
}

void Network::unregister_client(const std::string& name) {
    bus_.unregister_node(name);
    client_hooks_.erase(name);
}

void Network::on_orderer_active(const std::string& name) {
    for (auto& [client, hook] : client_hooks_) hook->on_orderer_active(name);
}

uint64_t Network::bulk_load(const std::vector<collector::PassiveDnsRecord>& records,
                            const std::string& creator_bus_name,
                            const std::string& endorser_bus_name, size_t records_per_block) {
    const identity::Identity* creator = identity_of(creator_bus_name);
    const identity::Identity* endorser = identity_of(endorser_bus_name);
    if (!creator || !endorser) throw InvalidConfig("bulk load needs known identities");
    if (setup_.config.collections.empty()) throw InvalidConfig("bulk load needs a collection");
    const auto& coll = setup_.config.collections.front();
    if (!genesis_done_) throw InvalidConfig("bulk load before genesis");

    OrdererNode* source = orderer_nodes_.front().get();
    uint64_t counter = 0;
    size_t i = 0;
    while (i < records.size()) {
        size_t take = std::min(records_per_block, records.size() - i);
        std::vector<ledger::Transaction> txs;
        std::vector<ledger::PrivatePayload> payloads;
        txs.reserve(take);
        for (size_t k = 0; k < take; ++k, ++i) {
            const auto& record = records[i];
            auto [public_json, private_json] = collector::split_json(record, coll.private_fields);

            ledger::Transaction tx;
            ByteWriter id_bytes;
            id_bytes.str("bulk");
            id_bytes.bytes(creator->certificate.serialize());
            id_bytes.u64(counter++);
            tx.tx_id = hex_encode(crypto::sha256(id_bytes.data()).data(), 16);
            tx.creator = creator->certificate;
            tx.public_writes = {{record.record_id, public_json}};
            tx.private_digests = {{coll.name, record.record_id, ledger::value_digest(private_json)}};
            tx.timestamp_ms = counter;
            tx.endorsements.push_back(
                {endorser->certificate, identity::sign(*endorser, tx.endorsement_payload())});
            tx.valid = true;
            payloads.push_back({coll.name, record.record_id, private_json});
            txs.push_back(std::move(tx));
        }

        crypto::Digest32 prev{};
        if (!source->chain().empty()) prev = source->chain().blocks().back()->header_hash();
        auto block = std::make_shared<const ledger::Block>(
            ledger::make_block(source->chain().next_number(), prev, std::move(txs)));

        for (auto& orderer_node : orderer_nodes_) orderer_node->bootstrap_block(block);
        for (auto& peer_node : peer_nodes_) {
            bool member = std::find(coll.member_orgs.begin(), coll.member_orgs.end(),
                                    peer_node->org()) != coll.member_orgs.end();
            peer_node->bootstrap_block(block, member ? payloads
                                                     : std::vector<ledger::PrivatePayload>{});
        }
    }
    return source->delivered_height();
}

void Network::load_chain(const std::vector<ledger::BlockPtr>& blocks,
                         const std::vector<ledger::PrivatePayload>& payloads) {
    for (const auto& block : blocks) {
        for (auto& peer_node : peer_nodes_) peer_node->bootstrap_block(block, {});
        for (auto& orderer_node : orderer_nodes_) orderer_node->bootstrap_block(block);
    }
    for (const auto& payload : payloads)
        for (auto& peer_node : peer_nodes_) peer_node->bootstrap_private(payload);
    if (!blocks.empty()) genesis_done_ = true;
}

}  // namespace pdnsl::net
