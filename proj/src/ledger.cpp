#include "pdnsl/ledger.hpp"

#include <algorithm>
#include <fstream>

namespace pdnsl::ledger {

using nlohmann::json;

crypto::Digest32 value_digest(const std::string& value_json) { return crypto::sha256(value_json); }

Bytes Transaction::endorsement_payload() const {
    ByteWriter w;
    w.str(tx_id);
    w.bytes(creator.serialize());
    w.u32(static_cast<uint32_t>(public_writes.size()));
    for (const auto& pw : public_writes) {
        w.str(pw.key);
        w.str(pw.value_json);
    }
    w.u32(static_cast<uint32_t>(private_digests.size()));
    for (const auto& pd : private_digests) {
        w.str(pd.collection);
        w.str(pd.key);
        w.raw(pd.digest.data(), pd.digest.size());
    }
    w.u64(timestamp_ms);
    return w.take();
}

Bytes Transaction::serialize() const {
    ByteWriter w;
    w.raw(endorsement_payload());
    w.u32(static_cast<uint32_t>(endorsements.size()));
    for (const auto& e : endorsements) {
        w.bytes(e.cert.serialize());
        w.bytes(e.signature);
    }
    w.u8(valid ? 1 : 0);
    return w.take();
}

namespace {
[[noreturn]] void corrupt(const std::string& what) {
    throw LedgerError(LedgerErrc::corrupt_chain_file, what);
}

crypto::Digest32 read_digest(ByteReader& r) {
    Bytes raw = r.raw(crypto::kDigestBytes);
    crypto::Digest32 d;
    std::copy(raw.begin(), raw.end(), d.begin());
    return d;
}
}  // namespace

Transaction Transaction::deserialize(ByteReader& r) {
    try {
        Transaction tx;
        tx.tx_id = r.str();
        auto cert = identity::Certificate::deserialize(r.bytes());
        if (!cert) corrupt("bad creator certificate");
        tx.creator = *cert;
        uint32_t n_writes = r.u32();
        for (uint32_t i = 0; i < n_writes; ++i) {
            PublicWrite pw;
            pw.key = r.str();
            pw.value_json = r.str();
            tx.public_writes.push_back(std::move(pw));
        }
        uint32_t n_digests = r.u32();
        for (uint32_t i = 0; i < n_digests; ++i) {
            PrivateDigest pd;
            pd.collection = r.str();
            pd.key = r.str();
            pd.digest = read_digest(r);
            tx.private_digests.push_back(std::move(pd));
        }
        tx.timestamp_ms = r.u64();
        uint32_t n_endorsements = r.u32();
        for (uint32_t i = 0; i < n_endorsements; ++i) {
            identity::SignatureEntry e;
            auto ecert = identity::Certificate::deserialize(r.bytes());
            if (!ecert) corrupt("bad endorsement certificate");
            e.cert = *ecert;
            e.signature = r.bytes();
            tx.endorsements.push_back(std::move(e));
        }
        uint8_t flag = r.u8();
        if (flag > 1) corrupt("non-canonical validity flag");
        tx.valid = flag == 1;
        return tx;
    } catch (const ShortRead&) {
        corrupt("truncated transaction");
    }
}

Bytes Block::header_bytes() const {
    ByteWriter w;
    w.u64(number);
    w.raw(prev_hash.data(), prev_hash.size());
    w.raw(data_hash.data(), data_hash.size());
    return w.take();
}

crypto::Digest32 Block::header_hash() const { return crypto::sha256(header_bytes()); }

crypto::Digest32 Block::compute_data_hash(const std::vector<Transaction>& txs) {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(txs.size()));
    for (const auto& tx : txs) w.bytes(tx.serialize());
    return crypto::sha256(w.data());
}

Bytes Block::serialize() const {
    ByteWriter w;
    w.raw(header_bytes());
    w.u32(static_cast<uint32_t>(transactions.size()));
    for (const auto& tx : transactions) w.bytes(tx.serialize());
    return w.take();
}

Block Block::deserialize(const Bytes& data) {
    try {
        ByteReader r(data);
        Block b;
        b.number = r.u64();
        b.prev_hash = read_digest(r);
        b.data_hash = read_digest(r);
        uint32_t n = r.u32();
        for (uint32_t i = 0; i < n; ++i) {
            Bytes tx_bytes = r.bytes();
            ByteReader tr(tx_bytes);
            b.transactions.push_back(Transaction::deserialize(tr));
            tr.expect_done("transaction");
        }
        r.expect_done("block");
        return b;
    } catch (const ShortRead& e) {
        corrupt(e.what());
    }
}

Block make_block(uint64_t number, const crypto::Digest32& prev_hash,
                 std::vector<Transaction> txs) {
    Block b;
    b.number = number;
    b.prev_hash = prev_hash;
    b.data_hash = Block::compute_data_hash(txs);
    b.transactions = std::move(txs);
    return b;
}

uint64_t Chain::append_block(BlockPtr block) {
    if (block->number != next_number())
        throw LedgerError(LedgerErrc::out_of_order_block,
                          "expected block " + std::to_string(next_number()) + ", got " +
                              std::to_string(block->number));
    crypto::Digest32 expected_prev{};
    if (!blocks_.empty()) expected_prev = blocks_.back()->header_hash();
    if (block->prev_hash != expected_prev)
        throw LedgerError(LedgerErrc::hash_mismatch, "prev_hash does not match chain tip");
    if (block->data_hash != Block::compute_data_hash(block->transactions))
        throw LedgerError(LedgerErrc::hash_mismatch, "data_hash does not match transactions");
    blocks_.push_back(std::move(block));
    return height();
}

uint64_t Chain::append_block(Block block) {
    return append_block(std::make_shared<const Block>(std::move(block)));
}

std::optional<uint64_t> Chain::validate() const {
    crypto::Digest32 expected_prev{};
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const Block& b = *blocks_[i];
        if (b.number != i) return i;
        if (b.prev_hash != expected_prev) return i;
        if (b.data_hash != Block::compute_data_hash(b.transactions)) return i;
        expected_prev = b.header_hash();
    }
    return std::nullopt;
}

Bytes Chain::serialize_all() const {
    ByteWriter w;
    for (const auto& b : blocks_) w.bytes(b->serialize());
    return w.take();
}

std::optional<uint64_t> validate_chain(const Chain& chain) { return chain.validate(); }

namespace chainfile {

std::vector<BlockPtr> load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) corrupt("cannot open chain file " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::vector<BlockPtr> blocks;
    try {
        ByteReader r(data);
        while (!r.done()) {
            Bytes block_bytes = r.bytes();
            blocks.push_back(std::make_shared<const Block>(Block::deserialize(block_bytes)));
        }
    } catch (const ShortRead&) {
        corrupt("truncated chain file at block " + std::to_string(blocks.size()));
    }
    return blocks;
}

void append(const std::filesystem::path& path, const Block& block) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to chain file " + path.string());
    Bytes body = block.serialize();
    ByteWriter w;
    w.bytes(body);
    out.write(reinterpret_cast<const char*>(w.data().data()),
              static_cast<std::streamsize>(w.size()));
}

}  // namespace chainfile

const std::set<std::string>& public_record_fields() {
    static const std::set<std::string> fields = [] {
        std::set<std::string> f(collector::kFieldNames.begin(), collector::kFieldNames.end());
        for (const auto& p : collector::kPrivateFieldNames) f.erase(p);
        return f;
    }();
    return fields;
}

Selector Selector::parse(const std::string& text) {
    Selector sel;
    size_t start = 0;
    while (start < text.size()) {
        size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        std::string clause = text.substr(start, comma - start);
        start = comma + 1;
        // trim
        while (!clause.empty() && clause.front() == ' ') clause.erase(clause.begin());
        while (!clause.empty() && clause.back() == ' ') clause.pop_back();
        if (clause.empty()) continue;

        static const std::vector<std::pair<std::string, Predicate::Op>> ops = {
            {">=", Predicate::Op::ge}, {"<=", Predicate::Op::le}, {">", Predicate::Op::gt},
            {"<", Predicate::Op::lt},  {"=", Predicate::Op::eq},
        };
        Predicate pred;
        size_t op_pos = std::string::npos;
        size_t op_len = 0;
        for (const auto& [token, op] : ops) {
            size_t pos = clause.find(token);
            if (pos != std::string::npos && pos < op_pos) {
                op_pos = pos;
                op_len = token.size();
                pred.op = op;
            }
        }
        if (op_pos == std::string::npos || op_pos == 0)
            throw LedgerError(LedgerErrc::bad_selector, "cannot parse clause: " + clause);
        pred.field = clause.substr(0, op_pos);
        std::string rhs = clause.substr(op_pos + op_len);
        // numeric rhs compares numerically, everything else as a string
        try {
            size_t consumed = 0;
            uint64_t num = std::stoull(rhs, &consumed);
            if (consumed == rhs.size() && !rhs.empty())
                pred.value = num;
            else
                pred.value = rhs;
        } catch (...) {
            pred.value = rhs;
        }
        sel.predicates.push_back(std::move(pred));
    }
    return sel;
}

std::string Selector::text() const {
    std::string out;
    for (const auto& p : predicates) {
        if (!out.empty()) out.push_back(',');
        out += p.field;
        switch (p.op) {
            case Predicate::Op::eq: out += "="; break;
            case Predicate::Op::ge: out += ">="; break;
            case Predicate::Op::le: out += "<="; break;
            case Predicate::Op::gt: out += ">"; break;
            case Predicate::Op::lt: out += "<"; break;
        }
        out += p.value.is_string() ? p.value.get<std::string>() : p.value.dump();
    }
    return out;
}

void WorldState::apply(const std::string& key, const std::string& value_json, uint64_t height,
                       const std::string& tx_id) {
    ValueVersion version{height, tx_id, value_json};
    auto it = latest_.find(key);
    if (it != latest_.end()) {
        // refresh the domain index if the domain changed (it normally cannot,
        // since the key is derived from it, but replay must stay total)
        json old_doc = json::parse(it->second.value_json, nullptr, false);
        json new_doc = json::parse(value_json, nullptr, false);
        std::string old_domain = old_doc.is_object() ? old_doc.value("domain", "") : "";
        std::string new_domain = new_doc.is_object() ? new_doc.value("domain", "") : "";
        if (old_domain != new_domain) {
            auto range = domain_index_.equal_range(old_domain);
            for (auto di = range.first; di != range.second; ++di)
                if (di->second == key) {
                    domain_index_.erase(di);
                    break;
                }
            if (!new_domain.empty()) domain_index_.emplace(new_domain, key);
        }
        it->second = version;
    } else {
        latest_.emplace(key, version);
        json doc = json::parse(value_json, nullptr, false);
        if (doc.is_object() && doc.contains("domain") && doc["domain"].is_string())
            domain_index_.emplace(doc["domain"].get<std::string>(), key);
    }
    history_[key].push_back(std::move(version));
}

std::optional<ValueVersion> WorldState::get(const std::string& key) const {
    auto it = latest_.find(key);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

const std::vector<ValueVersion>* WorldState::history(const std::string& key) const {
    auto it = history_.find(key);
    if (it == history_.end()) return nullptr;
    return &it->second;
}

namespace {

bool compare_values(const json& lhs, Predicate::Op op, const json& rhs) {
    int cmp;
    if (lhs.is_number() && rhs.is_number()) {
        double a = lhs.get<double>();
        double b = rhs.get<double>();
        cmp = a < b ? -1 : a > b ? 1 : 0;
    } else if (lhs.is_string() && rhs.is_string()) {
        cmp = lhs.get<std::string>().compare(rhs.get<std::string>());
        cmp = cmp < 0 ? -1 : cmp > 0 ? 1 : 0;
    } else {
        return false;  // type mismatch never matches
    }
    switch (op) {
        case Predicate::Op::eq: return cmp == 0;
        case Predicate::Op::ge: return cmp >= 0;
        case Predicate::Op::le: return cmp <= 0;
        case Predicate::Op::gt: return cmp > 0;
        case Predicate::Op::lt: return cmp < 0;
    }
    return false;
}

}  // namespace

bool WorldState::match(const std::string& value_json, const Selector& selector) const {
    json doc = json::parse(value_json, nullptr, false);
    if (!doc.is_object()) return false;
    for (const auto& pred : selector.predicates) {
        auto it = doc.find(pred.field);
        if (it == doc.end()) return false;
        if (!compare_values(*it, pred.op, pred.value)) return false;
    }
    return true;
}

std::vector<std::pair<std::string, std::string>> WorldState::rich_query(
    const Selector& selector, const std::set<std::string>& queryable) const {
    for (const auto& pred : selector.predicates)
        if (!queryable.count(pred.field))
            throw LedgerError(LedgerErrc::unknown_field,
                              "selector field is not queryable: " + pred.field);

    std::vector<std::pair<std::string, std::string>> out;

    // Fast paths: the world-state key is record_id, and domain equality is
    // served by the secondary index. Results are identical to a full scan.
    const Predicate* key_eq = nullptr;
    const Predicate* domain_eq = nullptr;
    for (const auto& pred : selector.predicates) {
        if (pred.op != Predicate::Op::eq || !pred.value.is_string()) continue;
        if (pred.field == "record_id" && !key_eq) key_eq = &pred;
        if (pred.field == "domain" && !domain_eq) domain_eq = &pred;
    }

    if (key_eq) {
        auto it = latest_.find(key_eq->value.get<std::string>());
        if (it != latest_.end() && match(it->second.value_json, selector))
            out.emplace_back(it->first, it->second.value_json);
    } else if (domain_eq) {
        auto range = domain_index_.equal_range(domain_eq->value.get<std::string>());
        for (auto it = range.first; it != range.second; ++it) {
            const auto& entry = latest_.at(it->second);
            if (match(entry.value_json, selector)) out.emplace_back(it->second, entry.value_json);
        }
    } else {
        for (const auto& [key, entry] : latest_)
            if (match(entry.value_json, selector)) out.emplace_back(key, entry.value_json);
    }

    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

crypto::Digest32 WorldState::digest() const {
    std::vector<std::pair<std::string, const ValueVersion*>> entries;
    entries.reserve(latest_.size());
    for (const auto& [key, version] : latest_) entries.emplace_back(key, &version);
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    ByteWriter w;
    for (const auto& [key, version] : entries) {
        w.str(key);
        w.str(version->value_json);
        w.u64(version->height);
        w.str(version->tx_id);
    }
    return crypto::sha256(w.data());
}

void PrivateStore::register_collection(const CollectionConfig& config) {
    collections_[config.name] = config;
}

bool PrivateStore::has_collection(const std::string& name) const {
    return collections_.count(name) > 0;
}

const CollectionConfig* PrivateStore::collection(const std::string& name) const {
    auto it = collections_.find(name);
    return it == collections_.end() ? nullptr : &it->second;
}

void PrivateStore::record_digest(const std::string& collection, const std::string& key,
                                 const crypto::Digest32& digest, uint64_t height) {
    digests_[{collection, key}] = DigestEntry{digest, height};
}

void PrivateStore::put(const std::string& collection, const std::string& key,
                       const std::string& value_json, uint64_t height) {
    if (!has_collection(collection))
        throw LedgerError(LedgerErrc::unknown_collection, "unknown collection: " + collection);
    payloads_[{collection, key}] = PayloadEntry{value_json, height};
}

std::optional<std::string> PrivateStore::get(const std::string& collection,
                                             const std::string& key) const {
    auto it = payloads_.find({collection, key});
    if (it == payloads_.end()) return std::nullopt;
    return it->second.value_json;
}

bool PrivateStore::has_digest(const std::string& collection, const std::string& key) const {
    return digests_.count({collection, key}) > 0;
}

std::optional<crypto::Digest32> PrivateStore::digest_of(const std::string& collection,
                                                        const std::string& key) const {
    auto it = digests_.find({collection, key});
    if (it == digests_.end()) return std::nullopt;
    return it->second.digest;
}

std::optional<PrivateStore::DigestInfo> PrivateStore::digest_info(const std::string& collection,
                                                                  const std::string& key) const {
    auto it = digests_.find({collection, key});
    if (it == digests_.end()) return std::nullopt;
    return DigestInfo{it->second.digest, it->second.height};
}

void PrivateStore::purge_expired(uint64_t current_height) {
    for (auto it = payloads_.begin(); it != payloads_.end();) {
        const auto* config = collection(it->first.first);
        uint64_t ttl = config ? config->block_to_live : 0;
        if (ttl > 0 && current_height >= it->second.height &&
            current_height - it->second.height >= ttl)
            it = payloads_.erase(it);
        else
            ++it;
    }
}

std::vector<PrivateDigest> PrivateStore::missing_payloads(uint64_t current_height) const {
    std::vector<PrivateDigest> out;
    for (const auto& [key, entry] : digests_) {
        if (payloads_.count(key)) continue;
        const auto* config = collection(key.first);
        uint64_t ttl = config ? config->block_to_live : 0;
        bool purged = ttl > 0 && current_height >= entry.height &&
                      current_height - entry.height >= ttl;
        if (purged) continue;  // purged is purged; not reconciled back
        out.push_back(PrivateDigest{key.first, key.second, entry.digest});
    }
    return out;
}

std::vector<PrivatePayload> PrivateStore::all_payloads() const {
    std::vector<PrivatePayload> out;
    out.reserve(payloads_.size());
    for (const auto& [key, entry] : payloads_)
        out.push_back(PrivatePayload{key.first, key.second, entry.value_json});
    return out;
}

crypto::Digest32 PrivateStore::digest_state() const {
    ByteWriter w;
    for (const auto& [key, entry] : digests_) {
        w.str(key.first);
        w.str(key.second);
        w.raw(entry.digest.data(), entry.digest.size());
        w.u64(entry.height);
    }
    for (const auto& [key, entry] : payloads_) {
        w.str(key.first);
        w.str(key.second);
        w.str(entry.value_json);
        w.u64(entry.height);
    }
    return crypto::sha256(w.data());
}

WorldState replay_chain(const std::vector<BlockPtr>& blocks) {
    WorldState state;
    for (const auto& block : blocks)
        for (const auto& tx : block->transactions) {
            if (!tx.valid) continue;
            for (const auto& pw : tx.public_writes)
                state.apply(pw.key, pw.value_json, block->number, tx.tx_id);
        }
    return state;
}

void replay_digests(const std::vector<BlockPtr>& blocks, PrivateStore& store) {
    for (const auto& block : blocks)
        for (const auto& tx : block->transactions) {
            if (!tx.valid) continue;
            for (const auto& pd : tx.private_digests)
                store.record_digest(pd.collection, pd.key, pd.digest, block->number);
        }
}

}  // namespace pdnsl::ledger
