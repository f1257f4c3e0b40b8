#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pdnsl/collector.hpp"
#include "pdnsl/identity.hpp"

// The hash-chained block store, the replay-derived world state, and the
// private data collection whose payloads live off-chain with only digests
// committed. One digest algorithm (SHA-256 over canonical bytes) covers
// block headers, transaction lists and private values.
namespace pdnsl::ledger {

enum class LedgerErrc {
    hash_mismatch,
    out_of_order_block,
    unknown_collection,
    unknown_field,
    bad_selector,
    corrupt_chain_file,
};

class LedgerError : public std::runtime_error {
public:
    LedgerError(LedgerErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    LedgerErrc code() const { return code_; }

private:
    LedgerErrc code_;
};

struct PublicWrite {
    std::string key;
    std::string value_json;
    bool operator==(const PublicWrite&) const = default;
};

struct PrivateDigest {
    std::string collection;
    std::string key;
    crypto::Digest32 digest{};
    bool operator==(const PrivateDigest&) const = default;
};

// Sidecar payload disseminated to collection members only. Never part of
// block serialization.
struct PrivatePayload {
    std::string collection;
    std::string key;
    std::string value_json;
    bool operator==(const PrivatePayload&) const = default;
};

crypto::Digest32 value_digest(const std::string& value_json);

struct Transaction {
    std::string tx_id;
    identity::Certificate creator;
    std::vector<PublicWrite> public_writes;
    std::vector<PrivateDigest> private_digests;
    std::vector<identity::SignatureEntry> endorsements;
    uint64_t timestamp_ms = 0;
    // Set at ordering time from the endorsement policy; committed inside the
    // hashed bytes so history keeps rejected-but-ordered transactions intact.
    bool valid = true;

    Bytes serialize() const;
    static Transaction deserialize(ByteReader& r);  // throws LedgerError(corrupt_chain_file)
    // Canonical bytes endorsers sign: everything except endorsements + flag.
    Bytes endorsement_payload() const;
    bool operator==(const Transaction&) const = default;
};

inline constexpr size_t kBlockHeaderBytes = 8 + 32 + 32;

struct Block {
    uint64_t number = 0;
    crypto::Digest32 prev_hash{};  // all-zero for genesis
    crypto::Digest32 data_hash{};
    std::vector<Transaction> transactions;

    // Fixed-width big-endian number ++ prev_hash ++ data_hash.
    Bytes header_bytes() const;
    crypto::Digest32 header_hash() const;
    static crypto::Digest32 compute_data_hash(const std::vector<Transaction>& txs);

    Bytes serialize() const;
    static Block deserialize(const Bytes& data);  // throws LedgerError(corrupt_chain_file)
    bool operator==(const Block&) const = default;
};

using BlockPtr = std::shared_ptr<const Block>;

Block make_block(uint64_t number, const crypto::Digest32& prev_hash,
                 std::vector<Transaction> txs);

class Chain {
public:
    bool empty() const { return blocks_.empty(); }
    size_t size() const { return blocks_.size(); }
    // Height of the last block; only meaningful when non-empty.
    uint64_t height() const { return blocks_.back()->number; }
    uint64_t next_number() const { return blocks_.empty() ? 0 : height() + 1; }

    // Enforces the block number sequence, the prev_hash link and the
    // data_hash before extending. Throws LedgerError. Returns the new height.
    uint64_t append_block(BlockPtr block);
    uint64_t append_block(Block block);

    const Block& at(uint64_t number) const { return *blocks_.at(number); }
    BlockPtr share(uint64_t number) const { return blocks_.at(number); }
    const std::vector<BlockPtr>& blocks() const { return blocks_; }

    // nullopt when every link and digest checks out, else the first bad height.
    std::optional<uint64_t> validate() const;

    Bytes serialize_all() const;  // length-prefixed block records

private:
    std::vector<BlockPtr> blocks_;
};

std::optional<uint64_t> validate_chain(const Chain& chain);

// Append-only chain persistence: a sequence of u32-length-prefixed blocks.
namespace chainfile {
std::vector<BlockPtr> load(const std::filesystem::path& path);  // throws on corruption
void append(const std::filesystem::path& path, const Block& block);
}  // namespace chainfile

struct ValueVersion {
    uint64_t height = 0;
    std::string tx_id;
    std::string value_json;
    bool operator==(const ValueVersion&) const = default;
};

// Selector: a conjunction of field predicates over public record fields.
struct Predicate {
    enum class Op { eq, ge, le, gt, lt };
    std::string field;
    Op op = Op::eq;
    nlohmann::json value;
};

struct Selector {
    std::vector<Predicate> predicates;

    // "domain=example.com,ttl>=300"; numeric rhs parsed as numbers.
    // Throws LedgerError(bad_selector).
    static Selector parse(const std::string& text);
    std::string text() const;
    bool empty() const { return predicates.empty(); }
};

// The queryable (non-personal) field names of the record schema.
const std::set<std::string>& public_record_fields();

class WorldState {
public:
    void apply(const std::string& key, const std::string& value_json, uint64_t height,
               const std::string& tx_id);

    std::optional<ValueVersion> get(const std::string& key) const;
    const std::vector<ValueVersion>* history(const std::string& key) const;
    size_t size() const { return latest_.size(); }

    // Exactly the records whose public JSON satisfies every predicate,
    // ordered by key. Selectors naming a field outside `queryable` are
    // refused with LedgerError(unknown_field) -- that refusal is the
    // privacy guard keeping personal fields out of reach.
    std::vector<std::pair<std::string, std::string>> rich_query(
        const Selector& selector, const std::set<std::string>& queryable = public_record_fields()) const;

    crypto::Digest32 digest() const;  // replica-comparison digest

private:
    bool match(const std::string& value_json, const Selector& selector) const;

    std::unordered_map<std::string, ValueVersion> latest_;
    std::map<std::string, std::vector<ValueVersion>> history_;
    std::unordered_multimap<std::string, std::string> domain_index_;  // domain -> key
};

struct CollectionConfig {
    std::string name;
    std::vector<std::string> member_orgs;
    uint64_t block_to_live = 0;  // 0 = never purge
    identity::Policy read_policy;
    identity::Policy write_policy;
    std::vector<std::string> private_fields{collector::kPrivateFieldNames.begin(),
                                            collector::kPrivateFieldNames.end()};
    bool operator==(const CollectionConfig&) const = default;
};

class PrivateStore {
public:
    void register_collection(const CollectionConfig& config);
    bool has_collection(const std::string& name) const;
    const CollectionConfig* collection(const std::string& name) const;

    // On-chain digests are tracked for every key and survive purging.
    void record_digest(const std::string& collection, const std::string& key,
                       const crypto::Digest32& digest, uint64_t height);
    // Throws LedgerError(unknown_collection).
    void put(const std::string& collection, const std::string& key, const std::string& value_json,
             uint64_t height);
    std::optional<std::string> get(const std::string& collection, const std::string& key) const;
    bool has_digest(const std::string& collection, const std::string& key) const;
    std::optional<crypto::Digest32> digest_of(const std::string& collection,
                                              const std::string& key) const;
    struct DigestInfo {
        crypto::Digest32 digest{};
        uint64_t height = 0;
    };
    std::optional<DigestInfo> digest_info(const std::string& collection,
                                          const std::string& key) const;

    // Drops payloads with current_height - commit_height >= block_to_live
    // (block_to_live 0 keeps them forever). Digests stay.
    void purge_expired(uint64_t current_height);

    // Unpurged digests with no stored payload: what a recovering member
    // still needs to reconcile.
    std::vector<PrivateDigest> missing_payloads(uint64_t current_height) const;
    std::vector<PrivatePayload> all_payloads() const;

    crypto::Digest32 digest_state() const;
    size_t payload_count() const { return payloads_.size(); }

private:
    struct DigestEntry {
        crypto::Digest32 digest;
        uint64_t height;
    };
    struct PayloadEntry {
        std::string value_json;
        uint64_t height;
    };

    std::map<std::string, CollectionConfig> collections_;
    std::map<std::pair<std::string, std::string>, DigestEntry> digests_;
    std::map<std::pair<std::string, std::string>, PayloadEntry> payloads_;
};

// Replays committed public writes of valid transactions, block by block.
// This is both the recovery path and the test oracle for state rebuilds.
WorldState replay_chain(const std::vector<BlockPtr>& blocks);
// Rebuilds the digest track of a private store (payloads live off-chain).
void replay_digests(const std::vector<BlockPtr>& blocks, PrivateStore& store);

}  // namespace pdnsl::ledger
