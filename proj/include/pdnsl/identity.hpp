#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdnsl/crypto.hpp"

// Participant credentials and policy evaluation. Certificates carry the
// semantic content of an issued identity (subject, org, role, key) under a
// CA signature; no X.509 interop is attempted.
namespace pdnsl::identity {

enum class Role : uint8_t { peer = 0, orderer = 1, admin = 2, client = 3 };

const char* role_name(Role role);
std::optional<Role> role_from_name(const std::string& name);

struct Certificate {
    std::string subject;
    std::string org;
    Role role = Role::client;
    crypto::PublicKey public_key{};
    Bytes ca_signature;

    // Canonical bytes the CA signs: length-prefixed fields in declaration order.
    Bytes signed_payload() const;
    Bytes serialize() const;
    static std::optional<Certificate> deserialize(const Bytes& data);
    std::string to_hex() const;
    static std::optional<Certificate> from_hex(const std::string& hex);

    bool operator==(const Certificate&) const = default;
};

struct Identity {
    Certificate certificate;
    crypto::SigningKey signing_key;
};

struct Policy {
    enum class Kind : uint8_t { endorsement = 0, read = 1, write = 2 };

    Kind kind = Kind::endorsement;
    uint32_t min_signatures = 1;
    std::optional<Role> required_role;  // nullopt = any role counts
    std::vector<std::string> orgs;      // empty = any consortium org

    bool operator==(const Policy&) const = default;
};

class DuplicateSubject : public std::runtime_error {
public:
    explicit DuplicateSubject(const std::string& what) : std::runtime_error(what) {}
};

class CertificateAuthority {
public:
    static CertificateAuthority create();
    static CertificateAuthority from_seed(const crypto::Seed& seed);
    explicit CertificateAuthority(crypto::SigningKey key) : key_(std::move(key)) {}

    const crypto::PublicKey& public_key() const { return key_.public_key; }
    const crypto::SigningKey& signing_key() const { return key_; }

    // Throws DuplicateSubject when (subject, org) was already issued.
    Certificate issue(const std::string& subject, const std::string& org, Role role,
                      const crypto::PublicKey& subject_key);
    Identity issue_identity(const std::string& subject, const std::string& org, Role role);

private:
    crypto::SigningKey key_;
    std::set<std::pair<std::string, std::string>> issued_;
};

// True iff ca_signature is valid over the certificate's canonical payload.
// Total: malformed input yields false, never a throw.
bool verify_certificate(const Certificate& cert, const crypto::PublicKey& ca_public_key) noexcept;

Bytes sign(const Identity& id, const uint8_t* payload, size_t len);
Bytes sign(const Identity& id, const Bytes& payload);
bool verify_signature(const Certificate& cert, const Bytes& payload, const Bytes& sig) noexcept;

struct SignatureEntry {
    Certificate cert;
    Bytes signature;
    bool operator==(const SignatureEntry&) const = default;
};

// True iff the rule is satisfied by the signatures that verify (certificate
// and signature both valid, role and org admitted by the policy). Signers
// are deduplicated by (subject, org). Invalid entries contribute nothing,
// so adding signatures can only keep or gain satisfaction.
//
// `cert_verifier` lets callers swap in a memoized certificate check; it must
// be observationally identical to verify_certificate under the same CA key.
using CertVerifier = std::function<bool(const Certificate&)>;
bool evaluate_policy(const Policy& policy, const std::vector<SignatureEntry>& signatures,
                     const Bytes& payload, const crypto::PublicKey& ca_public_key,
                     const std::vector<std::string>& consortium_orgs,
                     const CertVerifier& cert_verifier = nullptr);

// Membership side of read/write policies: is `org` admitted by the rule?
bool org_satisfies(const Policy& policy, const std::string& org,
                   const std::vector<std::string>& consortium_orgs);

// Hex-encoded key/cert material under a config directory:
//   <dir>/ca.key, <dir>/ca.pub, <dir>/<org>/<subject>.key, .cert
void save_hex_file(const std::filesystem::path& path, const Bytes& data);
Bytes load_hex_file(const std::filesystem::path& path);
void save_ca(const std::filesystem::path& dir, const CertificateAuthority& ca);
crypto::PublicKey load_ca_public_key(const std::filesystem::path& dir);
CertificateAuthority load_ca(const std::filesystem::path& dir);
void save_identity(const std::filesystem::path& dir, const Identity& id);
// `prefix` is <dir>/<org>/<subject>; expects prefix.key and prefix.cert.
Identity load_identity_prefix(const std::filesystem::path& prefix);

}  // namespace pdnsl::identity
