#include "pdnsl/identity.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pdnsl::identity {

const char* role_name(Role role) {
    switch (role) {
        case Role::peer: return "peer";
        case Role::orderer: return "orderer";
        case Role::admin: return "admin";
        case Role::client: return "client";
    }
    return "unknown";
}

std::optional<Role> role_from_name(const std::string& name) {
    if (name == "peer") return Role::peer;
    if (name == "orderer") return Role::orderer;
    if (name == "admin") return Role::admin;
    if (name == "client") return Role::client;
    return std::nullopt;
}

Bytes Certificate::signed_payload() const {
    ByteWriter w;
    w.str(subject);
    w.str(org);
    w.u8(static_cast<uint8_t>(role));
    w.u32(static_cast<uint32_t>(public_key.size()));
    w.raw(public_key.data(), public_key.size());
    return w.take();
}

Bytes Certificate::serialize() const {
    ByteWriter w;
    w.raw(signed_payload());
    w.bytes(ca_signature);
    return w.take();
}

std::optional<Certificate> Certificate::deserialize(const Bytes& data) {
    try {
        ByteReader r(data);
        Certificate cert;
        cert.subject = r.str();
        cert.org = r.str();
        uint8_t role = r.u8();
        if (role > static_cast<uint8_t>(Role::client)) return std::nullopt;
        cert.role = static_cast<Role>(role);
        Bytes key = r.bytes();
        if (key.size() != crypto::kPublicKeyBytes) return std::nullopt;
        std::copy(key.begin(), key.end(), cert.public_key.begin());
        cert.ca_signature = r.bytes();
        r.expect_done("certificate");
        return cert;
    } catch (const ShortRead&) {
        return std::nullopt;
    }
}

std::string Certificate::to_hex() const { return hex_encode(serialize()); }

std::optional<Certificate> Certificate::from_hex(const std::string& hex) {
    auto raw = hex_decode(hex);
    if (!raw) return std::nullopt;
    return deserialize(*raw);
}

CertificateAuthority CertificateAuthority::create() {
    return CertificateAuthority(crypto::SigningKey::generate());
}

CertificateAuthority CertificateAuthority::from_seed(const crypto::Seed& seed) {
    return CertificateAuthority(crypto::SigningKey::from_seed(seed));
}

Certificate CertificateAuthority::issue(const std::string& subject, const std::string& org,
                                        Role role, const crypto::PublicKey& subject_key) {
    if (!issued_.emplace(subject, org).second)
        throw DuplicateSubject("already issued: " + subject + "@" + org);
    Certificate cert;
    cert.subject = subject;
    cert.org = org;
    cert.role = role;
    cert.public_key = subject_key;
    cert.ca_signature = crypto::sign(key_, cert.signed_payload());
    return cert;
}

Identity CertificateAuthority::issue_identity(const std::string& subject, const std::string& org,
                                              Role role) {
    Identity id;
    id.signing_key = crypto::SigningKey::generate();
    id.certificate = issue(subject, org, role, id.signing_key.public_key);
    return id;
}

bool verify_certificate(const Certificate& cert, const crypto::PublicKey& ca_public_key) noexcept {
    try {
        return crypto::verify(ca_public_key, cert.signed_payload(), cert.ca_signature);
    } catch (...) {
        return false;
    }
}

Bytes sign(const Identity& id, const uint8_t* payload, size_t len) {
    return crypto::sign(id.signing_key, payload, len);
}

Bytes sign(const Identity& id, const Bytes& payload) {
    return sign(id, payload.data(), payload.size());
}

bool verify_signature(const Certificate& cert, const Bytes& payload, const Bytes& sig) noexcept {
    return crypto::verify(cert.public_key, payload, sig);
}

bool evaluate_policy(const Policy& policy, const std::vector<SignatureEntry>& signatures,
                     const Bytes& payload, const crypto::PublicKey& ca_public_key,
                     const std::vector<std::string>& consortium_orgs,
                     const CertVerifier& cert_verifier) {
    std::set<std::pair<std::string, std::string>> counted;
    for (const auto& entry : signatures) {
        if (policy.required_role && entry.cert.role != *policy.required_role) continue;
        if (!org_satisfies(policy, entry.cert.org, consortium_orgs)) continue;
        bool cert_ok = cert_verifier ? cert_verifier(entry.cert)
                                     : verify_certificate(entry.cert, ca_public_key);
        if (!cert_ok) continue;
        if (!verify_signature(entry.cert, payload, entry.signature)) continue;
        counted.emplace(entry.cert.subject, entry.cert.org);
        if (counted.size() >= policy.min_signatures) return true;
    }
    return policy.min_signatures == 0;
}

bool org_satisfies(const Policy& policy, const std::string& org,
                   const std::vector<std::string>& consortium_orgs) {
    const auto& pool = policy.orgs.empty() ? consortium_orgs : policy.orgs;
    return std::find(pool.begin(), pool.end(), org) != pool.end();
}

void save_hex_file(const std::filesystem::path& path, const Bytes& data) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << hex_encode(data) << "\n";
}

Bytes load_hex_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string hex;
    in >> hex;
    auto raw = hex_decode(hex);
    if (!raw) throw std::runtime_error("invalid hex in " + path.string());
    return *raw;
}

void save_ca(const std::filesystem::path& dir, const CertificateAuthority& ca) {
    auto seed = ca.signing_key().seed();
    save_hex_file(dir / "ca.key", Bytes(seed.begin(), seed.end()));
    save_hex_file(dir / "ca.pub",
                  Bytes(ca.public_key().begin(), ca.public_key().end()));
}

crypto::PublicKey load_ca_public_key(const std::filesystem::path& dir) {
    Bytes raw = load_hex_file(dir / "ca.pub");
    if (raw.size() != crypto::kPublicKeyBytes)
        throw std::runtime_error("bad CA public key length");
    crypto::PublicKey pub;
    std::copy(raw.begin(), raw.end(), pub.begin());
    return pub;
}

CertificateAuthority load_ca(const std::filesystem::path& dir) {
    Bytes raw = load_hex_file(dir / "ca.key");
    if (raw.size() != crypto::kSeedBytes) throw std::runtime_error("bad CA key length");
    crypto::Seed seed;
    std::copy(raw.begin(), raw.end(), seed.begin());
    return CertificateAuthority::from_seed(seed);
}

void save_identity(const std::filesystem::path& dir, const Identity& id) {
    auto prefix = dir / id.certificate.org / id.certificate.subject;
    auto seed = id.signing_key.seed();
    save_hex_file(prefix.string() + ".key", Bytes(seed.begin(), seed.end()));
    save_hex_file(prefix.string() + ".cert", id.certificate.serialize());
}

Identity load_identity_prefix(const std::filesystem::path& prefix) {
    Bytes seed_raw = load_hex_file(prefix.string() + ".key");
    if (seed_raw.size() != crypto::kSeedBytes)
        throw std::runtime_error("bad key length in " + prefix.string() + ".key");
    crypto::Seed seed;
    std::copy(seed_raw.begin(), seed_raw.end(), seed.begin());

    Identity id;
    id.signing_key = crypto::SigningKey::from_seed(seed);
    auto cert = Certificate::deserialize(load_hex_file(prefix.string() + ".cert"));
    if (!cert) throw std::runtime_error("bad certificate in " + prefix.string() + ".cert");
    id.certificate = *cert;
    return id;
}

}  // namespace pdnsl::identity
