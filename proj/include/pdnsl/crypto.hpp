#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "pdnsl/bytes.hpp"

// Thin wrappers over libsodium: SHA-256 digests, Ed25519 signatures
// (32-byte seeds/public keys, deterministic signing) and the IETF
// ChaCha20-Poly1305 AEAD used for column encryption.
namespace pdnsl::crypto {

inline constexpr size_t kDigestBytes = 32;
inline constexpr size_t kSeedBytes = 32;
inline constexpr size_t kPublicKeyBytes = 32;
inline constexpr size_t kSecretKeyBytes = 64;
inline constexpr size_t kSignatureBytes = 64;
inline constexpr size_t kAeadKeyBytes = 32;
inline constexpr size_t kAeadNonceBytes = 12;
inline constexpr size_t kAeadTagBytes = 16;

using Digest32 = std::array<uint8_t, kDigestBytes>;
using Seed = std::array<uint8_t, kSeedBytes>;
using PublicKey = std::array<uint8_t, kPublicKeyBytes>;
using AeadKey = std::array<uint8_t, kAeadKeyBytes>;
using AeadNonce = std::array<uint8_t, kAeadNonceBytes>;

// Idempotent; every other call does it lazily, exposed for explicit startup.
void init();

Digest32 sha256(const uint8_t* data, size_t len);
Digest32 sha256(const Bytes& data);
Digest32 sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string digest_hex(const Digest32& d);
std::optional<Digest32> digest_from_hex(const std::string& hex);

struct SigningKey {
    std::array<uint8_t, kSecretKeyBytes> secret{};
    PublicKey public_key{};

    static SigningKey from_seed(const Seed& seed);
    static SigningKey generate();
    Seed seed() const;  // the 32-byte seed embedded in the secret key
};

Bytes sign(const SigningKey& key, const uint8_t* msg, size_t len);
Bytes sign(const SigningKey& key, const Bytes& msg);
bool verify(const PublicKey& pub, const uint8_t* msg, size_t len, const Bytes& sig) noexcept;
bool verify(const PublicKey& pub, const Bytes& msg, const Bytes& sig) noexcept;

// ciphertext = body || 16-byte tag
Bytes aead_encrypt(const AeadKey& key, const AeadNonce& nonce, const Bytes& plaintext,
                   const Bytes& aad);
std::optional<Bytes> aead_decrypt(const AeadKey& key, const AeadNonce& nonce,
                                  const Bytes& ciphertext, const Bytes& aad);

Bytes random_bytes(size_t n);

}  // namespace pdnsl::crypto
