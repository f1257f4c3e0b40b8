#include "pdnsl/crypto.hpp"

#include <sodium.h>

#include <mutex>
#include <stdexcept>

namespace pdnsl::crypto {

void init() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

Digest32 sha256(const uint8_t* data, size_t len) {
    init();
    Digest32 out;
    crypto_hash_sha256(out.data(), data, len);
    return out;
}

Digest32 sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

Digest32 sha256(std::string_view data) {
    return sha256(reinterpret_cast<const uint8_t*>(data.data()), data.size());
}

std::string digest_hex(const Digest32& d) { return hex_encode(d.data(), d.size()); }

std::string sha256_hex(std::string_view data) { return digest_hex(sha256(data)); }

std::optional<Digest32> digest_from_hex(const std::string& hex) {
    auto raw = hex_decode(hex);
    if (!raw || raw->size() != kDigestBytes) return std::nullopt;
    Digest32 out;
    std::copy(raw->begin(), raw->end(), out.begin());
    return out;
}

SigningKey SigningKey::from_seed(const Seed& seed) {
    init();
    SigningKey key;
    crypto_sign_seed_keypair(key.public_key.data(), key.secret.data(), seed.data());
    return key;
}

SigningKey SigningKey::generate() {
    init();
    SigningKey key;
    crypto_sign_keypair(key.public_key.data(), key.secret.data());
    return key;
}

Seed SigningKey::seed() const {
    Seed s;
    crypto_sign_ed25519_sk_to_seed(s.data(), secret.data());
    return s;
}

Bytes sign(const SigningKey& key, const uint8_t* msg, size_t len) {
    init();
    Bytes sig(kSignatureBytes);
    crypto_sign_detached(sig.data(), nullptr, msg, len, key.secret.data());
    return sig;
}

Bytes sign(const SigningKey& key, const Bytes& msg) { return sign(key, msg.data(), msg.size()); }

bool verify(const PublicKey& pub, const uint8_t* msg, size_t len, const Bytes& sig) noexcept {
    if (sig.size() != kSignatureBytes) return false;
    return crypto_sign_verify_detached(sig.data(), msg, len, pub.data()) == 0;
}

bool verify(const PublicKey& pub, const Bytes& msg, const Bytes& sig) noexcept {
    return verify(pub, msg.data(), msg.size(), sig);
}

Bytes aead_encrypt(const AeadKey& key, const AeadNonce& nonce, const Bytes& plaintext,
                   const Bytes& aad) {
    init();
    Bytes out(plaintext.size() + kAeadTagBytes);
    unsigned long long out_len = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(),
                                              plaintext.size(), aad.data(), aad.size(), nullptr,
                                              nonce.data(), key.data());
    out.resize(out_len);
    return out;
}

std::optional<Bytes> aead_decrypt(const AeadKey& key, const AeadNonce& nonce,
                                  const Bytes& ciphertext, const Bytes& aad) {
    init();
    if (ciphertext.size() < kAeadTagBytes) return std::nullopt;
    Bytes out(ciphertext.size() - kAeadTagBytes);
    unsigned long long out_len = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, ciphertext.data(),
                                                  ciphertext.size(), aad.data(), aad.size(),
                                                  nonce.data(), key.data()) != 0)
        return std::nullopt;
    out.resize(out_len);
    return out;
}

Bytes random_bytes(size_t n) {
    init();
    Bytes out(n);
    randombytes_buf(out.data(), out.size());
    return out;
}

}  // namespace pdnsl::crypto
