#include "transtrust/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

namespace transtrust {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) {
            throw std::runtime_error("sodium_init failed");
        }
    });
}

}  // namespace

bool Digest::is_zero() const {
    for (std::uint8_t b : bytes) {
        if (b != 0) return false;
    }
    return true;
}

Digest hash(ByteView message) {
    ensure_sodium();
    Digest out;
    crypto_hash_sha256(out.bytes.data(), message.data(), message.size());
    return out;
}

SignKeypair sign_keygen(ByteView seed32) {
    ensure_sodium();
    if (seed32.size() != crypto_sign_SEEDBYTES) {
        throw std::invalid_argument("sign_keygen: seed must be 32 octets");
    }
    SignKeypair kp;
    kp.secret.resize(crypto_sign_SECRETKEYBYTES);
    kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret.data(), seed32.data());
    kp.key_id = hash(kp.public_key);
    return kp;
}

Bytes sign(ByteView secret, ByteView message) {
    ensure_sodium();
    if (secret.size() != crypto_sign_SECRETKEYBYTES) {
        throw std::invalid_argument("sign: bad secret key length");
    }
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                         secret.data());
    return sig;
}

bool verify(ByteView public_key, ByteView message, ByteView signature) {
    ensure_sodium();
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES ||
        signature.size() != crypto_sign_BYTES) {
        return false;
    }
    return crypto_sign_verify_detached(signature.data(), message.data(),
                                       message.size(), public_key.data()) == 0;
}

DhKeypair dh_keygen(ByteView seed32) {
    ensure_sodium();
    if (seed32.size() != 32) {
        throw std::invalid_argument("dh_keygen: seed must be 32 octets");
    }
    DhKeypair kp;
    std::memcpy(kp.secret.data(), seed32.data(), 32);
    crypto_scalarmult_base(kp.public_key.data(), kp.secret.data());
    return kp;
}

const char* to_string(SecretRole role) {
    switch (role) {
        case SecretRole::Transport: return "transport";
        case SecretRole::X: return "X";
        case SecretRole::Y: return "Y";
    }
    return "?";
}

std::optional<SharedSecret> dh_derive(const DhKeypair& own, ByteView peer_public) {
    ensure_sodium();
    if (peer_public.size() != 32) {
        return std::nullopt;
    }
    SharedSecret out;
    if (crypto_scalarmult(out.bytes.data(), own.secret.data(), peer_public.data()) != 0) {
        return std::nullopt;
    }
    // Hash the raw point together with both public shares so the transport
    // key does not depend on which side computed it.
    Bytes mix;
    append(mix, bytes_of("transtrust/dh"));
    append(mix, ByteView(out.bytes.data(), out.bytes.size()));
    Bytes lo(own.public_key.begin(), own.public_key.end());
    Bytes hi(peer_public.begin(), peer_public.end());
    if (hi < lo) std::swap(lo, hi);
    append(mix, lo);
    append(mix, hi);
    out.bytes = hash(mix).bytes;
    out.role = SecretRole::Transport;
    return out;
}

SharedSecret derive_subkey(const SharedSecret& base, SecretRole role) {
    Bytes msg = bytes_of("transtrust/subkey/");
    append(msg, bytes_of(to_string(role)));
    SharedSecret out;
    out.bytes = mac(base, msg);
    out.role = role;
    return out;
}

Bytes aead_seal(const SharedSecret& key, const Nonce& nonce, ByteView aad,
                ByteView plaintext) {
    ensure_sodium();
    Bytes out(plaintext.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
    unsigned long long out_len = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(
        out.data(), &out_len, plaintext.data(), plaintext.size(), aad.data(),
        aad.size(), nullptr, nonce.data(), key.bytes.data());
    out.resize(out_len);
    return out;
}

std::optional<Bytes> aead_open(const SharedSecret& key, const Nonce& nonce,
                               ByteView aad, ByteView ciphertext) {
    ensure_sodium();
    if (ciphertext.size() < crypto_aead_chacha20poly1305_ietf_ABYTES) {
        return std::nullopt;
    }
    Bytes out(ciphertext.size() - crypto_aead_chacha20poly1305_ietf_ABYTES);
    unsigned long long out_len = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(
            out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
            aad.data(), aad.size(), nonce.data(), key.bytes.data()) != 0) {
        return std::nullopt;
    }
    out.resize(out_len);
    return out;
}

std::array<std::uint8_t, 32> mac(const SharedSecret& key, ByteView message) {
    ensure_sodium();
    std::array<std::uint8_t, 32> tag{};
    crypto_auth_hmacsha256(tag.data(), message.data(), message.size(),
                           key.bytes.data());
    return tag;
}

bool mac_verify(const SharedSecret& key, ByteView message, ByteView tag) {
    ensure_sodium();
    if (tag.size() != 32) return false;
    return crypto_auth_hmacsha256_verify(tag.data(), message.data(),
                                         message.size(), key.bytes.data()) == 0;
}

}  // namespace transtrust
