#pragma once

#include <array>
#include <compare>
#include <optional>

#include "transtrust/bytes.hpp"

namespace transtrust {

struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;
    ByteView view() const { return ByteView(bytes.data(), bytes.size()); }
    std::string hex() const { return to_hex(view()); }
    bool is_zero() const;
};

Digest hash(ByteView message);

// Signature identities. key_id doubles as the stable reference other
// parties use to name a key without holding its public part.
struct SignKeypair {
    Bytes secret;      // 64 octets
    Bytes public_key;  // 32 octets
    Digest key_id;     // hash(public_key)
};

SignKeypair sign_keygen(ByteView seed32);
Bytes sign(ByteView secret, ByteView message);
// Returns false for invalid or malformed signatures, never throws.
bool verify(ByteView public_key, ByteView message, ByteView signature);

struct DhKeypair {
    std::array<std::uint8_t, 32> secret{};
    std::array<std::uint8_t, 32> public_key{};
};

DhKeypair dh_keygen(ByteView seed32);

enum class SecretRole { Transport, X, Y };
const char* to_string(SecretRole role);

struct SharedSecret {
    std::array<std::uint8_t, 32> bytes{};
    SecretRole role = SecretRole::Transport;

    bool operator==(const SharedSecret&) const = default;
    ByteView view() const { return ByteView(bytes.data(), bytes.size()); }
};

// Empty result signals a degenerate exchange (all-zero shared point).
std::optional<SharedSecret> dh_derive(const DhKeypair& own, ByteView peer_public);
SharedSecret derive_subkey(const SharedSecret& base, SecretRole role);

using Nonce = std::array<std::uint8_t, 12>;

Bytes aead_seal(const SharedSecret& key, const Nonce& nonce, ByteView aad,
                ByteView plaintext);
std::optional<Bytes> aead_open(const SharedSecret& key, const Nonce& nonce,
                               ByteView aad, ByteView ciphertext);

std::array<std::uint8_t, 32> mac(const SharedSecret& key, ByteView message);
bool mac_verify(const SharedSecret& key, ByteView message, ByteView tag);

}  // namespace transtrust
