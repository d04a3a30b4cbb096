// Checks the crypto layer against values recomputed outside this codebase
// (SHA-256 and HMAC-SHA256 vectors) and against whole-space properties:
// key-agreement symmetry across many seeded pairs, authenticated
// encryption rejecting every single-byte mutation, and byte-exact replay
// of the deterministic stream.

#include "doctest.h"
#include "transtrust/rng.hpp"

using namespace transtrust;

TEST_CASE("sha-256 matches recomputed vectors") {
    CHECK(hash(Bytes{}).hex() ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hash(Bytes{0x00}).hex() ==
          "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d");
    CHECK(hash(Bytes{0x01}).hex() ==
          "4bf5122f344554c53bde2ebb8cd2b7e3d1600ad631c385a5d7cce23c7785459a");
}

TEST_CASE("hmac-sha256 matches a recomputed vector") {
    SharedSecret key;
    key.bytes.fill(0x0b);
    auto tag = mac(key, bytes_of("Hi There"));
    CHECK(to_hex(ByteView(tag.data(), tag.size())) ==
          "198a607eb44bfbc69903a0f1cf2bbdc5ba0aa3f3d9ae3c1c7a3b1696a0b68cf7");
    CHECK(mac_verify(key, bytes_of("Hi There"), tag));
}

TEST_CASE("mac verification rejects wrong key, message and tag") {
    SeededRng rng(11);
    SharedSecret key;
    key.bytes = rng.next_seed();
    Bytes message = rng.next_bytes(48);
    auto tag = mac(key, message);

    SharedSecret other;
    other.bytes = rng.next_seed();
    CHECK_FALSE(mac_verify(other, message, tag));

    Bytes mutated = message;
    mutated[7] ^= 0x01;
    CHECK_FALSE(mac_verify(key, mutated, tag));

    auto bad_tag = tag;
    bad_tag[0] ^= 0x01;
    CHECK_FALSE(mac_verify(key, message, bad_tag));
    CHECK_FALSE(mac_verify(key, message, Bytes{0x01, 0x02}));
}

TEST_CASE("key agreement is symmetric across one hundred seeded pairs") {
    SeededRng rng(23);
    for (int i = 0; i < 100; ++i) {
        DhKeypair a = dh_keygen(rng.next_seed());
        DhKeypair b = dh_keygen(rng.next_seed());
        auto ab = dh_derive(a, b.public_key);
        auto ba = dh_derive(b, a.public_key);
        REQUIRE(ab.has_value());
        REQUIRE(ba.has_value());
        CHECK(ab->bytes == ba->bytes);

        DhKeypair c = dh_keygen(rng.next_seed());
        auto ac = dh_derive(a, c.public_key);
        REQUIRE(ac.has_value());
        CHECK(ab->bytes != ac->bytes);
    }
}

TEST_CASE("key agreement refuses a degenerate peer share") {
    SeededRng rng(24);
    DhKeypair a = dh_keygen(rng.next_seed());
    Bytes zero_share(32, 0x00);
    CHECK_FALSE(dh_derive(a, zero_share).has_value());
}

TEST_CASE("subkey derivation separates roles") {
    SeededRng rng(29);
    SharedSecret base;
    base.bytes = rng.next_seed();
    SharedSecret x = derive_subkey(base, SecretRole::X);
    SharedSecret y = derive_subkey(base, SecretRole::Y);
    CHECK(x.role == SecretRole::X);
    CHECK(y.role == SecretRole::Y);
    CHECK(x.bytes != y.bytes);
    CHECK(x.bytes != base.bytes);
    CHECK(y.bytes != base.bytes);
    // Same base, same role: same key on both ends.
    CHECK(derive_subkey(base, SecretRole::X).bytes == x.bytes);
}

TEST_CASE("authenticated encryption round-trips and rejects every single-byte mutation") {
    SeededRng rng(31);
    SharedSecret key;
    key.bytes = rng.next_seed();
    Nonce nonce = rng.next_nonce();
    Bytes aad = bytes_of("wrapped-tau");
    Bytes message = rng.next_bytes(64);

    Bytes sealed = aead_seal(key, nonce, aad, message);
    auto opened = aead_open(key, nonce, aad, sealed);
    REQUIRE(opened.has_value());
    CHECK(*opened == message);

    for (std::size_t i = 0; i < sealed.size(); ++i) {
        Bytes mutated = sealed;
        mutated[i] ^= 0x01;
        CHECK_FALSE(aead_open(key, nonce, aad, mutated).has_value());
    }

    Nonce other_nonce = rng.next_nonce();
    CHECK_FALSE(aead_open(key, other_nonce, aad, sealed).has_value());
    CHECK_FALSE(aead_open(key, nonce, bytes_of("wrapped-ack"), sealed).has_value());

    SharedSecret other_key;
    other_key.bytes = rng.next_seed();
    CHECK_FALSE(aead_open(other_key, nonce, aad, sealed).has_value());
}

TEST_CASE("signatures verify and reject mutations") {
    SeededRng rng(37);
    SignKeypair kp = sign_keygen(rng.next_seed());
    Bytes message = rng.next_bytes(80);
    Bytes signature = sign(kp.secret, message);
    CHECK(verify(kp.public_key, message, signature));

    Bytes mutated_message = message;
    mutated_message[3] ^= 0x01;
    CHECK_FALSE(verify(kp.public_key, mutated_message, signature));

    Bytes mutated_signature = signature;
    mutated_signature[10] ^= 0x01;
    CHECK_FALSE(verify(kp.public_key, message, mutated_signature));

    SignKeypair other = sign_keygen(rng.next_seed());
    CHECK_FALSE(verify(other.public_key, message, signature));
    CHECK_FALSE(verify(kp.public_key, message, Bytes{0x01}));
    CHECK(kp.key_id == hash(kp.public_key));
}

TEST_CASE("seeded byte stream replays exactly and pins its first block") {
    SeededRng pinned(42);
    CHECK(to_hex(pinned.next_bytes(32)) ==
          "080345e8a4f7c0fd5044b95592e5a64eaa38d44ac45d3afff2869c326a100cde");
    CHECK(SeededRng(42).next_u64() == 0x080345e8a4f7c0fdULL);

    SeededRng a(7), b(7), c(8);
    Bytes left = a.next_bytes(1000);
    Bytes right = b.next_bytes(1000);
    CHECK(left == right);
    CHECK(left != c.next_bytes(1000));
}
