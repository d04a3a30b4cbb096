// Exercises the platform module: register extension against digests
// recomputed outside this codebase, measurement-log replay, quote
// issuance and verification (replay window, revocation, level ordering),
// and policy-gated sealed storage.

#include "doctest.h"
#include "transtrust/tpm.hpp"

using namespace transtrust;

namespace {

struct Platform {
    SeededRng rng{1};
    SignKeypair manufacturer;
    TpmState tpm;

    Platform() {
        manufacturer = sign_keygen(rng.next_seed());
        tpm = tpm_create(rng, manufacturer);
    }

    // Verifier view that trusts exactly the keys this module holds.
    QuoteCheck check() const {
        QuoteCheck c;
        c.resolve_public = [this](const Digest& id) -> std::optional<Bytes> {
            if (id == tpm.endorsement.key_id) return tpm.endorsement.public_key;
            auto it = tpm.attestation_keys.find(id);
            if (it == tpm.attestation_keys.end()) return std::nullopt;
            return it->second.public_key;
        };
        c.issuer_ok = [](const Digest&) { return true; };
        c.is_revoked = [this](const Digest& id) { return tpm.revoked.contains(id); };
        return c;
    }
};

}  // namespace

TEST_CASE("register extension matches recomputed chains and is order sensitive") {
    Platform p;
    Digest m1 = hash(bytes_of("measurement-1"));
    Digest m2 = hash(bytes_of("measurement-2"));

    CHECK(pcr_extend(p.tpm, 2, m1).hex() ==
          "46a4a7fde00741601b6d3e47191faccaa1eb96e7ce9ede54eeb5b2136477fa8f");
    CHECK(pcr_extend(p.tpm, 2, m2).hex() ==
          "09d43ebea87f7deda411f9d23c34261479b3a3e1830bff7462b635a88b5b1ed4");

    Platform q;
    pcr_extend(q.tpm, 2, m2);
    CHECK(pcr_extend(q.tpm, 2, m1).hex() ==
          "bb572f60825c669ccd47b6baf0cfd0a7a8f23c1263f62d46c5bc737a9163df9f");
    CHECK(p.tpm.pcr_bank[2] != q.tpm.pcr_bank[2]);

    CHECK_THROWS_AS(pcr_extend(p.tpm, kPcrCount, m1), std::out_of_range);
    CHECK_THROWS_AS(pcr_extend(p.tpm, -1, m1), std::out_of_range);
}

TEST_CASE("selection digest is independent of selection order") {
    Platform p;
    pcr_extend(p.tpm, 0, hash(bytes_of("a")));
    pcr_extend(p.tpm, 1, hash(bytes_of("b")));
    CHECK(pcr_digest_over(p.tpm, {0, 1}) == pcr_digest_over(p.tpm, {1, 0}));
    CHECK_THROWS_AS(pcr_digest_over(p.tpm, {}), std::invalid_argument);
}

TEST_CASE("measurement log replays to the live register bank") {
    Platform p;
    pcr_extend(p.tpm, 0, hash(bytes_of("boot")));
    pcr_extend(p.tpm, 1, hash(bytes_of("os")));
    pcr_extend(p.tpm, 1, hash(bytes_of("app")));
    pcr_extend(p.tpm, 5, hash(bytes_of("late")));
    CHECK(replay_measurement_log(p.tpm) == p.tpm.pcr_bank);

    // A bank mutation without a log entry no longer replays.
    p.tpm.pcr_bank[3] = hash(bytes_of("ghost"));
    CHECK(replay_measurement_log(p.tpm) != p.tpm.pcr_bank);
}

TEST_CASE("liveness quote verifies once and replays are rejected") {
    Platform p;
    QuoteVerifier verifier;
    Nonce challenge{};
    challenge[0] = 0x42;

    AttestationQuote quote = ek_prove_liveness(p.tpm, challenge);
    CHECK(quote.level == 1);
    CHECK(quote.pcr_digest.is_zero());
    CHECK(verifier.verify_quote(quote, p.check()) == QuoteStatus::Accepted);
    CHECK(verifier.verify_quote(quote, p.check()) == QuoteStatus::ReplayDetected);
}

TEST_CASE("quote encoding round-trips and mutations are caught") {
    Platform p;
    Nonce challenge = p.rng.next_nonce();
    AttestationQuote quote = ek_prove_liveness(p.tpm, challenge);
    Bytes wire = quote.encode();
    auto decoded = AttestationQuote::decode(wire);
    REQUIRE(decoded.has_value());
    CHECK(decoded->signed_bytes() == quote.signed_bytes());
    CHECK(decoded->signature == quote.signature);

    QuoteVerifier verifier;
    Bytes mutated = wire;
    mutated[1] ^= 0x01;
    auto bad = AttestationQuote::decode(mutated);
    if (bad) {
        CHECK(verifier.verify_quote(*bad, p.check()) != QuoteStatus::Accepted);
    }
    CHECK_FALSE(AttestationQuote::decode(Bytes{0x03, 0x00}).has_value());
}

TEST_CASE("system-state quotes need a held attestation key and react to revocation") {
    Platform p;
    Digest unknown = hash(bytes_of("no-such-key"));
    Nonce challenge = p.rng.next_nonce();
    CHECK_THROWS_AS(quote_system_state(p.tpm, challenge, kStandardPcrSelection, unknown),
                    UnknownKeyError);

    SignKeypair& aik = add_attestation_key(p.tpm, p.rng.next_seed());
    Digest aik_id = aik.key_id;
    QuoteVerifier verifier;
    QuoteCheck check = p.check();
    check.session_evidence = 1;
    check.expected_pcr_digest = pcr_digest_over(p.tpm, kStandardPcrSelection);

    AttestationQuote quote =
        quote_system_state(p.tpm, challenge, kStandardPcrSelection, aik_id);
    CHECK(verifier.verify_quote(quote, check) == QuoteStatus::Accepted);

    // Drift after the reference was taken shows up as an integrity mismatch.
    pcr_extend(p.tpm, 1, hash(bytes_of("rogue-module")));
    AttestationQuote drifted =
        quote_system_state(p.tpm, p.rng.next_nonce(), kStandardPcrSelection, aik_id);
    CHECK(verifier.verify_quote(drifted, check) == QuoteStatus::IntegrityMismatch);

    // Quoted before the revocation lands, verified after: the verifier-side
    // list must catch it.
    AttestationQuote pre_revocation =
        quote_system_state(p.tpm, p.rng.next_nonce(), kStandardPcrSelection, aik_id);
    revoke_key(p.tpm, aik_id);
    CHECK_THROWS_AS(quote_system_state(p.tpm, p.rng.next_nonce(),
                                       kStandardPcrSelection, aik_id),
                    KeyRevokedError);
    CHECK(verifier.verify_quote(pre_revocation, check) == QuoteStatus::KeyRevoked);
    // A nonce the verifier has already consumed outranks the revocation list.
    CHECK(verifier.verify_quote(quote, check) == QuoteStatus::ReplayDetected);
    CHECK_THROWS_AS(revoke_key(p.tpm, unknown), UnknownKeyError);
}

TEST_CASE("credential quotes demand prior system-state evidence") {
    Platform p;
    SignKeypair& aik = add_attestation_key(p.tpm, p.rng.next_seed());
    Bytes credential = bytes_of("credential-bytes");

    CHECK_THROWS_AS(
        attest_credential(p.tpm, credential, p.rng.next_nonce(), aik.key_id, false),
        OrderingViolationError);

    AttestationQuote quote =
        attest_credential(p.tpm, credential, p.rng.next_nonce(), aik.key_id, true);
    CHECK(quote.level == 3);
    REQUIRE(quote.credential_digest.has_value());
    CHECK(*quote.credential_digest == hash(credential));

    // The verifier mirrors the gate: level 3 against level-1 evidence fails.
    QuoteVerifier verifier;
    QuoteCheck check = p.check();
    check.session_evidence = 1;
    CHECK(verifier.verify_quote(quote, check) == QuoteStatus::OrderingViolation);
    check.session_evidence = 2;
    check.expected_credential_digest = hash(bytes_of("other-credential"));
    CHECK(verifier.verify_quote(quote, check) == QuoteStatus::CredentialMismatch);
    check.expected_credential_digest = hash(credential);
    CHECK(verifier.verify_quote(quote, check) == QuoteStatus::Accepted);
}

TEST_CASE("replay window forgets the oldest nonce once full") {
    Platform p;
    QuoteVerifier verifier;
    QuoteCheck check = p.check();

    Nonce first{};
    first[11] = 0x01;
    CHECK(verifier.verify_quote(ek_prove_liveness(p.tpm, first), check) ==
          QuoteStatus::Accepted);
    for (std::size_t i = 0; i < kReplayWindow; ++i) {
        CHECK(verifier.verify_quote(ek_prove_liveness(p.tpm, p.rng.next_nonce()),
                                    check) == QuoteStatus::Accepted);
    }
    // kReplayWindow fresh nonces pushed the first one out of the window.
    CHECK(verifier.verify_quote(ek_prove_liveness(p.tpm, first), check) ==
          QuoteStatus::Accepted);
}

TEST_CASE("unknown signer and bad signature are distinguished") {
    Platform p;
    QuoteVerifier verifier;
    AttestationQuote quote = ek_prove_liveness(p.tpm, p.rng.next_nonce());

    QuoteCheck blind;
    blind.resolve_public = [](const Digest&) { return std::nullopt; };
    CHECK(verifier.verify_quote(quote, blind) == QuoteStatus::UnknownKey);

    AttestationQuote forged = quote;
    forged.signature[0] ^= 0x01;
    CHECK(verifier.verify_quote(forged, p.check()) == QuoteStatus::BadSignature);

    QuoteCheck distrust = p.check();
    distrust.issuer_ok = [](const Digest&) { return false; };
    CHECK(verifier.verify_quote(quote, distrust) == QuoteStatus::BadSignature);
}

TEST_CASE("sealed storage honours its register policy") {
    Platform p;
    pcr_extend(p.tpm, 0, hash(bytes_of("fw")));
    pcr_extend(p.tpm, 1, hash(bytes_of("os")));
    std::map<int, Digest> policy{{0, p.tpm.pcr_bank[0]}, {1, p.tpm.pcr_bank[1]}};

    seal(p.tpm, 0, policy, bytes_of("ten-units"));
    CHECK_THROWS_AS(seal(p.tpm, 0, policy, bytes_of("again")), SlotOccupiedError);

    UnsealResult ok = unseal(p.tpm, 0);
    CHECK(ok.status == UnsealStatus::Ok);
    CHECK(ok.payload == bytes_of("ten-units"));
    CHECK(unseal(p.tpm, 9).status == UnsealStatus::SlotEmpty);

    CHECK(update_sealed_payload(p.tpm, 0, bytes_of("nine-units")) == UnsealStatus::Ok);
    CHECK(unseal(p.tpm, 0).payload == bytes_of("nine-units"));
    CHECK(update_sealed_payload(p.tpm, 9, {}) == UnsealStatus::SlotEmpty);

    // Any drift in a policy register makes the payload unreachable.
    pcr_extend(p.tpm, 1, hash(bytes_of("rogue-module")));
    CHECK(unseal(p.tpm, 0).status == UnsealStatus::PolicyMismatch);
    CHECK(update_sealed_payload(p.tpm, 0, bytes_of("x")) == UnsealStatus::PolicyMismatch);
}
