#include "transtrust/tpm.hpp"

#include <algorithm>

namespace transtrust {

Bytes AttestationQuote::signed_bytes() const {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(level));
    w.lp(ByteView(nonce.data(), nonce.size()));
    w.lp(pcr_digest.view());
    Digest cred = credential_digest.value_or(Digest{});
    w.lp(cred.view());
    return w.take();
}

Bytes AttestationQuote::encode() const {
    ByteWriter w;
    w.raw(signed_bytes());
    w.lp(signer_key_id.view());
    w.lp(signature);
    return w.take();
}

std::optional<AttestationQuote> AttestationQuote::decode(ByteView data) {
    try {
        ByteReader r(data);
        AttestationQuote q;
        q.level = r.u8();
        Bytes nonce = r.lp();
        Bytes pcr = r.lp();
        Bytes cred = r.lp();
        Bytes key_id = r.lp();
        q.signature = r.lp();
        r.expect_end();
        if (q.level < 1 || q.level > 3 || nonce.size() != q.nonce.size() ||
            pcr.size() != 32 || cred.size() != 32 || key_id.size() != 32) {
            return std::nullopt;
        }
        std::copy(nonce.begin(), nonce.end(), q.nonce.begin());
        std::copy(pcr.begin(), pcr.end(), q.pcr_digest.bytes.begin());
        std::copy(key_id.begin(), key_id.end(), q.signer_key_id.bytes.begin());
        Digest cred_digest;
        std::copy(cred.begin(), cred.end(), cred_digest.bytes.begin());
        if (q.level == 3) {
            q.credential_digest = cred_digest;
        } else if (!cred_digest.is_zero()) {
            return std::nullopt;
        }
        return q;
    } catch (const WireError&) {
        return std::nullopt;
    }
}

TpmState tpm_create(SeededRng& rng, const SignKeypair& manufacturer) {
    TpmState tpm;
    tpm.endorsement = sign_keygen(rng.next_seed());
    tpm.endorsement_cert = sign(manufacturer.secret, tpm.endorsement.public_key);
    return tpm;
}

Digest pcr_extend(TpmState& tpm, int index, const Digest& measurement) {
    if (index < 0 || index >= kPcrCount) {
        throw std::out_of_range("pcr_extend: index outside bank");
    }
    Bytes material;
    append(material, tpm.pcr_bank[index].view());
    append(material, measurement.view());
    tpm.pcr_bank[index] = hash(material);
    tpm.measurement_log.emplace_back(index, measurement);
    return tpm.pcr_bank[index];
}

Digest pcr_digest_over(const TpmState& tpm, const std::vector<int>& selection) {
    if (selection.empty()) {
        throw std::invalid_argument("pcr_digest_over: empty selection");
    }
    std::vector<int> sorted = selection;
    std::sort(sorted.begin(), sorted.end());
    Bytes material;
    for (int index : sorted) {
        if (index < 0 || index >= kPcrCount) {
            throw std::out_of_range("pcr_digest_over: index outside bank");
        }
        append(material, tpm.pcr_bank[index].view());
    }
    return hash(material);
}

std::array<Digest, kPcrCount> replay_measurement_log(const TpmState& tpm) {
    std::array<Digest, kPcrCount> bank{};
    for (const auto& [index, measurement] : tpm.measurement_log) {
        Bytes material;
        append(material, bank[index].view());
        append(material, measurement.view());
        bank[index] = hash(material);
    }
    return bank;
}

SignKeypair& add_attestation_key(TpmState& tpm, ByteView seed32) {
    SignKeypair kp = sign_keygen(seed32);
    Digest id = kp.key_id;
    return tpm.attestation_keys.emplace(id, std::move(kp)).first->second;
}

void revoke_key(TpmState& tpm, const Digest& key_id) {
    if (!tpm.attestation_keys.contains(key_id)) {
        throw UnknownKeyError("revoke_key: key not held by this module");
    }
    tpm.revoked.insert(key_id);
}

namespace {

const SignKeypair& signing_key(const TpmState& tpm, const Digest& aik_id) {
    auto it = tpm.attestation_keys.find(aik_id);
    if (it == tpm.attestation_keys.end()) {
        throw UnknownKeyError("quote: attestation key not held by this module");
    }
    if (tpm.revoked.contains(aik_id)) {
        throw KeyRevokedError("quote: attestation key revoked");
    }
    return it->second;
}

AttestationQuote finish(AttestationQuote q, const SignKeypair& key) {
    q.signer_key_id = key.key_id;
    q.signature = sign(key.secret, q.signed_bytes());
    return q;
}

}  // namespace

AttestationQuote ek_prove_liveness(const TpmState& tpm, const Nonce& challenge) {
    AttestationQuote q;
    q.level = 1;
    q.nonce = challenge;
    return finish(std::move(q), tpm.endorsement);
}

AttestationQuote quote_system_state(const TpmState& tpm, const Nonce& challenge,
                                    const std::vector<int>& selection,
                                    const Digest& aik_id) {
    const SignKeypair& key = signing_key(tpm, aik_id);
    AttestationQuote q;
    q.level = 2;
    q.nonce = challenge;
    q.pcr_digest = pcr_digest_over(tpm, selection);
    return finish(std::move(q), key);
}

AttestationQuote attest_credential(const TpmState& tpm, ByteView credential_bytes,
                                   const Nonce& challenge, const Digest& aik_id,
                                   bool session_has_accepted_l2) {
    if (!session_has_accepted_l2) {
        throw OrderingViolationError(
            "attest_credential: no accepted system-state quote in this session");
    }
    const SignKeypair& key = signing_key(tpm, aik_id);
    AttestationQuote q;
    q.level = 3;
    q.nonce = challenge;
    q.pcr_digest = pcr_digest_over(tpm, kStandardPcrSelection);
    q.credential_digest = hash(credential_bytes);
    return finish(std::move(q), key);
}

void seal(TpmState& tpm, std::uint32_t slot, std::map<int, Digest> policy,
          Bytes payload) {
    if (tpm.sealed_slots.contains(slot)) {
        throw SlotOccupiedError("seal: slot already holds a payload");
    }
    tpm.sealed_slots[slot] = SealedSlot{std::move(policy), std::move(payload)};
}

namespace {

bool policy_satisfied(const TpmState& tpm, const SealedSlot& slot) {
    for (const auto& [index, expected] : slot.pcr_policy) {
        if (tpm.pcr_bank[static_cast<std::size_t>(index)] != expected) {
            return false;
        }
    }
    return true;
}

}  // namespace

UnsealResult unseal(const TpmState& tpm, std::uint32_t slot) {
    auto it = tpm.sealed_slots.find(slot);
    if (it == tpm.sealed_slots.end()) {
        return {UnsealStatus::SlotEmpty, {}};
    }
    if (!policy_satisfied(tpm, it->second)) {
        return {UnsealStatus::PolicyMismatch, {}};
    }
    return {UnsealStatus::Ok, it->second.payload};
}

UnsealStatus update_sealed_payload(TpmState& tpm, std::uint32_t slot, Bytes payload) {
    auto it = tpm.sealed_slots.find(slot);
    if (it == tpm.sealed_slots.end()) {
        return UnsealStatus::SlotEmpty;
    }
    if (!policy_satisfied(tpm, it->second)) {
        return UnsealStatus::PolicyMismatch;
    }
    it->second.payload = std::move(payload);
    return UnsealStatus::Ok;
}

const char* to_string(QuoteStatus status) {
    switch (status) {
        case QuoteStatus::Accepted: return "accepted";
        case QuoteStatus::BadFormat: return "bad_format";
        case QuoteStatus::BadSignature: return "bad_signature";
        case QuoteStatus::UnknownKey: return "unknown_key";
        case QuoteStatus::KeyRevoked: return "key_revoked";
        case QuoteStatus::ReplayDetected: return "replay_detected";
        case QuoteStatus::IntegrityMismatch: return "integrity_mismatch";
        case QuoteStatus::CredentialMismatch: return "credential_mismatch";
        case QuoteStatus::OrderingViolation: return "ordering_violation";
    }
    return "?";
}

void QuoteVerifier::remember(const Nonce& nonce) {
    window_.push_back(nonce);
    seen_.insert(nonce);
    while (window_.size() > kReplayWindow) {
        seen_.erase(window_.front());
        window_.pop_front();
    }
}

QuoteStatus QuoteVerifier::verify_quote(const AttestationQuote& quote,
                                        const QuoteCheck& check) {
    if (quote.level < 1 || quote.level > 3) {
        return QuoteStatus::BadFormat;
    }
    if ((quote.level == 3) != quote.credential_digest.has_value()) {
        return QuoteStatus::BadFormat;
    }
    // A higher assertion is meaningless without the one below it.
    if (quote.level > check.session_evidence + 1) {
        return QuoteStatus::OrderingViolation;
    }
    if (seen_.contains(quote.nonce)) {
        return QuoteStatus::ReplayDetected;
    }
    if (check.is_revoked && check.is_revoked(quote.signer_key_id)) {
        return QuoteStatus::KeyRevoked;
    }
    std::optional<Bytes> public_key;
    if (check.resolve_public) {
        public_key = check.resolve_public(quote.signer_key_id);
    }
    if (!public_key) {
        return QuoteStatus::UnknownKey;
    }
    if (check.issuer_ok && !check.issuer_ok(quote.signer_key_id)) {
        return QuoteStatus::BadSignature;
    }
    if (!verify(*public_key, quote.signed_bytes(), quote.signature)) {
        return QuoteStatus::BadSignature;
    }
    if (quote.level >= 2 && check.expected_pcr_digest &&
        quote.pcr_digest != *check.expected_pcr_digest) {
        return QuoteStatus::IntegrityMismatch;
    }
    if (quote.level == 3 && check.expected_credential_digest &&
        *quote.credential_digest != *check.expected_credential_digest) {
        return QuoteStatus::CredentialMismatch;
    }
    remember(quote.nonce);
    return QuoteStatus::Accepted;
}

}  // namespace transtrust
