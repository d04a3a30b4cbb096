#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "transtrust/rng.hpp"

namespace transtrust {

inline constexpr int kPcrCount = 8;
inline constexpr std::size_t kReplayWindow = 1024;

// PCR indices covered by system-state quotes and recorded as the
// enrolment reference: 0 holds the firmware measurement, 1 the OS.
inline const std::vector<int> kStandardPcrSelection = {0, 1};

class KeyRevokedError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class OrderingViolationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class UnknownKeyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SlotOccupiedError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Signed attestation statement. Levels: 1 proves the endorsement key is
// live, 2 adds the platform state (pcr_digest), 3 adds the digest of a
// credential held in the platform's protected storage.
struct AttestationQuote {
    int level = 1;
    Nonce nonce{};
    Digest pcr_digest{};                       // zeros at level 1
    std::optional<Digest> credential_digest;   // present iff level == 3
    Digest signer_key_id{};
    Bytes signature;

    Bytes signed_bytes() const;
    Bytes encode() const;
    static std::optional<AttestationQuote> decode(ByteView data);
};

struct SealedSlot {
    std::map<int, Digest> pcr_policy;
    Bytes payload;
};

struct TpmState {
    SignKeypair endorsement;
    Bytes endorsement_cert;  // manufacturer signature over the endorsement public key
    std::map<Digest, SignKeypair> attestation_keys;
    std::array<Digest, kPcrCount> pcr_bank{};
    std::map<std::uint32_t, SealedSlot> sealed_slots;
    std::set<Digest> revoked;
    std::vector<std::pair<int, Digest>> measurement_log;
};

TpmState tpm_create(SeededRng& rng, const SignKeypair& manufacturer);

Digest pcr_extend(TpmState& tpm, int index, const Digest& measurement);
Digest pcr_digest_over(const TpmState& tpm, const std::vector<int>& selection);
std::array<Digest, kPcrCount> replay_measurement_log(const TpmState& tpm);

SignKeypair& add_attestation_key(TpmState& tpm, ByteView seed32);
void revoke_key(TpmState& tpm, const Digest& key_id);

AttestationQuote ek_prove_liveness(const TpmState& tpm, const Nonce& challenge);
AttestationQuote quote_system_state(const TpmState& tpm, const Nonce& challenge,
                                    const std::vector<int>& selection,
                                    const Digest& aik_id);
// credential attestation presumes an established platform statement, so the
// caller states whether a level-2 quote was already accepted this session.
AttestationQuote attest_credential(const TpmState& tpm, ByteView credential_bytes,
                                   const Nonce& challenge, const Digest& aik_id,
                                   bool session_has_accepted_l2);

void seal(TpmState& tpm, std::uint32_t slot, std::map<int, Digest> policy,
          Bytes payload);

enum class UnsealStatus { Ok, PolicyMismatch, SlotEmpty };

struct UnsealResult {
    UnsealStatus status = UnsealStatus::SlotEmpty;
    Bytes payload;
};

UnsealResult unseal(const TpmState& tpm, std::uint32_t slot);
UnsealStatus update_sealed_payload(TpmState& tpm, std::uint32_t slot, Bytes payload);

enum class QuoteStatus {
    Accepted,
    BadFormat,
    BadSignature,
    UnknownKey,
    KeyRevoked,
    ReplayDetected,
    IntegrityMismatch,
    CredentialMismatch,
    OrderingViolation,
};

const char* to_string(QuoteStatus status);

// Everything a verifier consults besides the quote itself. Resolvers are
// callbacks so the same checker works for principals and for peer agents.
struct QuoteCheck {
    std::function<std::optional<Bytes>(const Digest&)> resolve_public;
    std::function<bool(const Digest&)> issuer_ok;
    std::function<bool(const Digest&)> is_revoked;
    std::optional<Digest> expected_pcr_digest;
    std::optional<Digest> expected_credential_digest;
    int session_evidence = 0;  // highest level already accepted this session
};

class QuoteVerifier {
  public:
    QuoteStatus verify_quote(const AttestationQuote& quote, const QuoteCheck& check);

  private:
    void remember(const Nonce& nonce);

    std::deque<Nonce> window_;
    std::set<Nonce> seen_;
};

}  // namespace transtrust
