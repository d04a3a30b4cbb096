#pragma once

#include "transtrust/world.hpp"

namespace transtrust {

// Shared step budget: a run that exceeds it ends with a timeout outcome.
struct StepBudget {
    std::size_t used = 0;
    std::size_t limit = 64;

    bool spend() { return used++ < limit; }
    bool exhausted() const { return used > limit; }
};

inline constexpr std::size_t kDefaultStepBudget = 64;

std::uint64_t send_plain(World& world, const std::string& from, const std::string& to,
                         MsgKind kind, Bytes payload);
std::uint64_t send_sealed(World& world, Session& session, const std::string& from,
                          const std::string& to, MsgKind kind, ByteView plaintext);

// Opens a sealed envelope at its recipient: settles the transcript entry,
// records the plaintext in the recipient's observation log on success.
OpenResult receive_sealed(World& world, Session& session, const Envelope& env);
// Plain envelopes settle as accepted and are logged as-is.
void receive_plain(World& world, const Envelope& env);

enum class AttestPolicy { None, InitiatorOnly, Mutual };

struct ChannelSpec {
    std::string initiator;
    std::string responder;
    AttestPolicy policy = AttestPolicy::None;
    bool gamma_logon = false;  // initiator authenticates by domain credential
};

enum class ChannelFailure {
    None,
    AuthenticationFailure,
    BadSignature,
    UnknownKey,
    KeyRevoked,
    IntegrityMismatch,
    Replay,
    OrderingViolation,
    GammaRejected,
    Timeout,
};

const char* to_string(ChannelFailure failure);
ChannelFailure failure_from_quote(QuoteStatus status);

// Challenges handed out during establishment, one per quote so the
// replay window never sees a nonce twice. The extra nonce stays unused
// by the setup itself and is available for one post-channel attestation
// inside the session.
struct SetupChallenges {
    Nonce init_l1{};
    Nonce init_l2{};
    Nonce resp_l1{};
    Nonce resp_l2{};
    Nonce gamma{};
    Nonce group{};
    Nonce extra{};
};

struct ChannelResult {
    bool ok = false;
    std::uint64_t session_id = 0;
    ChannelFailure failure = ChannelFailure::None;
    SetupChallenges challenges;
};

ChannelResult run_channel_setup(World& world, const ChannelSpec& spec,
                                StepBudget& budget);

// Attestation payloads carry the verification material alongside the
// quote, so a verifier needs no prior knowledge of the prover's keys.
Bytes build_l1_payload(const TpmState& tpm, const Nonce& challenge);
Bytes build_l2_payload(const AgentState& agent, const Nonce& challenge);
Bytes build_l3_payload(const AttestationQuote& quote, ByteView context);

QuoteStatus check_l1_payload(World& world, QuoteVerifier& verifier, ByteView payload,
                             const Nonce& expected_challenge, Session& session,
                             const std::string& prover);
QuoteStatus check_l2_payload(World& world, QuoteVerifier& verifier, ByteView payload,
                             const Nonce& expected_challenge, Session& session,
                             const std::string& prover);
QuoteStatus check_l3_payload(World& world, QuoteVerifier& verifier, ByteView payload,
                             const Nonce& expected_challenge, Session& session,
                             const std::string& prover,
                             const std::optional<Digest>& expected_credential_digest,
                             Bytes* context_out);

}  // namespace transtrust
