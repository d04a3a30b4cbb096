#pragma once

#include <deque>
#include <iosfwd>
#include <map>
#include <set>

#include "transtrust/crypto.hpp"

namespace transtrust {

enum class MsgKind {
    ChannelHello,
    ChannelAttest,
    ChannelAccept,
    GammaAuth,
    QuoteL1,
    QuoteL2,
    QuoteL3,
    TauPresent,
    SigmaPresent,
    WrappedTau,
    AuthRequest,
    AuthAck,
    WrappedAck,
    ServiceRequest,
    ServiceGrant,
    ServiceDeny,
};

const char* to_string(MsgKind kind);
std::optional<MsgKind> kind_from_string(std::string_view name);

struct Envelope {
    std::uint64_t seq = 0;  // assigned by the fabric, strictly increasing
    std::string from;
    std::string to;
    std::optional<std::uint64_t> session_id;  // empty before key agreement
    MsgKind kind = MsgKind::ChannelHello;
    std::uint64_t counter = 0;  // per-direction hop counter, 0 when plain
    Bytes payload;
};

class NonceReuseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Simulation-wide tripwire: every AEAD seal registers its (key, nonce)
// pair here, so an accidental nonce reuse aborts the run loudly instead
// of silently weakening the model.
class NonceGuard {
  public:
    void check(const SharedSecret& key, const Nonce& nonce);

  private:
    std::set<Bytes> used_;
};

// Point-to-point hop protection agreed during channel establishment.
struct Session {
    std::uint64_t id = 0;
    std::string initiator;
    std::string responder;
    SharedSecret transport;
    std::array<std::uint64_t, 2> send_counter{0, 0};
    std::array<std::uint64_t, 2> recv_counter{0, 0};
    std::map<std::string, int> evidence;  // endpoint -> highest accepted quote level
    std::map<std::string, Digest> l2_signer;  // endpoint -> key behind its accepted L2
    std::optional<std::uint32_t> gamma_serial;  // serial logged on over this session

    int direction_of(const std::string& sender) const;
    int evidence_of(const std::string& endpoint) const {
        auto it = evidence.find(endpoint);
        return it == evidence.end() ? 0 : it->second;
    }
    void raise_evidence(const std::string& endpoint, int level) {
        int& current = evidence[endpoint];
        if (level > current) current = level;
    }
};

enum class OpenStatus { Ok, Replay, AuthenticationFailure };

struct OpenResult {
    OpenStatus status = OpenStatus::AuthenticationFailure;
    Bytes plaintext;
};

Bytes session_seal(Session& session, NonceGuard& guard, const std::string& from,
                   const std::string& to, MsgKind kind, std::uint64_t& counter_out,
                   ByteView plaintext);
OpenResult session_open(Session& session, const Envelope& env);

struct AdversaryAction {
    enum class Kind { Tamper, Drop, Duplicate, CloneCredential };

    Kind kind = Kind::Tamper;
    std::optional<MsgKind> match_kind;     // applies to every occurrence
    std::optional<std::uint64_t> match_seq;
    std::size_t byte_index = 0;            // Tamper
    std::string agent;                     // CloneCredential target

    static std::optional<AdversaryAction> parse(std::string_view text);
    std::string describe() const;
};

struct TranscriptEntry {
    Envelope env;           // payload as it left the fabric (post-adversary)
    bool accepted = false;
    bool settled = false;   // delivery outcome recorded
    std::string reject_reason;
    std::string adversary_note;
    std::string phase;
    std::int64_t delivered_at = -1;
};

struct Transcript {
    std::uint64_t seed = 0;
    std::vector<TranscriptEntry> entries;

    void write(std::ostream& out) const;
    std::string text() const;
};

// Delivery outcome for one fabric step.
enum class StepKind { Delivered, Dropped, Idle };

struct FabricStep {
    StepKind kind = StepKind::Idle;
    Envelope env;
};

// Global FIFO message queue. One envelope is delivered per step; the
// adversary script is applied while an envelope is in flight.
class Fabric {
  public:
    void install(std::vector<AdversaryAction> script);
    void set_phase(std::string phase) { phase_ = std::move(phase); }
    const std::string& phase() const { return phase_; }

    std::uint64_t send(Envelope env);
    FabricStep deliver_next();

    void settle(std::uint64_t seq, bool accepted, const std::string& reason = "");

    bool idle() const { return queue_.empty(); }
    Transcript& transcript() { return transcript_; }
    const Transcript& transcript() const { return transcript_; }

  private:
    TranscriptEntry* entry_for(std::uint64_t seq);
    const AdversaryAction* match(const Envelope& env, AdversaryAction::Kind kind) const;

    std::deque<Envelope> queue_;
    std::set<std::uint64_t> no_reduplicate_;
    std::vector<AdversaryAction> script_;
    Transcript transcript_;
    std::string phase_ = "setup";
    std::uint64_t next_seq_ = 1;
    std::int64_t delivery_clock_ = 0;
};

}  // namespace transtrust
