#pragma once

#include "transtrust/channels.hpp"
#include "transtrust/credentials.hpp"

namespace transtrust {

// Plaintext an actor has read off the fabric, by envelope seq. The privacy
// checks scan these logs rather than trusting the protocol code.
struct ObservationLog {
    std::vector<std::pair<std::uint64_t, Bytes>> entries;

    void record(std::uint64_t seq, ByteView plaintext) {
        entries.emplace_back(seq, Bytes(plaintext.begin(), plaintext.end()));
    }
};

struct AgentState {
    ActorId id;
    TpmState tpm;
    std::optional<DomainCredential> gamma;
    std::optional<DomainCredential> dedicated_gamma;
    std::optional<TrustCredential> tau;
    std::optional<SubordinationCredential> sigma;
    std::optional<SharedSecret> group_secret;
    Bytes owner_authority_public;  // provisioned at enrolment
    QuoteVerifier verifier;
    ObservationLog obs;
};

struct PrincipalState {
    ActorId id;
    DomainRegistry registry;
    QuoteVerifier verifier;
    ObservationLog obs;
};

class World {
  public:
    explicit World(std::uint64_t seed);

    SeededRng rng;
    Fabric fabric;
    NonceGuard nonce_guard;
    SignKeypair manufacturer;
    std::map<std::string, AgentState> agents;
    std::map<std::string, PrincipalState> principals;
    std::map<std::uint64_t, Session> sessions;
    std::set<Digest> revoked_keys;  // published revocations, consulted by verifiers

    PrincipalState& principal(const std::string& name);
    AgentState& agent(const std::string& name);
    bool has_agent(const std::string& name) const { return agents.contains(name); }
    Session& session(std::uint64_t id);
    Session& make_session(const std::string& initiator, const std::string& responder,
                          const SharedSecret& transport);
    Session* find_session(const std::string& x, const std::string& y);

    PrincipalState& add_principal(const std::string& name);
    // Creates the platform module and runs the measured boot.
    AgentState& add_agent(const std::string& name, const std::string& domain);

    void enroll_gamma(const std::string& agent_name);
    void enroll_tau(const std::string& agent_name, EnrolmentMode mode);

    void register_key(const Digest& key_id, ByteView public_key);
    std::optional<Bytes> resolve_public(const Digest& key_id) const;
    std::optional<Digest> reference_digest(const std::string& actor_name) const;
    bool is_revoked(const Digest& key_id) const { return revoked_keys.contains(key_id); }
    void publish_revocation(const Digest& key_id) { revoked_keys.insert(key_id); }

    // Verification-key and certificate resolvers shared by all verifiers.
    QuoteCheck base_quote_check() const;

    ObservationLog* observer(const std::string& actor_name);

  private:
    std::map<Digest, Bytes> key_directory_;
    std::uint64_t next_session_ = 1;
};

// Measurements every platform extends during boot.
Digest firmware_measurement();
Digest os_measurement();

}  // namespace transtrust
