#pragma once

#include <iosfwd>
#include <map>
#include <set>

#include "transtrust/tpm.hpp"

namespace transtrust {

class DomainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Sealed-storage slot a dedicated subordination credential lives in.
extern const std::uint32_t kSigmaBackingSlot;

struct ActorId {
    enum class Kind { Principal, Agent };

    Kind kind = Kind::Agent;
    std::string name;
    std::string domain;  // owning principal's name; empty for principals

    bool operator==(const ActorId&) const = default;
};

// Symmetric domain credential. Holder and registry share the secret, so
// either side can impersonate the other and copies are undetectable from
// the credential alone -- clone handling lives in the registry.
struct DomainCredential {
    ActorId agent;
    ActorId principal;
    std::array<std::uint8_t, 32> secret{};
    std::uint32_t serial = 0;

    Bytes canonical_bytes() const;
};

std::array<std::uint8_t, 32> credential_mac(const DomainCredential& cred,
                                            const Nonce& challenge);

enum class EnrolmentMode { PrincipalControlled, Independent };
const char* to_string(EnrolmentMode mode);

// Asymmetric trust credential bound to a platform attestation key.
struct TrustCredential {
    Digest tpm_key_id;
    ActorId subject;
    Digest issuer_key_id;
    Bytes issuer_cert;  // signature over certified_bytes()
    EnrolmentMode mode = EnrolmentMode::PrincipalControlled;

    Bytes certified_bytes() const;
    Bytes full_bytes() const;  // carries the subject; used for cross-domain pledges
    static std::optional<TrustCredential> parse_full(ByteView data);
};

enum class SigmaScope { Dominator, Subordinate };
const char* to_string(SigmaScope scope);

enum class SigmaBacking { Tau, DedicatedGamma };
const char* to_string(SigmaBacking backing);

// Subordination credential. When backed by a dedicated domain credential
// the issuer embeds that credential's digest, so a dominator can check a
// level-3 quote without holding a registry copy.
struct SubordinationCredential {
    ActorId holder;
    ActorId issuer;
    SigmaScope scope = SigmaScope::Subordinate;
    std::set<std::string> granted_services;
    SigmaBacking backing = SigmaBacking::DedicatedGamma;
    Digest backing_tau_key_id{};          // Tau backing
    std::uint32_t backing_gamma_serial = 0;  // DedicatedGamma backing
    Digest backing_gamma_digest{};           // DedicatedGamma backing
    Digest issuer_key_id;
    Bytes issuer_cert;

    Bytes certified_bytes() const;
    Bytes full_bytes() const;
    static std::optional<SubordinationCredential> parse_full(ByteView data);
};

// Per-principal state: issued credentials, trust anchors and access policy.
class DomainRegistry {
  public:
    DomainRegistry() = default;
    DomainRegistry(ActorId owner, SignKeypair authority);

    const ActorId& owner() const { return owner_; }
    const SignKeypair& authority() const { return authority_; }

    DomainCredential issue_domain_credential(const ActorId& agent, SeededRng& rng);
    DomainCredential issue_dedicated_credential(const ActorId& agent, SeededRng& rng);

    TrustCredential enroll_trust_credential(TpmState& tpm, const ActorId& agent,
                                            EnrolmentMode mode, SeededRng& rng,
                                            const SignKeypair& manufacturer);

    SubordinationCredential issue_subordination_credential(
        const ActorId& holder, SigmaScope scope, std::set<std::string> services,
        SigmaBacking backing, TpmState* holder_tpm, SeededRng& rng);

    // Challenge-response check of a presented domain credential.
    bool authenticate_generic(const DomainCredential& presented,
                              const Nonce& challenge) const;
    bool verify_gamma_response(std::uint32_t serial, const Nonce& challenge,
                               ByteView tag) const;

    std::optional<std::uint32_t> associate(const Digest& tau_key_id) const;
    const TrustCredential* find_tau(const Digest& tau_key_id) const;
    const DomainCredential* find_gamma(std::uint32_t serial) const;

    // First-come-first-served claim of a serial by a platform key. Returns
    // false when the serial is already bound to a different key.
    bool claim_serial(std::uint32_t serial, const Digest& tau_key_id);

    void add_to_acl(const Digest& tau_key_id) { acl_.insert(tau_key_id); }
    bool acl_contains(const Digest& tau_key_id) const { return acl_.contains(tau_key_id); }

    void set_reference_digest(const std::string& actor, const Digest& digest);
    std::optional<Digest> reference_digest(const std::string& actor) const;

    void set_group_secret(const SharedSecret& secret) { group_secret_ = secret; }
    const std::optional<SharedSecret>& group_secret() const { return group_secret_; }

    const std::map<std::uint32_t, DomainCredential>& gammas() const { return gamma_index_; }
    const std::map<Digest, TrustCredential>& taus() const { return tau_index_; }
    const std::map<std::string, SubordinationCredential>& sigmas() const { return sigma_index_; }

    void dump(std::ostream& out) const;

  private:
    ActorId owner_;
    SignKeypair authority_;
    std::map<std::uint32_t, DomainCredential> gamma_index_;
    std::set<std::uint32_t> dedicated_serials_;
    std::map<Digest, TrustCredential> tau_index_;
    std::map<Digest, std::uint32_t> tau_to_gamma_;
    std::map<std::string, SubordinationCredential> sigma_index_;
    std::map<std::string, Digest> reference_pcrs_;
    std::set<Digest> acl_;
    std::map<std::uint32_t, Digest> seen_serials_;  // serial -> first claimant key
    std::optional<SharedSecret> group_secret_;
    std::uint32_t next_serial_ = 1;
};

// Copies a credential byte for byte into another holder's hands. The copy
// is indistinguishable on the wire; only registry-side policy can tell.
DomainCredential clone_credential(const DomainCredential& original,
                                  const ActorId& new_holder);

}  // namespace transtrust
