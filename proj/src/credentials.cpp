#include "transtrust/credentials.hpp"

#include <ostream>

namespace transtrust {

// Sealed-storage slot a dedicated subordination credential lives in.
const std::uint32_t kSigmaBackingSlot = 1;

namespace {

Bytes actor_bytes(const ActorId& actor) {
    ByteWriter w;
    w.u8(actor.kind == ActorId::Kind::Principal ? 0 : 1);
    w.lp(bytes_of(actor.name));
    w.lp(bytes_of(actor.domain));
    return w.take();
}

ActorId read_actor(ByteReader& r) {
    ActorId actor;
    actor.kind = r.u8() == 0 ? ActorId::Kind::Principal : ActorId::Kind::Agent;
    Bytes name = r.lp();
    Bytes domain = r.lp();
    actor.name.assign(name.begin(), name.end());
    actor.domain.assign(domain.begin(), domain.end());
    return actor;
}

SharedSecret as_mac_key(const std::array<std::uint8_t, 32>& secret) {
    SharedSecret key;
    key.bytes = secret;
    return key;
}

}  // namespace

Bytes DomainCredential::canonical_bytes() const {
    ByteWriter w;
    w.lp(actor_bytes(agent));
    w.lp(actor_bytes(principal));
    w.u32(serial);
    w.lp(ByteView(secret.data(), secret.size()));
    return w.take();
}

std::array<std::uint8_t, 32> credential_mac(const DomainCredential& cred,
                                            const Nonce& challenge) {
    return mac(as_mac_key(cred.secret), ByteView(challenge.data(), challenge.size()));
}

const char* to_string(EnrolmentMode mode) {
    switch (mode) {
        case EnrolmentMode::PrincipalControlled: return "principal_controlled";
        case EnrolmentMode::Independent: return "independent";
    }
    return "?";
}

Bytes TrustCredential::certified_bytes() const {
    ByteWriter w;
    w.lp(tpm_key_id.view());
    w.lp(actor_bytes(subject));
    return w.take();
}

Bytes TrustCredential::full_bytes() const {
    ByteWriter w;
    w.lp(tpm_key_id.view());
    w.lp(actor_bytes(subject));
    w.u8(mode == EnrolmentMode::PrincipalControlled ? 0 : 1);
    w.lp(issuer_key_id.view());
    w.lp(issuer_cert);
    return w.take();
}

std::optional<TrustCredential> TrustCredential::parse_full(ByteView data) {
    try {
        ByteReader r(data);
        TrustCredential tau;
        Bytes key_id = r.lp();
        Bytes subject = r.lp();
        tau.mode = r.u8() == 0 ? EnrolmentMode::PrincipalControlled
                               : EnrolmentMode::Independent;
        Bytes issuer_id = r.lp();
        tau.issuer_cert = r.lp();
        r.expect_end();
        if (key_id.size() != 32 || issuer_id.size() != 32) {
            return std::nullopt;
        }
        std::copy(key_id.begin(), key_id.end(), tau.tpm_key_id.bytes.begin());
        std::copy(issuer_id.begin(), issuer_id.end(), tau.issuer_key_id.bytes.begin());
        ByteReader sr(subject);
        tau.subject = read_actor(sr);
        sr.expect_end();
        return tau;
    } catch (const WireError&) {
        return std::nullopt;
    }
}

const char* to_string(SigmaScope scope) {
    switch (scope) {
        case SigmaScope::Dominator: return "dominator";
        case SigmaScope::Subordinate: return "subordinate";
    }
    return "?";
}

const char* to_string(SigmaBacking backing) {
    switch (backing) {
        case SigmaBacking::Tau: return "tau";
        case SigmaBacking::DedicatedGamma: return "dedicated_gamma";
    }
    return "?";
}

Bytes SubordinationCredential::certified_bytes() const {
    ByteWriter w;
    w.lp(actor_bytes(holder));
    w.lp(actor_bytes(issuer));
    w.u8(scope == SigmaScope::Dominator ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(granted_services.size()));
    for (const std::string& service : granted_services) {
        w.lp(bytes_of(service));
    }
    w.u8(backing == SigmaBacking::Tau ? 0 : 1);
    if (backing == SigmaBacking::Tau) {
        w.lp(backing_tau_key_id.view());
    } else {
        w.u32(backing_gamma_serial);
        w.lp(backing_gamma_digest.view());
    }
    return w.take();
}

Bytes SubordinationCredential::full_bytes() const {
    ByteWriter w;
    w.lp(certified_bytes());
    w.lp(issuer_key_id.view());
    w.lp(issuer_cert);
    return w.take();
}

std::optional<SubordinationCredential> SubordinationCredential::parse_full(
    ByteView data) {
    try {
        ByteReader outer(data);
        Bytes certified = outer.lp();
        Bytes issuer_id = outer.lp();
        Bytes cert = outer.lp();
        outer.expect_end();
        if (issuer_id.size() != 32) {
            return std::nullopt;
        }

        ByteReader r(certified);
        SubordinationCredential sigma;
        Bytes holder = r.lp();
        Bytes issuer = r.lp();
        sigma.scope = r.u8() == 0 ? SigmaScope::Dominator : SigmaScope::Subordinate;
        std::uint32_t count = r.u32();
        for (std::uint32_t i = 0; i < count; ++i) {
            Bytes service = r.lp();
            sigma.granted_services.insert(std::string(service.begin(), service.end()));
        }
        sigma.backing = r.u8() == 0 ? SigmaBacking::Tau : SigmaBacking::DedicatedGamma;
        if (sigma.backing == SigmaBacking::Tau) {
            Bytes key = r.lp();
            if (key.size() != 32) return std::nullopt;
            std::copy(key.begin(), key.end(), sigma.backing_tau_key_id.bytes.begin());
        } else {
            sigma.backing_gamma_serial = r.u32();
            Bytes digest = r.lp();
            if (digest.size() != 32) return std::nullopt;
            std::copy(digest.begin(), digest.end(),
                      sigma.backing_gamma_digest.bytes.begin());
        }
        r.expect_end();

        ByteReader hr(holder);
        sigma.holder = read_actor(hr);
        hr.expect_end();
        ByteReader ir(issuer);
        sigma.issuer = read_actor(ir);
        ir.expect_end();
        std::copy(issuer_id.begin(), issuer_id.end(),
                  sigma.issuer_key_id.bytes.begin());
        sigma.issuer_cert = cert;
        return sigma;
    } catch (const WireError&) {
        return std::nullopt;
    }
}

DomainRegistry::DomainRegistry(ActorId owner, SignKeypair authority)
    : owner_(std::move(owner)), authority_(std::move(authority)) {}

DomainCredential DomainRegistry::issue_domain_credential(const ActorId& agent,
                                                         SeededRng& rng) {
    if (agent.domain != owner_.name) {
        throw DomainError("issue: agent belongs to a different domain");
    }
    for (const auto& [serial, cred] : gamma_index_) {
        if (cred.agent.name == agent.name && !dedicated_serials_.contains(serial)) {
            throw DomainError("issue: agent already holds a domain credential");
        }
    }
    DomainCredential cred;
    cred.agent = agent;
    cred.principal = owner_;
    rng.fill(cred.secret);
    cred.serial = next_serial_++;
    gamma_index_[cred.serial] = cred;
    return cred;
}

DomainCredential DomainRegistry::issue_dedicated_credential(const ActorId& agent,
                                                            SeededRng& rng) {
    if (agent.domain != owner_.name) {
        throw DomainError("issue: agent belongs to a different domain");
    }
    DomainCredential cred;
    cred.agent = agent;
    cred.principal = owner_;
    rng.fill(cred.secret);
    cred.serial = next_serial_++;
    gamma_index_[cred.serial] = cred;
    dedicated_serials_.insert(cred.serial);
    return cred;
}

TrustCredential DomainRegistry::enroll_trust_credential(
    TpmState& tpm, const ActorId& agent, EnrolmentMode mode, SeededRng& rng,
    const SignKeypair& manufacturer) {
    const SignKeypair& aik = add_attestation_key(tpm, rng.next_seed());

    TrustCredential tau;
    tau.tpm_key_id = aik.key_id;
    tau.subject = agent;
    tau.mode = mode;
    const SignKeypair& issuer =
        mode == EnrolmentMode::PrincipalControlled ? authority_ : manufacturer;
    tau.issuer_key_id = issuer.key_id;
    tau.issuer_cert = sign(issuer.secret, tau.certified_bytes());

    if (mode == EnrolmentMode::PrincipalControlled) {
        std::optional<std::uint32_t> serial;
        for (const auto& [s, cred] : gamma_index_) {
            if (cred.agent.name == agent.name && !dedicated_serials_.contains(s)) {
                serial = s;
                break;
            }
        }
        if (!serial) {
            throw DomainError("enroll: no domain credential on file for agent");
        }
        tau_to_gamma_[tau.tpm_key_id] = *serial;
    }

    tau_index_[tau.tpm_key_id] = tau;
    reference_pcrs_[agent.name] = pcr_digest_over(tpm, kStandardPcrSelection);
    return tau;
}

SubordinationCredential DomainRegistry::issue_subordination_credential(
    const ActorId& holder, SigmaScope scope, std::set<std::string> services,
    SigmaBacking backing, TpmState* holder_tpm, SeededRng& rng) {
    SubordinationCredential sigma;
    sigma.holder = holder;
    sigma.issuer = owner_;
    sigma.scope = scope;
    sigma.granted_services = std::move(services);
    sigma.backing = backing;

    if (scope == SigmaScope::Dominator) {
        bool has_gamma = false;
        for (const auto& [serial, cred] : gamma_index_) {
            if (cred.agent.name == holder.name && !dedicated_serials_.contains(serial)) {
                has_gamma = true;
                break;
            }
        }
        if (!has_gamma) {
            throw DomainError("issue sigma: dominator lacks a domain credential");
        }
    }

    if (backing == SigmaBacking::Tau) {
        const TrustCredential* tau = nullptr;
        for (const auto& [key_id, candidate] : tau_index_) {
            if (candidate.subject.name == holder.name) {
                tau = &candidate;
                break;
            }
        }
        if (!tau) {
            throw DomainError("issue sigma: no trust credential on file for holder");
        }
        sigma.backing_tau_key_id = tau->tpm_key_id;
    } else {
        if (!holder_tpm) {
            throw DomainError("issue sigma: dedicated backing needs the holder's module");
        }
        DomainCredential dedicated = issue_dedicated_credential(holder, rng);
        sigma.backing_gamma_serial = dedicated.serial;
        sigma.backing_gamma_digest = hash(dedicated.canonical_bytes());
        std::map<int, Digest> policy;
        for (int index : kStandardPcrSelection) {
            policy[index] = holder_tpm->pcr_bank[static_cast<std::size_t>(index)];
        }
        seal(*holder_tpm, kSigmaBackingSlot, std::move(policy),
             dedicated.canonical_bytes());
    }

    sigma.issuer_key_id = authority_.key_id;
    sigma.issuer_cert = sign(authority_.secret, sigma.certified_bytes());
    sigma_index_[holder.name] = sigma;
    return sigma;
}

bool DomainRegistry::authenticate_generic(const DomainCredential& presented,
                                          const Nonce& challenge) const {
    auto tag = credential_mac(presented, challenge);
    return verify_gamma_response(presented.serial, challenge,
                                 ByteView(tag.data(), tag.size()));
}

bool DomainRegistry::verify_gamma_response(std::uint32_t serial,
                                           const Nonce& challenge,
                                           ByteView tag) const {
    auto it = gamma_index_.find(serial);
    if (it == gamma_index_.end()) {
        return false;
    }
    return mac_verify(as_mac_key(it->second.secret),
                      ByteView(challenge.data(), challenge.size()), tag);
}

std::optional<std::uint32_t> DomainRegistry::associate(const Digest& tau_key_id) const {
    auto it = tau_to_gamma_.find(tau_key_id);
    if (it == tau_to_gamma_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const TrustCredential* DomainRegistry::find_tau(const Digest& tau_key_id) const {
    auto it = tau_index_.find(tau_key_id);
    return it == tau_index_.end() ? nullptr : &it->second;
}

const DomainCredential* DomainRegistry::find_gamma(std::uint32_t serial) const {
    auto it = gamma_index_.find(serial);
    return it == gamma_index_.end() ? nullptr : &it->second;
}

bool DomainRegistry::claim_serial(std::uint32_t serial, const Digest& tau_key_id) {
    auto it = seen_serials_.find(serial);
    if (it == seen_serials_.end()) {
        seen_serials_[serial] = tau_key_id;
        return true;
    }
    return it->second == tau_key_id;
}

void DomainRegistry::set_reference_digest(const std::string& actor,
                                          const Digest& digest) {
    reference_pcrs_[actor] = digest;
}

std::optional<Digest> DomainRegistry::reference_digest(const std::string& actor) const {
    auto it = reference_pcrs_.find(actor);
    if (it == reference_pcrs_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void DomainRegistry::dump(std::ostream& out) const {
    out << "registry " << owner_.name << "\n";
    for (const auto& [serial, cred] : gamma_index_) {
        out << "gamma serial=" << serial << " agent=" << cred.agent.name
            << " dedicated=" << (dedicated_serials_.contains(serial) ? 1 : 0) << "\n";
    }
    for (const auto& [key_id, tau] : tau_index_) {
        out << "tau key=" << key_id.hex() << " subject=" << tau.subject.name
            << " mode=" << to_string(tau.mode);
        auto linked = associate(key_id);
        if (linked) {
            out << " linked_serial=" << *linked;
        }
        out << "\n";
    }
    for (const auto& [holder, sigma] : sigma_index_) {
        out << "sigma holder=" << holder << " scope=" << to_string(sigma.scope)
            << " backing=" << to_string(sigma.backing) << " services=";
        bool first = true;
        for (const std::string& service : sigma.granted_services) {
            if (!first) out << ",";
            out << service;
            first = false;
        }
        out << "\n";
    }
    for (const auto& [actor, digest] : reference_pcrs_) {
        out << "reference actor=" << actor << " digest=" << digest.hex() << "\n";
    }
    for (const Digest& key_id : acl_) {
        out << "acl key=" << key_id.hex() << "\n";
    }
    for (const auto& [serial, key_id] : seen_serials_) {
        out << "seen serial=" << serial << " key=" << key_id.hex() << "\n";
    }
    out << "group_secret=" << (group_secret_ ? "present" : "absent") << "\n";
}

DomainCredential clone_credential(const DomainCredential& original,
                                  const ActorId& new_holder) {
    DomainCredential copy = original;
    copy.agent = new_holder;
    return copy;
}

}  // namespace transtrust
