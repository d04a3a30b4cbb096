#include "transtrust/world.hpp"

namespace transtrust {

Digest firmware_measurement() {
    return hash(bytes_of("trusted-firmware"));
}

Digest os_measurement() {
    return hash(bytes_of("trusted-os"));
}

World::World(std::uint64_t seed) : rng(seed), manufacturer(sign_keygen(rng.next_seed())) {
    register_key(manufacturer.key_id, manufacturer.public_key);
}

PrincipalState& World::principal(const std::string& name) {
    auto it = principals.find(name);
    if (it == principals.end()) {
        throw std::runtime_error("world: unknown principal " + name);
    }
    return it->second;
}

AgentState& World::agent(const std::string& name) {
    auto it = agents.find(name);
    if (it == agents.end()) {
        throw std::runtime_error("world: unknown agent " + name);
    }
    return it->second;
}

Session& World::session(std::uint64_t id) {
    auto it = sessions.find(id);
    if (it == sessions.end()) {
        throw std::runtime_error("world: unknown session");
    }
    return it->second;
}

Session& World::make_session(const std::string& initiator, const std::string& responder,
                             const SharedSecret& transport) {
    Session session;
    session.id = next_session_++;
    session.initiator = initiator;
    session.responder = responder;
    session.transport = transport;
    return sessions.emplace(session.id, std::move(session)).first->second;
}

Session* World::find_session(const std::string& x, const std::string& y) {
    for (auto& [id, session] : sessions) {
        if ((session.initiator == x && session.responder == y) ||
            (session.initiator == y && session.responder == x)) {
            return &session;
        }
    }
    return nullptr;
}

PrincipalState& World::add_principal(const std::string& name) {
    PrincipalState state;
    state.id = ActorId{ActorId::Kind::Principal, name, ""};
    SignKeypair authority = sign_keygen(rng.next_seed());
    register_key(authority.key_id, authority.public_key);
    state.registry = DomainRegistry(state.id, std::move(authority));
    return principals.emplace(name, std::move(state)).first->second;
}

AgentState& World::add_agent(const std::string& name, const std::string& domain) {
    AgentState state;
    state.id = ActorId{ActorId::Kind::Agent, name, domain};
    state.tpm = tpm_create(rng, manufacturer);
    register_key(state.tpm.endorsement.key_id, state.tpm.endorsement.public_key);
    pcr_extend(state.tpm, 0, firmware_measurement());
    pcr_extend(state.tpm, 1, os_measurement());
    return agents.emplace(name, std::move(state)).first->second;
}

void World::enroll_gamma(const std::string& agent_name) {
    AgentState& state = agent(agent_name);
    PrincipalState& owner = principal(state.id.domain);
    state.gamma = owner.registry.issue_domain_credential(state.id, rng);
}

void World::enroll_tau(const std::string& agent_name, EnrolmentMode mode) {
    AgentState& state = agent(agent_name);
    PrincipalState& owner = principal(state.id.domain);
    state.tau = owner.registry.enroll_trust_credential(state.tpm, state.id, mode, rng,
                                                       manufacturer);
    state.owner_authority_public = owner.registry.authority().public_key;
    register_key(state.tau->tpm_key_id,
                 state.tpm.attestation_keys.at(state.tau->tpm_key_id).public_key);
    owner.registry.add_to_acl(state.tau->tpm_key_id);
}

void World::register_key(const Digest& key_id, ByteView public_key) {
    key_directory_[key_id] = Bytes(public_key.begin(), public_key.end());
}

std::optional<Bytes> World::resolve_public(const Digest& key_id) const {
    auto it = key_directory_.find(key_id);
    if (it == key_directory_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<Digest> World::reference_digest(const std::string& actor_name) const {
    auto agent_it = agents.find(actor_name);
    if (agent_it == agents.end()) {
        return std::nullopt;
    }
    auto principal_it = principals.find(agent_it->second.id.domain);
    if (principal_it == principals.end()) {
        return std::nullopt;
    }
    return principal_it->second.registry.reference_digest(actor_name);
}

QuoteCheck World::base_quote_check() const {
    QuoteCheck check;
    check.resolve_public = [this](const Digest& key_id) { return resolve_public(key_id); };
    check.is_revoked = [this](const Digest& key_id) { return is_revoked(key_id); };
    return check;
}

ObservationLog* World::observer(const std::string& actor_name) {
    if (auto it = agents.find(actor_name); it != agents.end()) {
        return &it->second.obs;
    }
    if (auto it = principals.find(actor_name); it != principals.end()) {
        return &it->second.obs;
    }
    return nullptr;
}

}  // namespace transtrust
