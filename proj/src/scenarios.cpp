#include "transtrust/scenarios.hpp"

namespace transtrust {

namespace {

SharedSecret fresh_secret(World& world) {
    SharedSecret secret;
    secret.bytes = world.rng.next_seed();
    return secret;
}

void seal_running_total(AgentState& agent, std::uint64_t total) {
    std::map<int, Digest> policy{{0, agent.tpm.pcr_bank[0]}, {1, agent.tpm.pcr_bank[1]}};
    ByteWriter w;
    w.u64(total);
    seal(agent.tpm, 0, std::move(policy), w.take());
}

void build_prepaid(World& world, const ScenarioConfig& config) {
    world.add_principal(cast::kMno);
    AgentState& phone = world.add_agent(cast::kPhone, cast::kMno);
    world.enroll_gamma(cast::kPhone);
    world.enroll_tau(cast::kPhone, config.enrolment);

    if (config.restriction_variant == RestrictionVariant::SharedSecret) {
        SharedSecret group = fresh_secret(world);
        world.principal(cast::kMno).registry.set_group_secret(group);
        phone.group_secret = group;
    }
    seal_running_total(phone, config.prepaid_total);

    if (config.has_clone_action()) {
        const std::string target = config.clone_target();
        if (!world.has_agent(target)) {
            throw ConfigError("clone_credential target '" + target +
                              "' is not an enrolled agent");
        }
        AgentState& intruder = world.add_agent(cast::kIntruder, cast::kMno);
        if (config.enrolment == EnrolmentMode::PrincipalControlled) {
            world.enroll_gamma(cast::kIntruder);
        }
        world.enroll_tau(cast::kIntruder, config.enrolment);
        if (config.restriction_variant == RestrictionVariant::SharedSecret) {
            intruder.group_secret = phone.group_secret;
        }
    }

    if (config.rogue_boot) {
        // Post-enrolment software change: the recorded reference no longer
        // matches what the platform will quote.
        pcr_extend(phone.tpm, 1, hash(bytes_of("rogue-module")));
    }
}

ScenarioResult run_prepaid(World& world, const ScenarioConfig& config) {
    ScenarioResult result;
    result.scenario = ScenarioKind::Prepaid;

    AgentState& phone = world.agent(cast::kPhone);
    result.prepaid_initial = read_prepaid_total(world);

    for (std::uint32_t units : config.purchases) {
        StepBudget budget;
        RestrictionRequest request{cast::kMno,    cast::kPhone,
                                   *phone.gamma,  phone.tau,
                                   config.restriction_variant,
                                   "network-access", units};
        AccessDecision decision = run_restriction(world, request, budget);
        result.purchase_log.push_back({units, decision});
        result.steps_used += budget.used;
    }
    if (!result.purchase_log.empty()) {
        result.decision = result.purchase_log.back().decision;
    } else {
        result.decision = AccessDecision::deny(phone.id, DenyReason::Policy);
    }

    if (config.has_clone_action()) {
        AgentState& victim = world.agent(config.clone_target());
        AgentState& intruder = world.agent(cast::kIntruder);
        DomainCredential cloned = clone_credential(*victim.gamma, intruder.id);
        StepBudget budget;
        RestrictionRequest attack{cast::kMno, cast::kIntruder, cloned, intruder.tau,
                                  config.restriction_variant, "network-access",
                                  std::nullopt};
        AccessDecision verdict = run_restriction(world, attack, budget);
        result.honest_decision = result.decision;
        result.decision = verdict;
        result.steps_used += budget.used;
    }

    result.prepaid_final = read_prepaid_total(world);
    return result;
}

void build_bonding(World& world, const ScenarioConfig& config) {
    world.add_principal(cast::kMno);
    AgentState& phone = world.add_agent(cast::kPhone, cast::kMno);
    world.enroll_gamma(cast::kPhone);
    world.enroll_tau(cast::kPhone, EnrolmentMode::PrincipalControlled);

    // The accessory has no domain credential of its own; only a platform
    // key on file, plus whatever its subordination credential carries.
    AgentState& camera = world.add_agent(cast::kCamera, cast::kMno);
    world.enroll_tau(cast::kCamera, EnrolmentMode::Independent);

    DomainRegistry& registry = world.principal(cast::kMno).registry;
    phone.sigma = registry.issue_subordination_credential(
        phone.id, SigmaScope::Dominator, {}, SigmaBacking::Tau, &phone.tpm, world.rng);
    camera.sigma = registry.issue_subordination_credential(
        camera.id, SigmaScope::Subordinate, {config.bonded_service},
        config.sigma_backing, &camera.tpm, world.rng);

    if (config.foreign_dominator) {
        world.add_principal(cast::kForeignMno);
        AgentState& foreign = world.add_agent(cast::kForeignPhone, cast::kForeignMno);
        world.enroll_gamma(cast::kForeignPhone);
        world.enroll_tau(cast::kForeignPhone, EnrolmentMode::PrincipalControlled);
        foreign.sigma =
            world.principal(cast::kForeignMno)
                .registry.issue_subordination_credential(foreign.id,
                                                         SigmaScope::Dominator, {},
                                                         SigmaBacking::Tau,
                                                         &foreign.tpm, world.rng);
    }

    if (config.revoke_backing) {
        world.publish_revocation(camera.tau->tpm_key_id);
    }
}

ScenarioResult run_bonding(World& world, const ScenarioConfig& config) {
    ScenarioResult result;
    result.scenario = ScenarioKind::Bonding;

    std::string dominator =
        config.foreign_dominator ? cast::kForeignPhone : cast::kPhone;
    std::string service = config.requested_service.empty() ? config.bonded_service
                                                           : config.requested_service;
    StepBudget budget;
    SubordinationRequest request{cast::kMno, dominator, cast::kCamera, service,
                                 config.subordination_variant};
    result.decision = run_subordination(world, request, budget);
    result.steps_used = budget.used;
    return result;
}

void build_pos(World& world, const ScenarioConfig& config) {
    (void)config;
    world.add_principal(cast::kMno);
    AgentState& buyer = world.add_agent(cast::kBuyer, cast::kMno);
    world.enroll_gamma(cast::kBuyer);
    world.enroll_tau(cast::kBuyer, EnrolmentMode::PrincipalControlled);

    world.add_principal(cast::kOwner);
    AgentState& pos = world.add_agent(cast::kPos, cast::kOwner);
    world.enroll_gamma(cast::kPos);
    world.enroll_tau(cast::kPos, EnrolmentMode::PrincipalControlled);
    (void)buyer;
    (void)pos;

    // Standing session between the two principals, provisioned off-fabric.
    world.make_session(cast::kMno, cast::kOwner, fresh_secret(world));
}

// Delivers whatever is still queued, opening each envelope at its
// recipient so the transcript settles.
void drain_fabric(World& world, std::size_t cap) {
    while (!world.fabric.idle() && cap-- > 0) {
        FabricStep step = world.fabric.deliver_next();
        if (step.kind != StepKind::Delivered) continue;
        if (step.env.session_id) {
            receive_sealed(world, world.session(*step.env.session_id), step.env);
        } else {
            receive_plain(world, step.env);
        }
    }
}

ScenarioResult run_pos(World& world, const ScenarioConfig& config) {
    ScenarioResult result;
    result.scenario = ScenarioKind::Pos;

    AgentState& buyer = world.agent(cast::kBuyer);
    StepBudget budget;
    TranspositionRequest request{cast::kMno,  cast::kBuyer, cast::kOwner,
                                 cast::kPos,  config.privacy, config.step_order,
                                 config.fresh_secondary_auth};
    TranspositionOutcome outcome = run_transposition(world, request, budget);
    result.transposition = outcome;
    result.steps_used = budget.used;

    // Settlement: the good is delivered only on a completed transposition.
    world.fabric.set_phase("settlement");
    Session* channel = world.find_session(cast::kPos, cast::kBuyer);
    if (outcome.completed && channel) {
        send_sealed(world, *channel, cast::kPos, cast::kBuyer, MsgKind::ServiceGrant,
                    bytes_of("vending-item"));
    } else if (channel) {
        send_sealed(world, *channel, cast::kPos, cast::kBuyer, MsgKind::ServiceDeny,
                    bytes_of("not_completed"));
    } else {
        send_plain(world, cast::kPos, cast::kBuyer, MsgKind::ServiceDeny,
                   bytes_of("not_completed"));
    }
    drain_fabric(world, 8);

    result.decision = outcome.completed
                          ? AccessDecision::grant(buyer.id, Privilege::Base)
                          : AccessDecision::deny(buyer.id, DenyReason::Policy);
    return result;
}

}  // namespace

void build_scenario_world(World& world, const ScenarioConfig& config) {
    switch (config.scenario) {
        case ScenarioKind::Prepaid: build_prepaid(world, config); break;
        case ScenarioKind::Bonding: build_bonding(world, config); break;
        case ScenarioKind::Pos: build_pos(world, config); break;
    }
}

ScenarioResult run_scenario(World& world, const ScenarioConfig& config) {
    world.fabric.transcript().seed = config.seed;
    world.fabric.install(config.adversary_actions());
    build_scenario_world(world, config);
    switch (config.scenario) {
        case ScenarioKind::Prepaid: return run_prepaid(world, config);
        case ScenarioKind::Bonding: return run_bonding(world, config);
        case ScenarioKind::Pos: return run_pos(world, config);
    }
    throw std::runtime_error("unreachable scenario kind");
}

std::uint64_t read_prepaid_total(const World& world) {
    auto agent = world.agents.find(cast::kPhone);
    if (agent == world.agents.end()) return 0;
    auto slot = agent->second.tpm.sealed_slots.find(0);
    if (slot == agent->second.tpm.sealed_slots.end()) return 0;
    ByteReader r(slot->second.payload);
    return r.u64();
}

}  // namespace transtrust
