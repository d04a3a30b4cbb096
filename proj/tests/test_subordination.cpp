// Runs the subordination flow end to end: a dominator phone mediating a
// bonded device's service request under both decision variants and both
// credential backings, plus the refusals — wrong service, foreign
// dominator, foreign-issued credential under local grant, and a revoked
// backing key.

#include "doctest.h"
#include "transtrust/operations.hpp"

using namespace transtrust;

namespace {

constexpr const char* kHome = "mno-A";
constexpr const char* kPhone = "phone-a";
constexpr const char* kCamera = "camera-ap";
constexpr const char* kService = "photo_upload";

World make_world(std::uint64_t seed, SigmaBacking backing) {
    World world(seed);
    world.add_principal(kHome);
    world.add_agent(kPhone, kHome);
    world.enroll_gamma(kPhone);
    world.enroll_tau(kPhone, EnrolmentMode::PrincipalControlled);
    world.add_agent(kCamera, kHome);
    world.enroll_tau(kCamera, EnrolmentMode::Independent);

    AgentState& phone = world.agent(kPhone);
    AgentState& camera = world.agent(kCamera);
    DomainRegistry& registry = world.principal(kHome).registry;
    phone.sigma = registry.issue_subordination_credential(
        phone.id, SigmaScope::Dominator, {}, SigmaBacking::Tau, nullptr, world.rng);
    camera.sigma = registry.issue_subordination_credential(
        camera.id, SigmaScope::Subordinate, {kService}, backing, &camera.tpm,
        world.rng);
    return world;
}

SubordinationRequest camera_request(SubordinationVariant variant,
                                    const std::string& service = kService) {
    SubordinationRequest request;
    request.principal = kHome;
    request.dominator = kPhone;
    request.subordinate = kCamera;
    request.service = service;
    request.variant = variant;
    return request;
}

AccessDecision run(World& world, const SubordinationRequest& request) {
    StepBudget budget;
    return run_subordination(world, request, budget);
}

}  // namespace

TEST_CASE("a bonded device is served under every variant and backing") {
    std::uint64_t seed = 201;
    for (SubordinationVariant variant :
         {SubordinationVariant::Forward, SubordinationVariant::LocalGrant}) {
        for (SigmaBacking backing : {SigmaBacking::Tau, SigmaBacking::DedicatedGamma}) {
            CAPTURE(to_string(variant));
            CAPTURE(to_string(backing));
            World world = make_world(seed++, backing);
            AccessDecision decision = run(world, camera_request(variant));
            CHECK(decision.outcome_label() == "grant/base");
        }
    }
}

TEST_CASE("a service outside the bond is refused by both deciders") {
    for (SubordinationVariant variant :
         {SubordinationVariant::Forward, SubordinationVariant::LocalGrant}) {
        CAPTURE(to_string(variant));
        World world = make_world(205, SigmaBacking::DedicatedGamma);
        AccessDecision decision =
            run(world, camera_request(variant, "firmware_update"));
        CHECK(decision.outcome_label() == "deny/policy");
    }
}

TEST_CASE("revoking the subordinate's platform key stops the bond") {
    for (SubordinationVariant variant :
         {SubordinationVariant::Forward, SubordinationVariant::LocalGrant}) {
        CAPTURE(to_string(variant));
        World world = make_world(206, SigmaBacking::DedicatedGamma);
        world.publish_revocation(world.agent(kCamera).tau->tpm_key_id);
        AccessDecision decision = run(world, camera_request(variant));
        CHECK(decision.outcome_label() == "deny/revoked");
    }
}

TEST_CASE("a phone from another operator cannot act as dominator here") {
    World world = make_world(207, SigmaBacking::DedicatedGamma);
    world.add_principal("mno-C");
    world.add_agent("phone-c", "mno-C");
    world.enroll_gamma("phone-c");
    world.enroll_tau("phone-c", EnrolmentMode::PrincipalControlled);
    AgentState& foreign = world.agent("phone-c");
    foreign.sigma = world.principal("mno-C").registry.issue_subordination_credential(
        foreign.id, SigmaScope::Dominator, {}, SigmaBacking::Tau, nullptr, world.rng);

    SubordinationRequest request = camera_request(SubordinationVariant::Forward);
    request.dominator = "phone-c";
    AccessDecision decision = run(world, request);
    CHECK(decision.outcome_label() == "deny/policy");
}

TEST_CASE("local grant only honours credentials from the dominator's own principal") {
    World world = make_world(208, SigmaBacking::DedicatedGamma);
    world.add_principal("mno-C");
    AgentState& camera = world.agent(kCamera);
    DomainRegistry& foreign = world.principal("mno-C").registry;
    foreign.enroll_trust_credential(camera.tpm, camera.id, EnrolmentMode::Independent,
                                    world.rng, world.manufacturer);
    camera.sigma = foreign.issue_subordination_credential(
        camera.id, SigmaScope::Subordinate, {kService}, SigmaBacking::Tau, nullptr,
        world.rng);

    AccessDecision decision = run(world, camera_request(SubordinationVariant::LocalGrant));
    CHECK(decision.outcome_label() == "deny/policy");
}

TEST_CASE("a subordinate-scope credential cannot register as dominator") {
    World world = make_world(209, SigmaBacking::DedicatedGamma);
    // Hand the phone the camera's subordinate credential.
    world.agent(kPhone).sigma = world.agent(kCamera).sigma;
    AccessDecision decision = run(world, camera_request(SubordinationVariant::Forward));
    CHECK(decision.outcome_label() == "deny/policy");
}

TEST_CASE("missing credentials are a caller error, not a protocol outcome") {
    World world = make_world(210, SigmaBacking::DedicatedGamma);
    world.agent(kPhone).sigma = std::nullopt;
    StepBudget budget;
    CHECK_THROWS_AS(run_subordination(world, camera_request(SubordinationVariant::Forward),
                                      budget),
                    std::runtime_error);
}

TEST_CASE("an exhausted step budget ends in a deny, not a hang") {
    World world = make_world(211, SigmaBacking::DedicatedGamma);
    StepBudget budget;
    budget.limit = 5;
    AccessDecision decision =
        run_subordination(world, camera_request(SubordinationVariant::Forward), budget);
    CHECK(decision.verdict == Verdict::Deny);
}
