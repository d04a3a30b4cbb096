// Drives whole scenarios through the builder and runner: the prepaid
// ledger is conserved across hundreds of generated purchase sequences,
// the bonding outcomes follow the configured variant and failure knobs,
// and the purchase settlement tracks the transposition result exactly.

#include <algorithm>

#include "doctest.h"
#include "transtrust/verify.hpp"

using namespace transtrust;

namespace {

ScenarioResult run_config(World& world, const ScenarioConfig& config) {
    return run_scenario(world, config);
}

ScenarioConfig bonding_config(SubordinationVariant variant) {
    ScenarioConfig config;
    config.scenario = ScenarioKind::Bonding;
    config.seed = 900;
    config.subordination_variant = variant;
    return config;
}

}  // namespace

TEST_CASE("prepaid totals are conserved across generated purchase sequences") {
    SeededRng gen(4242);
    for (int round = 0; round < 300; ++round) {
        CAPTURE(round);
        ScenarioConfig config;
        config.scenario = ScenarioKind::Prepaid;
        config.seed = gen.next_u64() % 100000;
        config.prepaid_total = gen.next_u64() % 21;
        config.purchases.clear();
        std::size_t count = 1 + gen.next_u64() % 5;
        for (std::size_t i = 0; i < count; ++i) {
            config.purchases.push_back(static_cast<std::uint32_t>(gen.next_u64() % 9));
        }

        World world(config.seed);
        ScenarioResult result = run_config(world, config);

        std::uint64_t running = config.prepaid_total;
        REQUIRE(result.purchase_log.size() == config.purchases.size());
        for (std::size_t i = 0; i < config.purchases.size(); ++i) {
            std::uint32_t units = config.purchases[i];
            const AccessDecision& decision = result.purchase_log[i].decision;
            if (running >= units) {
                CHECK(decision.outcome_label() == "grant/privileged");
                running -= units;
            } else {
                CHECK(decision.outcome_label() == "deny/policy");
            }
        }
        CHECK(result.prepaid_initial == config.prepaid_total);
        CHECK(result.prepaid_final == running);
        CHECK(read_prepaid_total(world) == running);
    }
}

TEST_CASE("a cloned prepaid credential is exposed while the victim stays served") {
    ScenarioConfig config;
    config.scenario = ScenarioKind::Prepaid;
    config.seed = 910;
    config.adversary.push_back("clone_credential:phone-a");

    World world(config.seed);
    ScenarioResult result = run_config(world, config);
    REQUIRE(result.honest_decision.has_value());
    CHECK(result.honest_decision->outcome_label() == "grant/privileged");
    CHECK(result.decision.outcome_label() == "deny/clone_detected");
}

TEST_CASE("cloning an unknown agent is a configuration error") {
    ScenarioConfig config;
    config.scenario = ScenarioKind::Prepaid;
    config.adversary.push_back("clone_credential:ghost");
    World world(config.seed);
    CHECK_THROWS_AS(run_config(world, config), ConfigError);
}

TEST_CASE("a rogue boot module turns every purchase away") {
    ScenarioConfig config;
    config.scenario = ScenarioKind::Prepaid;
    config.seed = 911;
    config.rogue_boot = true;
    config.purchases = {2, 2};

    World world(config.seed);
    ScenarioResult result = run_config(world, config);
    CHECK(result.decision.outcome_label() == "deny/integrity_mismatch");
    CHECK(result.prepaid_final == result.prepaid_initial);
}

TEST_CASE("bonding outcomes follow the failure knobs") {
    SUBCASE("honest bond is served under both variants") {
        for (SubordinationVariant variant :
             {SubordinationVariant::Forward, SubordinationVariant::LocalGrant}) {
            ScenarioConfig config = bonding_config(variant);
            World world(config.seed);
            CHECK(run_config(world, config).decision.outcome_label() == "grant/base");
        }
    }
    SUBCASE("revoked backing key") {
        ScenarioConfig config = bonding_config(SubordinationVariant::Forward);
        config.revoke_backing = true;
        World world(config.seed);
        CHECK(run_config(world, config).decision.outcome_label() == "deny/revoked");
    }
    SUBCASE("foreign dominator phone") {
        ScenarioConfig config = bonding_config(SubordinationVariant::Forward);
        config.foreign_dominator = true;
        World world(config.seed);
        CHECK(run_config(world, config).decision.outcome_label() == "deny/policy");
    }
    SUBCASE("request outside the bonded services") {
        ScenarioConfig config = bonding_config(SubordinationVariant::LocalGrant);
        config.requested_service = "firmware_update";
        World world(config.seed);
        CHECK(run_config(world, config).decision.outcome_label() == "deny/policy");
    }
    SUBCASE("platform-key backing instead of a dedicated credential") {
        ScenarioConfig config = bonding_config(SubordinationVariant::LocalGrant);
        config.sigma_backing = SigmaBacking::Tau;
        World world(config.seed);
        CHECK(run_config(world, config).decision.outcome_label() == "grant/base");
    }
}

TEST_CASE("the good changes hands exactly when the transposition completes") {
    auto grant_entries = [](const World& world) {
        const auto& entries = world.fabric.transcript().entries;
        return std::count_if(entries.begin(), entries.end(), [](const auto& e) {
            return e.env.kind == MsgKind::ServiceGrant;
        });
    };

    ScenarioConfig config;
    config.scenario = ScenarioKind::Pos;
    config.seed = 920;

    World honest(config.seed);
    ScenarioResult sold = run_config(honest, config);
    REQUIRE(sold.transposition.has_value());
    CHECK(sold.transposition->completed);
    CHECK(sold.decision.verdict == Verdict::Grant);
    CHECK(grant_entries(honest) == 1);
    CHECK(sold.exit_code() == 0);

    config.adversary.push_back("tamper:WrappedAck:2");
    World attacked(config.seed);
    ScenarioResult refused = run_config(attacked, config);
    REQUIRE(refused.transposition.has_value());
    CHECK_FALSE(refused.transposition->completed);
    CHECK(refused.decision.verdict == Verdict::Deny);
    CHECK(grant_entries(attacked) == 0);
    CHECK(refused.exit_code() == 1);
}

TEST_CASE("reports pass their own invariants and reruns serialize identically") {
    for (ScenarioKind kind :
         {ScenarioKind::Prepaid, ScenarioKind::Bonding, ScenarioKind::Pos}) {
        CAPTURE(to_string(kind));
        ScenarioConfig config;
        config.scenario = kind;
        config.seed = 930;

        World world(config.seed);
        ScenarioResult result = run_config(world, config);
        RunReport report = make_report(world, config, result, "transcript.txt");
        for (const InvariantResult& invariant : report.invariants) {
            CAPTURE(invariant.name);
            CAPTURE(invariant.note);
            CHECK(invariant.pass);
        }

        World again(config.seed);
        ScenarioResult repeat = run_config(again, config);
        RunReport report_again = make_report(again, config, repeat, "transcript.txt");
        CHECK(report.text() == report_again.text());
        CHECK(world.fabric.transcript().text() == again.fabric.transcript().text());
    }
}

TEST_CASE("bookkeeping invariants survive a stacked adversary script") {
    // Duplication inserts transcript entries mid-delivery; the other actions
    // pile on. The run fails, the record-keeping must not.
    ScenarioConfig config;
    config.scenario = ScenarioKind::Pos;
    config.seed = 931;
    config.adversary = {"tamper:WrappedTau:0", "drop:17", "duplicate:QuoteL2",
                        "clone_credential:phone-a"};

    World world(config.seed);
    ScenarioResult result = run_config(world, config);
    CHECK(result.decision.verdict == Verdict::Deny);

    RunReport report = make_report(world, config, result, "transcript.txt");
    for (const InvariantResult& invariant : report.invariants) {
        CAPTURE(invariant.name);
        CAPTURE(invariant.note);
        CHECK(invariant.pass);
    }
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        bool dropped = entry.adversary_note.rfind("drop", 0) == 0;
        CHECK(entry.delivered_at >= (dropped ? -1 : 0));
        if (dropped) CHECK(entry.delivered_at == -1);
    }
}
