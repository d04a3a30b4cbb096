#pragma once

#include "transtrust/config.hpp"

namespace transtrust {

// Fixed casts; the config picks variants, not actors.
namespace cast {
inline constexpr const char* kMno = "mno-A";
inline constexpr const char* kPhone = "phone-a";
inline constexpr const char* kIntruder = "intruder-i";
inline constexpr const char* kCamera = "camera-ap";
inline constexpr const char* kForeignMno = "mno-C";
inline constexpr const char* kForeignPhone = "phone-c";
inline constexpr const char* kOwner = "owner-B";
inline constexpr const char* kPos = "pos-b";
inline constexpr const char* kBuyer = "device-a";
}  // namespace cast

struct PurchaseRecord {
    std::uint32_t units = 0;
    AccessDecision decision;
};

struct ScenarioResult {
    ScenarioKind scenario = ScenarioKind::Prepaid;
    AccessDecision decision;  // the run's headline outcome
    // Clone runs report the honest holder's outcome next to the clone's.
    std::optional<AccessDecision> honest_decision;
    std::optional<TranspositionOutcome> transposition;
    std::uint64_t prepaid_initial = 0;
    std::uint64_t prepaid_final = 0;
    std::vector<PurchaseRecord> purchase_log;
    std::size_t steps_used = 0;

    int exit_code() const { return decision.verdict == Verdict::Grant ? 0 : 1; }
};

// Populates a fresh world with the actors, enrolments and stored values
// the configured scenario needs. Run exactly once per world.
void build_scenario_world(World& world, const ScenarioConfig& config);

// Builds and executes; the world afterwards holds the full transcript.
ScenarioResult run_scenario(World& world, const ScenarioConfig& config);

// Ground truth for conservation checks: the sealed running total as
// stored, read without the policy gate.
std::uint64_t read_prepaid_total(const World& world);

}  // namespace transtrust
