#pragma once

#include "transtrust/operations.hpp"

namespace transtrust {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind { Prepaid, Bonding, Pos };

const char* to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_from_string(std::string_view name);

// Everything a run needs beyond the world seed: which scenario, which
// protocol variants, and the adversary script. Parsed from a sectioned
// key-value file; unknown sections or keys are hard errors.
struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::Prepaid;
    std::uint64_t seed = 42;

    // [restriction] / [prepaid]
    RestrictionVariant restriction_variant = RestrictionVariant::Acl;
    EnrolmentMode enrolment = EnrolmentMode::PrincipalControlled;
    std::uint64_t prepaid_total = 10;
    std::vector<std::uint32_t> purchases{3};
    bool rogue_boot = false;

    // [subordination]
    SubordinationVariant subordination_variant = SubordinationVariant::Forward;
    SigmaBacking sigma_backing = SigmaBacking::DedicatedGamma;
    std::string bonded_service = "photo_upload";
    std::string requested_service;  // empty: request the bonded service
    bool revoke_backing = false;
    bool foreign_dominator = false;

    // [transposition]
    PrivacyMode privacy = PrivacyMode::Encrypted;
    StepOrder step_order = StepOrder::AThenB;
    bool fresh_secondary_auth = false;

    // [adversary], in file order; raw strings so reports can echo them
    std::vector<std::string> adversary;

    std::vector<AdversaryAction> adversary_actions() const;
    bool has_clone_action() const;
    std::string clone_target() const;
};

ScenarioConfig parse_config_text(std::string_view text, const std::string& origin);
ScenarioConfig load_config_file(const std::string& path);

// CLI `--variant` plumbing: the name selects the scenario-appropriate knob.
void apply_variant(ScenarioConfig& config, std::string_view name);

}  // namespace transtrust
