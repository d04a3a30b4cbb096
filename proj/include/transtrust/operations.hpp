#pragma once

#include "transtrust/channel_setup.hpp"

namespace transtrust {

enum class Verdict { Grant, Deny };
enum class Privilege { Base, Privileged };

enum class DenyReason {
    Ok,
    CloneDetected,
    IntegrityMismatch,
    Revoked,
    NoAssociation,
    Policy,
};

const char* to_string(Verdict verdict);
const char* to_string(Privilege privilege);
const char* to_string(DenyReason reason);

struct AccessDecision {
    ActorId subject;
    Verdict verdict = Verdict::Deny;
    Privilege privilege = Privilege::Base;
    DenyReason reason = DenyReason::Policy;

    std::string outcome_label() const;

    static AccessDecision grant(ActorId subject, Privilege privilege) {
        return {std::move(subject), Verdict::Grant, privilege, DenyReason::Ok};
    }
    static AccessDecision deny(ActorId subject, DenyReason reason) {
        return {std::move(subject), Verdict::Deny, Privilege::Base, reason};
    }
};

enum class RestrictionVariant { Acl, SharedSecret };
enum class SubordinationVariant { Forward, LocalGrant };
enum class PrivacyMode { Encrypted, MacOnly };
enum class StepOrder { AThenB, BThenA };

const char* to_string(RestrictionVariant variant);
const char* to_string(SubordinationVariant variant);
const char* to_string(PrivacyMode mode);
const char* to_string(StepOrder order);

struct RestrictionRequest {
    std::string principal;
    std::string agent;
    DomainCredential gamma;                 // as presented, possibly a clone
    std::optional<TrustCredential> tau;
    RestrictionVariant variant = RestrictionVariant::Acl;
    std::string service = "network-access";
    // Prepaid claim: when set, the agent attests a sufficiency claim for
    // this many units and decrements its sealed total on a grant.
    std::optional<std::uint32_t> prepaid_units;
};

AccessDecision run_restriction(World& world, const RestrictionRequest& request,
                               StepBudget& budget);

struct SubordinationRequest {
    std::string principal;
    std::string dominator;
    std::string subordinate;
    std::string service;
    SubordinationVariant variant = SubordinationVariant::Forward;
};

AccessDecision run_subordination(World& world, const SubordinationRequest& request,
                                 StepBudget& budget);

enum class StepStatus { Accepted, Failed };

enum class StepFailure {
    None,
    AuthenticationFailure,
    NoAssociation,
    Timeout,
    Refused,
    NotAttempted,
};

const char* to_string(StepStatus status);
const char* to_string(StepFailure failure);

struct StepResult {
    StepStatus status = StepStatus::Failed;
    StepFailure failure = StepFailure::Timeout;
};

struct TranspositionOutcome {
    StepResult step_a;
    StepResult step_b;
    std::set<std::string> a_view_identities;
    bool completed = false;
};

struct TranspositionRequest {
    std::string home_principal;     // A: the buyer's network operator
    std::string buyer;              // a
    std::string merchant_principal; // B: the till's owner
    std::string merchant;           // b
    PrivacyMode privacy = PrivacyMode::Encrypted;
    StepOrder order = StepOrder::AThenB;
    // When set, the home operator re-challenges the buyer's domain
    // credential during redemption instead of reusing the log-on evidence.
    bool fresh_secondary_auth = false;
};

TranspositionOutcome run_transposition(World& world, const TranspositionRequest& request,
                                       StepBudget& budget);

}  // namespace transtrust
