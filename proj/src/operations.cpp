#include "transtrust/operations.hpp"

namespace transtrust {

const char* to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Grant: return "grant";
        case Verdict::Deny: return "deny";
    }
    return "?";
}

const char* to_string(Privilege privilege) {
    switch (privilege) {
        case Privilege::Base: return "base";
        case Privilege::Privileged: return "privileged";
    }
    return "?";
}

const char* to_string(DenyReason reason) {
    switch (reason) {
        case DenyReason::Ok: return "ok";
        case DenyReason::CloneDetected: return "clone_detected";
        case DenyReason::IntegrityMismatch: return "integrity_mismatch";
        case DenyReason::Revoked: return "revoked";
        case DenyReason::NoAssociation: return "no_association";
        case DenyReason::Policy: return "policy";
    }
    return "?";
}

std::string AccessDecision::outcome_label() const {
    if (verdict == Verdict::Grant) {
        return std::string("grant/") + to_string(privilege);
    }
    return std::string("deny/") + to_string(reason);
}

const char* to_string(RestrictionVariant variant) {
    switch (variant) {
        case RestrictionVariant::Acl: return "acl";
        case RestrictionVariant::SharedSecret: return "shared_secret";
    }
    return "?";
}

const char* to_string(SubordinationVariant variant) {
    switch (variant) {
        case SubordinationVariant::Forward: return "forward";
        case SubordinationVariant::LocalGrant: return "local_grant";
    }
    return "?";
}

const char* to_string(PrivacyMode mode) {
    switch (mode) {
        case PrivacyMode::Encrypted: return "encrypted";
        case PrivacyMode::MacOnly: return "mac_only";
    }
    return "?";
}

const char* to_string(StepOrder order) {
    switch (order) {
        case StepOrder::AThenB: return "a_then_b";
        case StepOrder::BThenA: return "b_then_a";
    }
    return "?";
}

const char* to_string(StepStatus status) {
    switch (status) {
        case StepStatus::Accepted: return "accepted";
        case StepStatus::Failed: return "failed";
    }
    return "?";
}

const char* to_string(StepFailure failure) {
    switch (failure) {
        case StepFailure::None: return "none";
        case StepFailure::AuthenticationFailure: return "authentication_failure";
        case StepFailure::NoAssociation: return "no_association";
        case StepFailure::Timeout: return "timeout";
        case StepFailure::Refused: return "refused";
        case StepFailure::NotAttempted: return "not_attempted";
    }
    return "?";
}

}  // namespace transtrust
