#include "transtrust/verify.hpp"

#include <algorithm>
#include <sstream>

namespace transtrust {

namespace {

std::string step_label(const StepResult& step) {
    if (step.status == StepStatus::Accepted) return "accepted";
    return std::string("failed(") + to_string(step.failure) + ")";
}

bool contains_bytes(const Bytes& haystack, ByteView needle) {
    if (needle.empty()) return false;
    return std::search(haystack.begin(), haystack.end(), needle.begin(),
                       needle.end()) != haystack.end();
}

InvariantResult check_fifo_order(const World& world) {
    InvariantResult r{"fifo_order", true, ""};
    std::map<std::pair<std::string, std::string>,
             std::vector<std::pair<std::uint64_t, std::int64_t>>>
        lanes;
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        if (entry.delivered_at < 0) continue;
        lanes[{entry.env.from, entry.env.to}].emplace_back(entry.env.seq,
                                                           entry.delivered_at);
    }
    for (auto& [lane, deliveries] : lanes) {
        std::sort(deliveries.begin(), deliveries.end());
        for (std::size_t i = 1; i < deliveries.size(); ++i) {
            if (deliveries[i].second <= deliveries[i - 1].second) {
                r.pass = false;
                r.note = lane.first + "->" + lane.second + " reordered at seq " +
                         std::to_string(deliveries[i].first);
                return r;
            }
        }
    }
    return r;
}

int quote_level(MsgKind kind) {
    switch (kind) {
        case MsgKind::QuoteL1: return 1;
        case MsgKind::QuoteL2: return 2;
        case MsgKind::QuoteL3: return 3;
        default: return 0;
    }
}

InvariantResult check_assertion_layering(const World& world) {
    InvariantResult r{"assertion_layering", true, ""};
    // Accepted quotes per (session, prover), in delivery order; each one
    // may raise the evidence level by at most one step.
    std::map<std::pair<std::uint64_t, std::string>,
             std::vector<std::pair<std::int64_t, int>>>
        chains;
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        int level = quote_level(entry.env.kind);
        if (level == 0 || !entry.accepted || !entry.env.session_id) continue;
        chains[{*entry.env.session_id, entry.env.from}].emplace_back(
            entry.delivered_at, level);
    }
    for (auto& [key, quotes] : chains) {
        std::sort(quotes.begin(), quotes.end());
        int reached = 0;
        for (const auto& [at, level] : quotes) {
            if (level > reached + 1) {
                r.pass = false;
                r.note = key.second + " jumped to level " + std::to_string(level) +
                         " in session " + std::to_string(key.first);
                return r;
            }
            reached = std::max(reached, level);
        }
    }
    return r;
}

InvariantResult check_credential_secrecy(const World& world) {
    InvariantResult r{"credential_secrecy", true, ""};
    std::vector<std::pair<std::string, Bytes>> needles;
    auto add_secret = [&](const std::string& who, ByteView secret) {
        needles.emplace_back(who, Bytes(secret.begin(), secret.end()));
    };
    for (const auto& [name, agent] : world.agents) {
        if (agent.gamma) add_secret(name, agent.gamma->secret);
        if (agent.dedicated_gamma) add_secret(name, agent.dedicated_gamma->secret);
    }
    for (const auto& [name, principal] : world.principals) {
        for (const auto& [serial, gamma] : principal.registry.gammas()) {
            add_secret(gamma.agent.name, gamma.secret);
        }
    }

    auto scan = [&](const Bytes& data, const std::string& where) {
        for (const auto& [who, needle] : needles) {
            if (contains_bytes(data, needle)) {
                r.pass = false;
                r.note = who + "'s domain secret visible in " + where;
                return true;
            }
        }
        return false;
    };
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        if (scan(entry.env.payload, "wire seq " + std::to_string(entry.env.seq))) {
            return r;
        }
    }
    for (const auto& [name, agent] : world.agents) {
        for (const auto& [seq, plain] : agent.obs.entries) {
            if (scan(plain, name + "'s inbox seq " + std::to_string(seq))) return r;
        }
    }
    for (const auto& [name, principal] : world.principals) {
        for (const auto& [seq, plain] : principal.obs.entries) {
            if (scan(plain, name + "'s inbox seq " + std::to_string(seq))) return r;
        }
    }
    return r;
}

InvariantResult check_pcr_log_replay(const World& world) {
    InvariantResult r{"pcr_log_replay", true, ""};
    for (const auto& [name, agent] : world.agents) {
        if (replay_measurement_log(agent.tpm) != agent.tpm.pcr_bank) {
            r.pass = false;
            r.note = name + "'s register bank diverges from its measurement log";
            return r;
        }
    }
    return r;
}

InvariantResult check_determinism(const World& world, const ScenarioConfig& config) {
    InvariantResult r{"determinism", true, ""};
    World rerun(config.seed);
    run_scenario(rerun, config);
    if (rerun.fabric.transcript().text() != world.fabric.transcript().text()) {
        r.pass = false;
        r.note = "rerun with the same seed produced a different transcript";
    }
    return r;
}

InvariantResult check_prepaid_conservation(const ScenarioResult& result) {
    InvariantResult r{"prepaid_conservation", true, ""};
    std::uint64_t expected = result.prepaid_initial;
    for (const PurchaseRecord& record : result.purchase_log) {
        if (record.decision.verdict == Verdict::Grant) {
            expected -= std::min<std::uint64_t>(expected, record.units);
        }
    }
    if (expected != result.prepaid_final) {
        r.pass = false;
        r.note = "stored total " + std::to_string(result.prepaid_final) +
                 ", expected " + std::to_string(expected);
    }
    return r;
}

InvariantResult check_bonding_containment(const World& world,
                                          const ScenarioConfig& config,
                                          const ScenarioResult& result) {
    InvariantResult r{"bonding_containment", true, ""};
    if (result.decision.verdict != Verdict::Grant) return r;

    std::string dominator =
        config.foreign_dominator ? cast::kForeignPhone : cast::kPhone;
    const AgentState& phone = world.agents.at(dominator);
    if (!phone.gamma || phone.gamma->principal.name != cast::kMno) {
        r.pass = false;
        r.note = "granted through a phone outside the bonding operator's domain";
        return r;
    }
    if (config.subordination_variant == SubordinationVariant::Forward) {
        bool asked = false;
        bool answered = false;
        for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
            if (!entry.accepted) continue;
            if (entry.env.kind == MsgKind::AuthRequest && entry.env.to == cast::kMno) {
                asked = true;
            }
            if (entry.env.kind == MsgKind::AuthAck && entry.env.from == cast::kMno) {
                answered = true;
            }
        }
        if (!asked || !answered) {
            r.pass = false;
            r.note = "forward-variant grant without an escalation round trip";
        }
    }
    return r;
}

InvariantResult check_step_blocks(const World& world, const ScenarioConfig& config) {
    InvariantResult r{"step_blocks", true, ""};
    const auto& entries = world.fabric.transcript().entries;

    auto block_of = [&](const std::string& phase) {
        std::pair<std::ptrdiff_t, std::ptrdiff_t> block{-1, -1};
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].phase != phase) continue;
            if (block.first < 0) block.first = static_cast<std::ptrdiff_t>(i);
            block.second = static_cast<std::ptrdiff_t>(i);
        }
        return block;
    };
    auto contiguous = [&](std::pair<std::ptrdiff_t, std::ptrdiff_t> block,
                          const std::string& phase) {
        for (std::ptrdiff_t i = block.first; i >= 0 && i <= block.second; ++i) {
            if (entries[static_cast<std::size_t>(i)].phase != phase) return false;
        }
        return true;
    };

    auto setup = block_of("setup");
    auto step_a = block_of("step_a");
    auto step_b = block_of("step_b");
    std::ptrdiff_t first_step = -1;
    if (step_a.first >= 0) first_step = step_a.first;
    if (step_b.first >= 0 && (first_step < 0 || step_b.first < first_step)) {
        first_step = step_b.first;
    }

    if (first_step >= 0 && setup.second > first_step) {
        r.pass = false;
        r.note = "channel establishment traffic after the steps began";
        return r;
    }
    if (!contiguous(step_a, "step_a") || !contiguous(step_b, "step_b")) {
        r.pass = false;
        r.note = "step phases interleave";
        return r;
    }
    if (step_a.first >= 0 && step_b.first >= 0) {
        bool a_first = step_a.second < step_b.first;
        bool b_first = step_b.second < step_a.first;
        if (config.step_order == StepOrder::AThenB && !a_first) {
            r.pass = false;
            r.note = "till authentication did not complete before the pledge";
        } else if (config.step_order == StepOrder::BThenA && !b_first) {
            r.pass = false;
            r.note = "pledge did not complete before the till authentication";
        }
    }
    return r;
}

InvariantResult check_pos_composition(const World& world, const ScenarioResult& result) {
    InvariantResult r{"pos_composition", true, ""};
    bool delivered = false;
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        if (entry.env.kind == MsgKind::ServiceGrant) delivered = true;
    }
    bool completed = result.transposition && result.transposition->completed;
    if (delivered != completed) {
        r.pass = false;
        r.note = delivered ? "good delivered without a completed transposition"
                           : "completed transposition without delivery";
    }
    return r;
}

InvariantResult check_privacy_view(const World& world, const ScenarioConfig& config,
                                   const ScenarioResult& result) {
    InvariantResult r{"privacy_view", true, ""};
    if (!result.transposition) {
        r.pass = false;
        r.note = "no transposition outcome recorded";
        return r;
    }
    bool relayed_wrap = false;
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        if (entry.env.kind == MsgKind::WrappedTau && entry.env.to == cast::kMno &&
            entry.accepted) {
            relayed_wrap = true;
        }
    }
    std::set<std::string> expected;
    if (config.privacy == PrivacyMode::MacOnly && relayed_wrap) {
        expected.insert(cast::kBuyer);
    }
    if (result.transposition->a_view_identities != expected) {
        r.pass = false;
        std::string seen;
        for (const std::string& name : result.transposition->a_view_identities) {
            if (!seen.empty()) seen += ",";
            seen += name;
        }
        r.note = "operator saw {" + seen + "}";
    }
    return r;
}

}  // namespace

void RunReport::write(std::ostream& out) const {
    out << "scenario: " << scenario << "\n";
    out << "seed: " << seed << "\n";
    out << "outcome: " << outcome << "\n";
    for (const std::string& line : detail) {
        out << "detail: " << line << "\n";
    }
    out << "transcript: " << transcript_file << "\n";
    for (const InvariantResult& inv : invariants) {
        out << "invariant: " << inv.name << " " << (inv.pass ? "pass" : "fail");
        if (!inv.note.empty()) out << " (" << inv.note << ")";
        out << "\n";
    }
    out << "exit: " << exit_code << "\n";
}

std::string RunReport::text() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

bool RunReport::all_pass() const {
    return std::all_of(invariants.begin(), invariants.end(),
                       [](const InvariantResult& inv) { return inv.pass; });
}

RunReport make_report(const World& world, const ScenarioConfig& config,
                      const ScenarioResult& result, const std::string& transcript_file) {
    RunReport report;
    report.scenario = to_string(config.scenario);
    report.seed = config.seed;
    report.transcript_file = transcript_file;
    report.exit_code = result.exit_code();

    for (const std::string& action : config.adversary) {
        report.detail.push_back("adversary: " + action);
    }

    switch (config.scenario) {
        case ScenarioKind::Prepaid: {
            report.outcome = result.decision.outcome_label();
            report.detail.push_back(std::string("variant: ") +
                                    to_string(config.restriction_variant));
            report.detail.push_back(std::string("enrolment: ") +
                                    to_string(config.enrolment));
            for (const PurchaseRecord& record : result.purchase_log) {
                report.detail.push_back("purchase: units=" +
                                        std::to_string(record.units) + " " +
                                        record.decision.outcome_label());
            }
            if (result.honest_decision) {
                report.detail.push_back("honest: " +
                                        result.honest_decision->outcome_label());
                report.detail.push_back("clone: " + result.decision.outcome_label());
            }
            report.detail.push_back("total: " + std::to_string(result.prepaid_initial) +
                                    " -> " + std::to_string(result.prepaid_final));
            break;
        }
        case ScenarioKind::Bonding: {
            report.outcome = result.decision.outcome_label();
            report.detail.push_back(std::string("variant: ") +
                                    to_string(config.subordination_variant));
            report.detail.push_back(std::string("backing: ") +
                                    to_string(config.sigma_backing));
            report.detail.push_back(std::string("dominator: ") +
                                    (config.foreign_dominator ? cast::kForeignPhone
                                                              : cast::kPhone));
            report.detail.push_back("service: " +
                                    (config.requested_service.empty()
                                         ? config.bonded_service
                                         : config.requested_service));
            break;
        }
        case ScenarioKind::Pos: {
            const TranspositionOutcome& outcome = *result.transposition;
            report.outcome = outcome.completed ? "completed" : "failed";
            report.detail.push_back(std::string("privacy: ") +
                                    to_string(config.privacy));
            report.detail.push_back(std::string("order: ") +
                                    to_string(config.step_order));
            report.detail.push_back("step_a: " + step_label(outcome.step_a));
            report.detail.push_back("step_b: " + step_label(outcome.step_b));
            std::string view;
            for (const std::string& name : outcome.a_view_identities) {
                if (!view.empty()) view += ",";
                view += name;
            }
            report.detail.push_back("a_view: " + (view.empty() ? "-" : view));
            break;
        }
    }

    report.invariants.push_back(check_fifo_order(world));
    report.invariants.push_back(check_assertion_layering(world));
    report.invariants.push_back(check_credential_secrecy(world));
    report.invariants.push_back(check_pcr_log_replay(world));
    report.invariants.push_back(check_determinism(world, config));
    switch (config.scenario) {
        case ScenarioKind::Prepaid:
            report.invariants.push_back(check_prepaid_conservation(result));
            break;
        case ScenarioKind::Bonding:
            report.invariants.push_back(check_bonding_containment(world, config, result));
            break;
        case ScenarioKind::Pos:
            report.invariants.push_back(check_step_blocks(world, config));
            report.invariants.push_back(check_pos_composition(world, result));
            report.invariants.push_back(check_privacy_view(world, config, result));
            break;
    }
    return report;
}

}  // namespace transtrust
