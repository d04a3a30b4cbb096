#include "transtrust/verify.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace transtrust {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(" | ", start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 3;
    }
}

bool is_hex(const std::string& s) {
    for (char c : s) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    }
    return true;
}

int level_of(const std::string& kind) {
    if (kind == "QuoteL1") return 1;
    if (kind == "QuoteL2") return 2;
    if (kind == "QuoteL3") return 3;
    return 0;
}

InvariantResult suite_result(std::string name, bool pass, std::string note = "") {
    return {std::move(name), pass, std::move(note)};
}

ScenarioConfig without_adversary(const ScenarioConfig& config) {
    ScenarioConfig stripped = config;
    stripped.adversary.clear();
    return stripped;
}

bool entry_rejected(const World& world, std::uint64_t seq) {
    for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
        if (entry.env.seq == seq) return entry.settled && !entry.accepted;
    }
    return false;
}

}  // namespace

std::vector<TranscriptRecord> parse_transcript_text(std::string_view text) {
    std::vector<TranscriptRecord> records;
    std::istringstream stream{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 7) {
            throw VerifyError("transcript line " + std::to_string(line_no) +
                              ": expected 7 fields, got " +
                              std::to_string(fields.size()));
        }
        TranscriptRecord record;
        auto [ptr, ec] = std::from_chars(fields[0].data(),
                                         fields[0].data() + fields[0].size(),
                                         record.seq);
        if (ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
            throw VerifyError("transcript line " + std::to_string(line_no) +
                              ": bad sequence number '" + fields[0] + "'");
        }
        record.phase = fields[1];
        record.from = fields[2];
        record.to = fields[3];
        record.kind = fields[4];
        if (!kind_from_string(record.kind)) {
            throw VerifyError("transcript line " + std::to_string(line_no) +
                              ": unknown message kind '" + record.kind + "'");
        }
        if (fields[5] == "accepted") {
            record.accepted = true;
        } else if (fields[5] == "rejected") {
            record.accepted = false;
        } else {
            throw VerifyError("transcript line " + std::to_string(line_no) +
                              ": expected accepted|rejected, got '" + fields[5] + "'");
        }
        if (fields[6].size() != 64 || !is_hex(fields[6])) {
            throw VerifyError("transcript line " + std::to_string(line_no) +
                              ": bad payload digest");
        }
        record.payload_digest = fields[6];
        records.push_back(std::move(record));
    }
    if (records.empty()) {
        throw VerifyError("transcript holds no entries");
    }
    return records;
}

std::vector<TranscriptRecord> load_transcript_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw VerifyError("cannot open transcript '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_transcript_text(buffer.str());
}

std::vector<InvariantResult> verify_ordering(
    const std::vector<TranscriptRecord>& records) {
    std::vector<InvariantResult> results;

    bool monotone = true;
    std::string monotone_note;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].seq <= records[i - 1].seq) {
            monotone = false;
            monotone_note = "seq " + std::to_string(records[i].seq) + " after " +
                            std::to_string(records[i - 1].seq);
            break;
        }
    }
    results.push_back(suite_result("sequence_monotone", monotone, monotone_note));

    bool layered = true;
    std::string layer_note;
    std::map<std::pair<std::string, std::string>, int> reached;
    for (const TranscriptRecord& record : records) {
        int level = level_of(record.kind);
        if (level == 0 || !record.accepted) continue;
        int& top = reached[{record.from, record.to}];
        if (level > top + 1) {
            layered = false;
            layer_note = record.from + " jumped to level " + std::to_string(level) +
                         " at seq " + std::to_string(record.seq);
            break;
        }
        top = std::max(top, level);
    }
    results.push_back(suite_result("quote_layering", layered, layer_note));

    // Step phases, when present, form clean blocks after establishment.
    auto first_of = [&](const std::string& phase) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].phase == phase) return static_cast<std::ptrdiff_t>(i);
        }
        return -1;
    };
    auto last_of = [&](const std::string& phase) -> std::ptrdiff_t {
        std::ptrdiff_t last = -1;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].phase == phase) last = static_cast<std::ptrdiff_t>(i);
        }
        return last;
    };
    bool blocks = true;
    std::string block_note;
    std::ptrdiff_t a_first = first_of("step_a");
    std::ptrdiff_t a_last = last_of("step_a");
    std::ptrdiff_t b_first = first_of("step_b");
    std::ptrdiff_t b_last = last_of("step_b");
    std::ptrdiff_t steps_begin = -1;
    if (a_first >= 0) steps_begin = a_first;
    if (b_first >= 0 && (steps_begin < 0 || b_first < steps_begin)) {
        steps_begin = b_first;
    }
    if (steps_begin >= 0 && last_of("setup") > steps_begin) {
        blocks = false;
        block_note = "establishment traffic after the steps began";
    }
    if (blocks && a_first >= 0 && b_first >= 0 &&
        !(a_last < b_first || b_last < a_first)) {
        blocks = false;
        block_note = "step phases interleave";
    }
    results.push_back(suite_result("step_blocks", blocks, block_note));
    return results;
}

std::vector<InvariantResult> verify_tamper(const ScenarioConfig& config) {
    if (config.scenario != ScenarioKind::Pos) {
        throw VerifyError("the tamper suite replays a pos config");
    }
    ScenarioConfig honest = without_adversary(config);

    World baseline(honest.seed);
    ScenarioResult base_result = run_scenario(baseline, honest);

    std::vector<std::uint64_t> wrapped;
    for (const TranscriptEntry& entry : baseline.fabric.transcript().entries) {
        if (entry.env.kind == MsgKind::WrappedTau ||
            entry.env.kind == MsgKind::WrappedAck) {
            wrapped.push_back(entry.env.seq);
        }
    }

    std::vector<InvariantResult> results;
    bool base_ok = base_result.transposition && base_result.transposition->completed &&
                   !wrapped.empty();
    results.push_back(suite_result(
        "baseline_completes", base_ok,
        base_ok ? "" : "honest run did not complete with wrapped envelopes"));

    for (std::uint64_t seq : wrapped) {
        ScenarioConfig attacked = honest;
        attacked.adversary.push_back("tamper:" + std::to_string(seq) + ":0");
        World world(attacked.seed);
        ScenarioResult result = run_scenario(world, attacked);
        bool broken = result.transposition && !result.transposition->completed &&
                      entry_rejected(world, seq);
        results.push_back(suite_result(
            "tamper_seq_" + std::to_string(seq), broken,
            broken ? "" : "tampered envelope still completed the run"));
    }
    return results;
}

std::vector<InvariantResult> verify_clone(const ScenarioConfig& config) {
    if (config.scenario != ScenarioKind::Prepaid) {
        throw VerifyError("the clone suite replays a prepaid config");
    }
    ScenarioConfig cloned = config;
    if (!cloned.has_clone_action()) {
        cloned.adversary.push_back(std::string("clone_credential:") + cast::kPhone);
    }

    auto judge = [](const AccessDecision& honest, const AccessDecision& attack,
                    std::string name) {
        bool one_grant = (honest.verdict == Verdict::Grant) !=
                         (attack.verdict == Verdict::Grant);
        const AccessDecision& denied =
            honest.verdict == Verdict::Grant ? attack : honest;
        const AccessDecision& granted =
            honest.verdict == Verdict::Grant ? honest : attack;
        bool ok = one_grant && denied.reason == DenyReason::CloneDetected &&
                  granted.privilege == Privilege::Privileged;
        return suite_result(std::move(name), ok,
                            ok ? ""
                               : "honest " + honest.outcome_label() + ", clone " +
                                     attack.outcome_label());
    };

    std::vector<InvariantResult> results;
    {
        World world(cloned.seed);
        ScenarioResult result = run_scenario(world, cloned);
        if (!result.honest_decision) {
            throw VerifyError("clone run recorded no honest decision");
        }
        results.push_back(
            judge(*result.honest_decision, result.decision, "clone_victim_first"));
    }
    {
        World world(cloned.seed);
        world.fabric.install(cloned.adversary_actions());
        build_scenario_world(world, cloned);
        AgentState& victim = world.agent(cast::kPhone);
        AgentState& intruder = world.agent(cast::kIntruder);
        DomainCredential copy = clone_credential(*victim.gamma, intruder.id);

        StepBudget first_budget;
        RestrictionRequest attack{cast::kMno,  cast::kIntruder,
                                  copy,        intruder.tau,
                                  cloned.restriction_variant,
                                  "network-access", std::nullopt};
        AccessDecision attack_decision = run_restriction(world, attack, first_budget);

        StepBudget second_budget;
        RestrictionRequest honest{cast::kMno, cast::kPhone, *victim.gamma, victim.tau,
                                  cloned.restriction_variant, "network-access",
                                  cloned.purchases.empty()
                                      ? std::optional<std::uint32_t>{}
                                      : std::optional<std::uint32_t>{
                                            cloned.purchases.front()}};
        AccessDecision honest_decision = run_restriction(world, honest, second_budget);
        results.push_back(
            judge(honest_decision, attack_decision, "clone_attacker_first"));
    }
    return results;
}

std::vector<InvariantResult> verify_conservation(const ScenarioConfig& config) {
    if (config.scenario != ScenarioKind::Prepaid) {
        throw VerifyError("the conservation suite replays a prepaid config");
    }
    World world(config.seed);
    ScenarioResult result = run_scenario(world, config);

    std::uint64_t expected = result.prepaid_initial;
    for (const PurchaseRecord& record : result.purchase_log) {
        if (record.decision.verdict == Verdict::Grant) {
            expected -= std::min<std::uint64_t>(expected, record.units);
        }
    }
    bool ok = expected == result.prepaid_final;
    return {suite_result("conservation", ok,
                         ok ? ""
                            : "stored total " + std::to_string(result.prepaid_final) +
                                  ", expected " + std::to_string(expected))};
}

}  // namespace transtrust
