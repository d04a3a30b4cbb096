#include "transtrust/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace transtrust {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

[[noreturn]] void fail_at(const std::string& origin, std::size_t line,
                          const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

std::uint64_t parse_u64(std::string_view value, const std::string& origin,
                        std::size_t line, std::string_view key) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        fail_at(origin, line,
                "key '" + std::string(key) + "' needs a non-negative integer, got '" +
                    std::string(value) + "'");
    }
    return out;
}

bool parse_bool(std::string_view value, const std::string& origin, std::size_t line,
                std::string_view key) {
    if (value == "true") return true;
    if (value == "false") return false;
    fail_at(origin, line,
            "key '" + std::string(key) + "' needs true or false, got '" +
                std::string(value) + "'");
}

template <typename Enum>
Enum parse_choice(std::string_view value,
                  std::initializer_list<std::pair<std::string_view, Enum>> table,
                  const std::string& origin, std::size_t line, std::string_view key) {
    for (const auto& [name, item] : table) {
        if (value == name) return item;
    }
    std::string choices;
    for (const auto& [name, item] : table) {
        if (!choices.empty()) choices += "|";
        choices += name;
    }
    fail_at(origin, line,
            "key '" + std::string(key) + "' must be one of " + choices + ", got '" +
                std::string(value) + "'");
}

}  // namespace

const char* to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Prepaid: return "prepaid";
        case ScenarioKind::Bonding: return "bonding";
        case ScenarioKind::Pos: return "pos";
    }
    return "?";
}

std::optional<ScenarioKind> scenario_from_string(std::string_view name) {
    if (name == "prepaid") return ScenarioKind::Prepaid;
    if (name == "bonding") return ScenarioKind::Bonding;
    if (name == "pos") return ScenarioKind::Pos;
    return std::nullopt;
}

std::vector<AdversaryAction> ScenarioConfig::adversary_actions() const {
    std::vector<AdversaryAction> actions;
    for (const std::string& text : adversary) {
        auto action = AdversaryAction::parse(text);
        if (!action) {
            throw ConfigError("bad adversary action '" + text + "'");
        }
        actions.push_back(*action);
    }
    return actions;
}

bool ScenarioConfig::has_clone_action() const {
    for (const std::string& text : adversary) {
        if (text.starts_with("clone_credential:")) return true;
    }
    return false;
}

std::string ScenarioConfig::clone_target() const {
    for (const std::string& text : adversary) {
        if (text.starts_with("clone_credential:")) {
            return text.substr(std::string_view("clone_credential:").size());
        }
    }
    return {};
}

ScenarioConfig parse_config_text(std::string_view text, const std::string& origin) {
    ScenarioConfig config;
    std::string section;
    std::size_t line_no = 0;

    std::istringstream stream{std::string(text)};
    std::string raw;
    while (std::getline(stream, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail_at(origin, line_no, "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section != "scenario" && section != "restriction" &&
                section != "prepaid" && section != "subordination" &&
                section != "transposition" && section != "adversary") {
                fail_at(origin, line_no, "unknown section [" + section + "]");
            }
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            fail_at(origin, line_no, "expected 'key = value'");
        }
        std::string key{trim(line.substr(0, eq))};
        std::string_view value = trim(line.substr(eq + 1));
        if (section.empty()) {
            fail_at(origin, line_no, "key '" + key + "' outside any section");
        }

        if (section == "scenario") {
            if (key == "kind") {
                auto kind = scenario_from_string(value);
                if (!kind) {
                    fail_at(origin, line_no,
                            "key 'kind' must be prepaid|bonding|pos, got '" +
                                std::string(value) + "'");
                }
                config.scenario = *kind;
            } else if (key == "seed") {
                config.seed = parse_u64(value, origin, line_no, key);
            } else {
                fail_at(origin, line_no, "unknown key '" + key + "' in [scenario]");
            }
        } else if (section == "restriction") {
            if (key == "variant") {
                config.restriction_variant = parse_choice<RestrictionVariant>(
                    value,
                    {{"acl", RestrictionVariant::Acl},
                     {"shared_secret", RestrictionVariant::SharedSecret}},
                    origin, line_no, key);
            } else if (key == "enrolment") {
                config.enrolment = parse_choice<EnrolmentMode>(
                    value,
                    {{"principal_controlled", EnrolmentMode::PrincipalControlled},
                     {"independent", EnrolmentMode::Independent}},
                    origin, line_no, key);
            } else {
                fail_at(origin, line_no, "unknown key '" + key + "' in [restriction]");
            }
        } else if (section == "prepaid") {
            if (key == "total") {
                config.prepaid_total = parse_u64(value, origin, line_no, key);
            } else if (key == "purchases") {
                config.purchases.clear();
                std::istringstream items{std::string(value)};
                std::string item;
                while (items >> item) {
                    config.purchases.push_back(static_cast<std::uint32_t>(
                        parse_u64(item, origin, line_no, key)));
                }
                if (config.purchases.empty()) {
                    fail_at(origin, line_no, "key 'purchases' needs at least one amount");
                }
            } else if (key == "rogue_boot") {
                config.rogue_boot = parse_bool(value, origin, line_no, key);
            } else {
                fail_at(origin, line_no, "unknown key '" + key + "' in [prepaid]");
            }
        } else if (section == "subordination") {
            if (key == "variant") {
                config.subordination_variant = parse_choice<SubordinationVariant>(
                    value,
                    {{"forward", SubordinationVariant::Forward},
                     {"local_grant", SubordinationVariant::LocalGrant}},
                    origin, line_no, key);
            } else if (key == "backing") {
                config.sigma_backing = parse_choice<SigmaBacking>(
                    value,
                    {{"dedicated_gamma", SigmaBacking::DedicatedGamma},
                     {"tau", SigmaBacking::Tau}},
                    origin, line_no, key);
            } else if (key == "service") {
                config.bonded_service = std::string(value);
            } else if (key == "request") {
                config.requested_service = std::string(value);
            } else if (key == "revoke_backing") {
                config.revoke_backing = parse_bool(value, origin, line_no, key);
            } else if (key == "foreign_dominator") {
                config.foreign_dominator = parse_bool(value, origin, line_no, key);
            } else {
                fail_at(origin, line_no, "unknown key '" + key + "' in [subordination]");
            }
        } else if (section == "transposition") {
            if (key == "privacy") {
                config.privacy = parse_choice<PrivacyMode>(
                    value,
                    {{"encrypted", PrivacyMode::Encrypted},
                     {"mac_only", PrivacyMode::MacOnly}},
                    origin, line_no, key);
            } else if (key == "order") {
                config.step_order = parse_choice<StepOrder>(
                    value,
                    {{"a_then_b", StepOrder::AThenB}, {"b_then_a", StepOrder::BThenA}},
                    origin, line_no, key);
            } else if (key == "secondary_auth") {
                config.fresh_secondary_auth =
                    parse_choice<bool>(value, {{"session", false}, {"fresh", true}},
                                       origin, line_no, key);
            } else {
                fail_at(origin, line_no, "unknown key '" + key + "' in [transposition]");
            }
        } else {  // adversary
            if (key == "action") {
                if (!AdversaryAction::parse(value)) {
                    fail_at(origin, line_no,
                            "bad adversary action '" + std::string(value) + "'");
                }
                config.adversary.emplace_back(value);
            } else {
                fail_at(origin, line_no, "unknown key '" + key + "' in [adversary]");
            }
        }
    }
    return config;
}

ScenarioConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

void apply_variant(ScenarioConfig& config, std::string_view name) {
    if (name == "acl" || name == "shared_secret") {
        config.restriction_variant = name == "acl" ? RestrictionVariant::Acl
                                                   : RestrictionVariant::SharedSecret;
        return;
    }
    if (name == "forward" || name == "local_grant") {
        config.subordination_variant = name == "forward"
                                           ? SubordinationVariant::Forward
                                           : SubordinationVariant::LocalGrant;
        return;
    }
    if (name == "principal_controlled" || name == "independent") {
        config.enrolment = name == "independent" ? EnrolmentMode::Independent
                                                 : EnrolmentMode::PrincipalControlled;
        return;
    }
    throw ConfigError("unknown variant '" + std::string(name) + "'");
}

}  // namespace transtrust
