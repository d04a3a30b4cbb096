#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "transtrust/verify.hpp"

namespace {

using namespace transtrust;

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("TRANSTRUST_OUT"); env && *env) return env;
    return "./out";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    out << content;
}

struct RunFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string privacy;
    std::string variant;
    std::vector<std::string> adversary;
};

ScenarioConfig load_with_overrides(const RunFlags& flags) {
    ScenarioConfig config = load_config_file(flags.config_path);
    if (flags.seed) config.seed = *flags.seed;
    if (!flags.privacy.empty()) {
        if (flags.privacy == "encrypted") {
            config.privacy = PrivacyMode::Encrypted;
        } else if (flags.privacy == "mac_only") {
            config.privacy = PrivacyMode::MacOnly;
        } else {
            throw ConfigError("--privacy must be encrypted or mac_only");
        }
    }
    if (!flags.variant.empty()) apply_variant(config, flags.variant);
    for (const std::string& action : flags.adversary) {
        if (!AdversaryAction::parse(action)) {
            throw ConfigError("bad adversary action '" + action + "'");
        }
        config.adversary.push_back(action);
    }
    return config;
}

int cmd_run(const RunFlags& flags) {
    ScenarioConfig config = load_with_overrides(flags);

    World world(config.seed);
    ScenarioResult result = run_scenario(world, config);

    std::filesystem::path out_dir = resolve_out_dir(flags.out_dir);
    std::filesystem::create_directories(out_dir);
    std::string stem = to_string(config.scenario);
    std::string transcript_name = stem + "_transcript.txt";

    write_file(out_dir / transcript_name, world.fabric.transcript().text());
    RunReport report = make_report(world, config, result, transcript_name);
    write_file(out_dir / (stem + "_report.txt"), report.text());

    std::cout << report.text();
    return report.exit_code;
}

int cmd_verify(const std::string& transcript_path, const std::string& suite,
               const std::string& config_path) {
    std::vector<TranscriptRecord> records = load_transcript_file(transcript_path);

    std::vector<InvariantResult> results;
    if (suite == "ordering") {
        results = verify_ordering(records);
    } else if (suite == "tamper" || suite == "clone" || suite == "conservation") {
        if (config_path.empty()) {
            throw VerifyError("suite '" + suite + "' needs --config with the run's config");
        }
        ScenarioConfig config = load_config_file(config_path);
        if (suite == "tamper") {
            results = verify_tamper(config);
        } else if (suite == "clone") {
            results = verify_clone(config);
        } else {
            results = verify_conservation(config);
        }
    } else {
        throw VerifyError("unknown suite '" + suite +
                          "' (ordering|tamper|clone|conservation)");
    }

    bool all = true;
    for (const InvariantResult& r : results) {
        std::cout << r.name << " " << (r.pass ? "pass" : "fail");
        if (!r.note.empty()) std::cout << " (" << r.note << ")";
        std::cout << "\n";
        all = all && r.pass;
    }
    return all ? 0 : 1;
}

int cmd_matrix(const RunFlags& flags) {
    ScenarioConfig base = load_with_overrides(flags);

    struct Row {
        std::string key;
        std::string outcome;
    };
    std::vector<Row> rows;
    auto run_row = [&](std::string key, const ScenarioConfig& config) {
        World world(config.seed);
        ScenarioResult result = run_scenario(world, config);
        std::string outcome;
        if (config.scenario == ScenarioKind::Pos) {
            outcome = result.transposition && result.transposition->completed
                          ? "completed"
                          : "failed";
        } else {
            outcome = result.decision.outcome_label();
        }
        rows.push_back({std::move(key), std::move(outcome)});
    };

    for (RestrictionVariant variant :
         {RestrictionVariant::Acl, RestrictionVariant::SharedSecret}) {
        for (EnrolmentMode mode :
             {EnrolmentMode::PrincipalControlled, EnrolmentMode::Independent}) {
            ScenarioConfig config;
            config.seed = base.seed;
            config.scenario = ScenarioKind::Prepaid;
            config.restriction_variant = variant;
            config.enrolment = mode;
            run_row(std::string("prepaid/") + to_string(variant) + "/" +
                        to_string(mode),
                    config);
        }
    }
    for (SubordinationVariant variant :
         {SubordinationVariant::Forward, SubordinationVariant::LocalGrant}) {
        for (bool revoked : {false, true}) {
            ScenarioConfig config;
            config.seed = base.seed;
            config.scenario = ScenarioKind::Bonding;
            config.subordination_variant = variant;
            config.revoke_backing = revoked;
            run_row(std::string("bonding/") + to_string(variant) + "/" +
                        (revoked ? "revoked" : "honest"),
                    config);
        }
    }
    for (PrivacyMode privacy : {PrivacyMode::Encrypted, PrivacyMode::MacOnly}) {
        for (bool tampered : {false, true}) {
            ScenarioConfig config;
            config.seed = base.seed;
            config.scenario = ScenarioKind::Pos;
            config.privacy = privacy;
            if (tampered) config.adversary.push_back("tamper:WrappedTau:0");
            run_row(std::string("pos/") + to_string(privacy) + "/" +
                        (tampered ? "tamper" : "honest"),
                    config);
        }
    }

    std::sort(rows.begin(), rows.end(),
              [](const Row& a, const Row& b) { return a.key < b.key; });
    std::ostringstream table;
    table << "seed: " << base.seed << "\n";
    for (const Row& row : rows) {
        table << row.key;
        for (std::size_t pad = row.key.size(); pad < 44; ++pad) table << ' ';
        table << row.outcome << "\n";
    }

    std::filesystem::path out_dir = resolve_out_dir(flags.out_dir);
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "matrix.txt", table.str());
    std::cout << table.str();
    return 0;
}

int cmd_inspect(const RunFlags& flags) {
    ScenarioConfig config = load_with_overrides(flags);
    World world(config.seed);
    build_scenario_world(world, config);
    for (const auto& [name, principal] : world.principals) {
        std::cout << "registry: " << name << "\n";
        principal.registry.dump(std::cout);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trusted-computing trust operations simulator"};
    app.require_subcommand(1);

    RunFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "execute a configured scenario");
    run->add_option("config", run_flags.config_path, "scenario config file")
        ->required();
    run->add_option("--seed", run_flags.seed, "override the run seed");
    run->add_option("--out", run_flags.out_dir, "output directory");
    run->add_option("--privacy", run_flags.privacy, "encrypted|mac_only");
    run->add_option("--variant", run_flags.variant, "variant name override");
    run->add_option("--adversary", run_flags.adversary, "adversary action, repeatable");

    std::string transcript_path, suite = "ordering", verify_config;
    CLI::App* verify = app.add_subcommand("verify", "check a transcript against a suite");
    verify->add_option("transcript", transcript_path, "transcript file")->required();
    verify->add_option("--suite", suite, "ordering|tamper|clone|conservation");
    verify->add_option("--config", verify_config, "config for replaying suites");

    RunFlags matrix_flags;
    CLI::App* matrix = app.add_subcommand("matrix", "run every variant combination");
    matrix->add_option("config", matrix_flags.config_path, "scenario config file")
        ->required();
    matrix->add_option("--seed", matrix_flags.seed, "override the run seed");
    matrix->add_option("--out", matrix_flags.out_dir, "output directory");

    RunFlags inspect_flags;
    CLI::App* inspect = app.add_subcommand("inspect", "print the built registries");
    inspect->add_option("config", inspect_flags.config_path, "scenario config file")
        ->required();
    inspect->add_option("--seed", inspect_flags.seed, "override the run seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (verify->parsed()) return cmd_verify(transcript_path, suite, verify_config);
        if (matrix->parsed()) return cmd_matrix(matrix_flags);
        return cmd_inspect(inspect_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
