// Exercises the command-line tool as a subprocess: exit codes for grants,
// denials and configuration errors, the transcript and report files a run
// leaves behind, the verification suites, and byte-identical reruns of
// both single runs and the variant matrix.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "transtrust/bytes.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult cli(const std::string& args) {
    std::string command = std::string(TRANSTRUST_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buffer[4096];
    std::size_t n = 0;
    while ((n = fread(buffer, 1, sizeof buffer, pipe)) > 0) {
        out.append(buffer, n);
    }
    int status = pclose(pipe);
    CliResult result;
    result.out = std::move(out);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path scratch_dir() {
    fs::path dir = fs::temp_directory_path() / "transtrust-cli-tests";
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::path path = scratch_dir() / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

const std::string kPosConfig =
    "[scenario]\nkind = pos\nseed = 42\n";
const std::string kPrepaidConfig =
    "[scenario]\nkind = prepaid\nseed = 42\n[prepaid]\ntotal = 10\npurchases = 3 4 2\n";

}  // namespace

TEST_CASE("a granted run exits zero and leaves transcript and report behind") {
    fs::path config = write_config("pos.cfg", kPosConfig);
    fs::path out = scratch_dir() / "run-ok";
    CliResult result = cli("run " + config.string() + " --out " + out.string());
    CHECK(result.code == 0);
    CHECK(result.out.find("outcome: completed") != std::string::npos);
    CHECK(result.out.find("exit: 0") != std::string::npos);
    CHECK(fs::exists(out / "pos_transcript.txt"));
    CHECK(fs::exists(out / "pos_report.txt"));
    CHECK(slurp(out / "pos_report.txt") == result.out);
}

TEST_CASE("a denied run exits one") {
    fs::path config = write_config("pos.cfg", kPosConfig);
    fs::path out = scratch_dir() / "run-denied";
    CliResult result = cli("run " + config.string() + " --out " + out.string() +
                           " --adversary tamper:WrappedTau:0");
    CHECK(result.code == 1);
    CHECK(result.out.find("outcome: failed") != std::string::npos);
}

TEST_CASE("configuration problems exit two with a diagnostic") {
    CHECK(cli("run /no/such/file.cfg").code == 2);

    fs::path silly = write_config("silly.cfg", "[scenario]\nkind = lottery\n");
    CliResult result = cli("run " + silly.string());
    CHECK(result.code == 2);
    CHECK(result.out.find("error:") != std::string::npos);

    fs::path config = write_config("pos.cfg", kPosConfig);
    CHECK(cli("run " + config.string() + " --adversary smash:all").code == 2);
    CHECK(cli("run " + config.string() + " --variant turbo").code == 2);
    CHECK(cli("run").code == 2);
    CHECK(cli("frobnicate").code == 2);
}

TEST_CASE("flag overrides reach the run") {
    fs::path config = write_config("pos.cfg", kPosConfig);
    fs::path out = scratch_dir() / "run-flags";
    CliResult result = cli("run " + config.string() + " --out " + out.string() +
                           " --seed 7 --privacy mac_only");
    CHECK(result.code == 0);
    CHECK(result.out.find("seed: 7") != std::string::npos);
    CHECK(result.out.find("privacy: mac_only") != std::string::npos);
    CHECK(result.out.find("a_view: device-a") != std::string::npos);
}

TEST_CASE("identical runs produce byte-identical files") {
    fs::path config = write_config("prepaid.cfg", kPrepaidConfig);
    fs::path first = scratch_dir() / "det-1";
    fs::path second = scratch_dir() / "det-2";
    CHECK(cli("run " + config.string() + " --out " + first.string()).code == 0);
    CHECK(cli("run " + config.string() + " --out " + second.string()).code == 0);
    CHECK(slurp(first / "prepaid_transcript.txt") ==
          slurp(second / "prepaid_transcript.txt"));
    CHECK(slurp(first / "prepaid_report.txt") == slurp(second / "prepaid_report.txt"));
}

TEST_CASE("the ordering suite accepts a fresh transcript and rejects garbage") {
    fs::path config = write_config("pos.cfg", kPosConfig);
    fs::path out = scratch_dir() / "verify";
    REQUIRE(cli("run " + config.string() + " --out " + out.string()).code == 0);

    CliResult ordered = cli("verify " + (out / "pos_transcript.txt").string());
    CHECK(ordered.code == 0);
    CHECK(ordered.out.find("sequence_monotone pass") != std::string::npos);
    CHECK(ordered.out.find("quote_layering pass") != std::string::npos);
    CHECK(ordered.out.find("step_blocks pass") != std::string::npos);

    // The report file is not a transcript; it must be refused, not misread.
    CHECK(cli("verify " + (out / "pos_report.txt").string()).code == 2);
    fs::path empty = write_config("empty_transcript.txt", "");
    CHECK(cli("verify " + empty.string()).code == 2);
}

TEST_CASE("replaying suites demand the run's config") {
    fs::path config = write_config("pos.cfg", kPosConfig);
    fs::path out = scratch_dir() / "suites";
    REQUIRE(cli("run " + config.string() + " --out " + out.string()).code == 0);
    std::string transcript = (out / "pos_transcript.txt").string();

    CHECK(cli("verify " + transcript + " --suite tamper").code == 2);
    CHECK(cli("verify " + transcript + " --suite tamper --config " + config.string())
              .code == 0);
    CHECK(cli("verify " + transcript + " --suite nonsense").code == 2);

    fs::path prepaid = write_config("prepaid.cfg", kPrepaidConfig);
    fs::path pout = scratch_dir() / "suites-prepaid";
    REQUIRE(cli("run " + prepaid.string() + " --out " + pout.string()).code == 0);
    std::string ptranscript = (pout / "prepaid_transcript.txt").string();
    CHECK(cli("verify " + ptranscript + " --suite clone --config " + prepaid.string())
              .code == 0);
    CHECK(cli("verify " + ptranscript + " --suite conservation --config " +
              prepaid.string())
              .code == 0);
    // Suite and scenario must agree.
    CHECK(cli("verify " + ptranscript + " --suite tamper --config " + prepaid.string())
              .code == 2);
}

TEST_CASE("the matrix walks all twelve variant rows deterministically") {
    fs::path config = write_config("pos.cfg", kPosConfig);
    fs::path first = scratch_dir() / "matrix-1";
    fs::path second = scratch_dir() / "matrix-2";

    CliResult table = cli("matrix " + config.string() + " --out " + first.string());
    CHECK(table.code == 0);
    for (const char* row : {
             "bonding/forward/honest", "bonding/forward/revoked",
             "bonding/local_grant/honest", "bonding/local_grant/revoked",
             "pos/encrypted/honest", "pos/encrypted/tamper",
             "pos/mac_only/honest", "pos/mac_only/tamper",
             "prepaid/acl/independent", "prepaid/acl/principal_controlled",
             "prepaid/shared_secret/independent",
             "prepaid/shared_secret/principal_controlled"}) {
        CAPTURE(row);
        CHECK(table.out.find(row) != std::string::npos);
    }
    CHECK(table.out.find("deny/revoked") != std::string::npos);
    CHECK(table.out.find("grant/privileged") != std::string::npos);

    CHECK(cli("matrix " + config.string() + " --out " + second.string()).code == 0);
    CHECK(slurp(first / "matrix.txt") == slurp(second / "matrix.txt"));
}

TEST_CASE("inspect prints the built registries") {
    fs::path config = write_config("bonding.cfg", "[scenario]\nkind = bonding\n");
    CliResult result = cli("inspect " + config.string());
    CHECK(result.code == 0);
    CHECK(result.out.find("registry: mno-A") != std::string::npos);
    CHECK(result.out.find("gamma serial=1") != std::string::npos);
    CHECK(result.out.find("sigma holder=camera-ap") != std::string::npos);
}
