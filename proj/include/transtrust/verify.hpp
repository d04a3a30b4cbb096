#pragma once

#include <iosfwd>

#include "transtrust/scenarios.hpp"

namespace transtrust {

// Raised on malformed verify input (missing file, bad transcript, wrong
// suite/config pairing); the CLI maps it to exit code 2.
class VerifyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct InvariantResult {
    std::string name;
    bool pass = false;
    std::string note;  // short cause on failure, empty when passing
};

// Structured outcome record with a stable field order, so identical runs
// serialize byte-identically.
struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string outcome;
    std::vector<std::string> detail;
    std::string transcript_file;
    std::vector<InvariantResult> invariants;
    int exit_code = 0;

    void write(std::ostream& out) const;
    std::string text() const;
    bool all_pass() const;
};

// Evaluates every invariant registered for the scenario against the
// world the run left behind.
RunReport make_report(const World& world, const ScenarioConfig& config,
                      const ScenarioResult& result, const std::string& transcript_file);

// One parsed transcript line; layout mirrors Transcript::write.
struct TranscriptRecord {
    std::uint64_t seq = 0;
    std::string phase;
    std::string from;
    std::string to;
    std::string kind;
    bool accepted = false;
    std::string payload_digest;
};

std::vector<TranscriptRecord> parse_transcript_text(std::string_view text);
std::vector<TranscriptRecord> load_transcript_file(const std::string& path);

// Named suites for the verify command. `ordering` works from the
// transcript alone; the rest re-run worlds and need the run's config.
std::vector<InvariantResult> verify_ordering(const std::vector<TranscriptRecord>& records);
std::vector<InvariantResult> verify_tamper(const ScenarioConfig& config);
std::vector<InvariantResult> verify_clone(const ScenarioConfig& config);
std::vector<InvariantResult> verify_conservation(const ScenarioConfig& config);

}  // namespace transtrust
