#pragma once

// Generated ABK kernels with injected bugs, oracle-computed expected
// verdicts, and the manifest that lists them.

#include "aqed/engine.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aqed {

enum class BugClass { None, Indexing, Init, CrossLane, RelMutation, ConsistentWrong, Unresponsive };

std::string_view bug_class_name(BugClass c);
std::optional<BugClass> parse_bug_class(std::string_view s);
const std::vector<BugClass>& all_bug_classes();

struct CorpusParams {
    std::size_t batch = 4;
    unsigned width = 2;
    std::size_t stages = 1;  // 1 or 2 blocks chained through a buffer
};

struct CorpusCase {
    std::string name;
    std::uint64_t seed = 0;
    BugClass cls = BugClass::None;
    CorpusParams params;
    bool rb_mode = false;
    std::string source;
    std::string edit;  // the injected change, empty for NONE
    std::size_t bug_lane = 0;
    /// Check name -> "SAT", "UNSAT", "cap" (oracle too large) or "n/a".
    std::map<std::string, std::string> expected;
    std::vector<unsigned> oracle_widths;
};

/// Deterministic in (seed, cls, params).
CorpusCase generate(std::uint64_t seed, BugClass cls, const CorpusParams& params);

/// Same kernel and injection at another width.
CorpusCase with_width(const CorpusCase& c, unsigned width);

/// Names of the checks recorded per case.
const std::vector<std::string>& corpus_checks();

/// Builds the obligation for one named check ("intra-fc", "fc2", "strong-fc",
/// "fcd", "sac:<lane>", "rb"). Returns nullopt where the check does not apply.
std::optional<CheckObligation> corpus_obligation(const CorpusCase& c, const std::string& check);

/// Runs one named check; "sac" runs every lane and is SAT if any lane is.
std::string run_corpus_check(const CorpusCase& c, const std::string& check, Backend backend, const Budget& budget);

/// Fills `expected` from the exhaustive oracle.
void compute_expected(CorpusCase& c, const Budget& budget = {});

/// Straight-line RB-mode program of at least `ssa_lines` SSA instructions;
/// with `inject`, a spin loop on a symbolic condition sits at `at_fraction`
/// of the way through.
std::string drb_program(std::uint64_t seed, std::size_t ssa_lines, bool inject, double at_fraction = 0.5);

/// The shipped corpus: every class for seeds 1..3, one and two stages.
std::vector<CorpusCase> standard_corpus();

std::string manifest_json(const std::vector<CorpusCase>& cases, const std::string& source_dir);
/// Reads a manifest; kernel sources are loaded relative to the manifest.
std::vector<CorpusCase> read_manifest(const std::string& path);

} // namespace aqed
