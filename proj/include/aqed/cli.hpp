#pragma once

// Command implementations behind the aqed executable.

#include "aqed/report.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aqed {

struct RunConfig {
    std::vector<std::string> inputs;
    std::vector<std::string> modes = {"intra-fc"};
    Backend backend = Backend::Sat;
    InitPolicy policy = InitPolicy::Symbolic;
    std::optional<unsigned> width;       // overrides `const W`
    std::optional<std::size_t> batch;    // overrides `const B`
    std::map<std::string, Word> overrides;
    std::size_t fc_bound = 2;
    std::optional<std::size_t> lane;     // SAC lane; all lanes when absent
    std::optional<std::size_t> rb_bound;
    std::size_t delta = 8;
    std::size_t window = 16;
    Budget budget;
    unsigned threads = 1;
    bool rb_mode = false;
    bool minimize = true;
    std::string report_path;
    std::string trace_dir;
    std::string dimacs_dir;
    std::string out_dir;  // corpus generate
};

struct CommandResult {
    int exit_code = 0;
    Json report;
    std::string text;
};

CommandResult cmd_check(const RunConfig& cfg);
CommandResult cmd_rb(const RunConfig& cfg);
CommandResult cmd_plan(const RunConfig& cfg);
CommandResult cmd_ssa(const RunConfig& cfg);
/// inputs[0] is a replay file.
CommandResult cmd_replay(const RunConfig& cfg);
/// inputs[0] is a manifest.
CommandResult cmd_corpus_run(const RunConfig& cfg);
CommandResult cmd_corpus_generate(const RunConfig& cfg);

/// Writes the report when cfg.report_path is set.
void write_report(const RunConfig& cfg, const CommandResult& r);

} // namespace aqed
