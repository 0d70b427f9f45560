#include "aqed/cli.hpp"
#include "aqed/error.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace aqed;

namespace {

void add_budget(CLI::App* cmd, RunConfig& cfg, double& secs, std::uint64_t& conflicts) {
    cmd->add_option("--timeout", secs, "Seconds per obligation (0 = none)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--conflicts", conflicts, "SAT conflicts per obligation (0 = none)");
    cmd->add_option("--max-cases", cfg.budget.max_cases, "Exhaustive oracle case cap");
    cmd->add_option("--max-clauses", cfg.budget.max_clauses, "Clause cap before giving up");
}

void add_overrides(CLI::App* cmd, RunConfig& cfg, std::vector<std::string>& sets) {
    cmd->add_option("--width", cfg.width, "Override the kernel constant W")->check(CLI::Range(1u, kMaxWidth));
    cmd->add_option("--batch", cfg.batch, "Override the kernel constant B")->check(CLI::PositiveNumber);
    cmd->add_option("--set", sets, "Override a constant, NAME=VALUE")->allow_extra_args(false);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-consistency and responsiveness checks for batch-mode accelerator kernels"};
    app.require_subcommand(1);

    RunConfig cfg;
    Budget env;
    try {
        env = Budget::from_env();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }
    cfg.budget = env;
    double secs = env.max_seconds;
    std::uint64_t conflicts = env.max_conflicts;
    std::vector<std::string> sets;
    std::string backend = "sat", policy = "symbolic";
    std::string file, manifest;
    std::vector<std::string> corpus_checks;
    std::size_t rb_bound = 0;
    bool no_minimize = false;

    auto* check = app.add_subcommand("check", "Run FC-family, SAC or RB checks on an annotated kernel");
    check->add_option("--mode", cfg.modes, "intra-fc, fc, strong-fc, fcd, sac or rb (repeatable)")
        ->allow_extra_args(false)
        ->check(CLI::IsMember({"intra-fc", "fc", "strong-fc", "fcd", "strong-fcd", "sac", "rb"}));
    check->add_option("--backend", backend, "sat or oracle")->check(CLI::IsMember({"sat", "oracle"}));
    check->add_option("--policy", policy, "Initial-state policy")
        ->check(CLI::IsMember({"symbolic", "concrete", "constrained"}));
    check->add_option("--fc-bound", cfg.fc_bound, "Batches for --mode fc")->check(CLI::Range(2u, 64u));
    check->add_option("--lane", cfg.lane, "SAC lane (default: every lane)");
    check->add_option("--bound", rb_bound, "RB bound in steps for --mode rb");
    check->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::Range(1u, 256u));
    check->add_option("--report", cfg.report_path, "Write the JSON report here");
    check->add_option("--trace-dir", cfg.trace_dir, "Write replay files here (default: next to the report)");
    check->add_option("--dimacs", cfg.dimacs_dir, "Export each obligation as DIMACS into this directory");
    check->add_flag("--rb-mode", cfg.rb_mode, "Accept while loops and dynamic bounds");
    check->add_flag("--no-minimize", no_minimize, "Keep witnesses as the solver found them");
    add_overrides(check, cfg, sets);
    add_budget(check, cfg, secs, conflicts);
    check->add_option("file", file, "Kernel (.abk)")->required();

    auto* rb = app.add_subcommand("rb", "Sliding-window responsiveness campaign over the SSA program");
    rb->add_option("--bound", rb_bound, "RB bound n in steps")->required();
    rb->add_option("--delta", cfg.delta, "Window step in SSA lines")->check(CLI::PositiveNumber);
    rb->add_option("--window", cfg.window, "Initial window size in SSA lines")->check(CLI::PositiveNumber);
    rb->add_option("--report", cfg.report_path, "Write the JSON report here");
    rb->add_option("--trace-dir", cfg.trace_dir, "Write the replay file here (default: next to the report)");
    add_overrides(rb, cfg, sets);
    add_budget(rb, cfg, secs, conflicts);
    rb->add_option("file", file, "Kernel (.abk)")->required();

    auto* plan = app.add_subcommand("plan", "Show the sub-accelerator decomposition");
    plan->add_flag("--rb-mode", cfg.rb_mode, "Accept while loops and dynamic bounds");
    plan->add_option("--report", cfg.report_path, "Write the JSON report here");
    add_overrides(plan, cfg, sets);
    plan->add_option("file", file, "Kernel (.abk)")->required();

    auto* ssa = app.add_subcommand("ssa", "Print the unrolled SSA program (pc N is window line N+1)");
    ssa->add_flag("--rb-mode", cfg.rb_mode, "Accept while loops and dynamic bounds");
    add_overrides(ssa, cfg, sets);
    ssa->add_option("file", file, "Kernel (.abk)")->required();

    auto* replay = app.add_subcommand("replay", "Replay a trace file through the model and the monitor");
    replay->add_option("--report", cfg.report_path, "Write the JSON report here");
    replay->add_option("file", file, "Replay file (.trace.json)")->required();

    auto* corpus = app.add_subcommand("corpus", "Bug corpus");
    corpus->require_subcommand(1);
    auto* crun = corpus->add_subcommand("run", "Re-check every corpus case against its expected verdicts");
    crun->add_option("--manifest", manifest, "Corpus manifest")->required();
    crun->add_option("--backend", backend, "sat or oracle")->check(CLI::IsMember({"sat", "oracle"}));
    crun->add_option("--check", corpus_checks, "Restrict to these checks (intra-fc, fc2, strong-fc, fcd, sac, rb)")
        ->allow_extra_args(false);
    crun->add_option("--width", cfg.width, "Re-run every case at this width")->check(CLI::Range(1u, kMaxWidth));
    crun->add_option("--report", cfg.report_path, "Write the JSON report here");
    add_budget(crun, cfg, secs, conflicts);
    auto* cgen = corpus->add_subcommand("generate", "Write the standard corpus with oracle-computed verdicts");
    cgen->add_option("--out", cfg.out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    cfg.budget.max_seconds = secs;
    cfg.budget.max_conflicts = conflicts;
    cfg.backend = backend == "oracle" ? Backend::Exhaustive : Backend::Sat;
    cfg.policy = *parse_policy(policy);
    cfg.minimize = !no_minimize;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        try {
            if (eq == std::string::npos || eq == 0) throw std::invalid_argument(s);
            cfg.overrides[s.substr(0, eq)] = std::stoull(s.substr(eq + 1), nullptr, 0);
        } catch (const std::exception&) {
            std::cerr << "error: ConfigError: --set expects NAME=VALUE, got '" << s << "'\n";
            return 2;
        }
    }
    if (rb_bound) cfg.rb_bound = rb_bound;
    if (rb->parsed() && rb_bound == 0) {
        std::cerr << "error: ConfigError: RB bound must be at least 1\n";
        return 2;
    }
    if (!file.empty()) cfg.inputs = {file};

    CommandResult r;
    if (check->parsed()) {
        r = cmd_check(cfg);
    } else if (rb->parsed()) {
        r = cmd_rb(cfg);
    } else if (plan->parsed()) {
        r = cmd_plan(cfg);
    } else if (ssa->parsed()) {
        r = cmd_ssa(cfg);
    } else if (replay->parsed()) {
        r = cmd_replay(cfg);
    } else if (crun->parsed()) {
        cfg.inputs = {manifest};
        cfg.modes = corpus_checks;
        r = cmd_corpus_run(cfg);
    } else if (cgen->parsed()) {
        r = cmd_corpus_generate(cfg);
    }
    try {
        write_report(cfg, r);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }
    (r.exit_code >= 2 && r.exit_code != 3 ? std::cerr : std::cout) << r.text;
    return r.exit_code;
}
