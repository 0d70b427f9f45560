#include "aqed/cli.hpp"
#include "aqed/corpus.hpp"
#include "aqed/drb.hpp"
#include "aqed/error.hpp"
#include "aqed/report.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aqed;
namespace fs = std::filesystem;

namespace {

const std::string kSource = AQED_SOURCE_DIR;
const std::string kCli = AQED_CLI;

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("aqed_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli + " " + args + " >" + log.string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

SsaProgram rb_ssa(const std::string& text) {
    ParseOptions po;
    po.rb_mode = true;
    return unroll_and_ssa(parse(text, po));
}

std::size_t find_line(const SsaProgram& s, Opcode op) {
    for (std::size_t pc = 0; pc < s.code.size(); ++pc)
        if (s.code[pc].op == op) return pc + 1;
    return 0;
}

const std::vector<std::string> kFcChecks = {"intra-fc", "fc2", "strong-fc", "fcd"};

} // namespace

TEST(Corpus, GenerationIsDeterministic) {
    CorpusParams p;
    p.batch = 4;
    p.width = 2;
    const CorpusCase a = generate(1, BugClass::CrossLane, p);
    const CorpusCase b = generate(1, BugClass::CrossLane, p);
    EXPECT_EQ(a.source, b.source);
    EXPECT_FALSE(a.edit.empty());
    EXPECT_NE(a.source, generate(2, BugClass::CrossLane, p).source);
}

TEST(Corpus, WidthOnlyChangesTheWidthConstant) {
    CorpusParams p;
    const CorpusCase a = generate(5, BugClass::Init, p);
    const CorpusCase b = with_width(a, 8);
    auto strip = [](const CorpusCase& c) {
        std::string s = c.source;
        s.erase(0, s.find("const W"));
        return s.substr(s.find('\n'));
    };
    EXPECT_EQ(strip(a), strip(b));
    EXPECT_NE(b.source.find("const W = 8;"), std::string::npos);
}

TEST(Corpus, NoneClassPassesFcFamilyUnderOracle) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        CorpusParams p;
        p.batch = 2 + seed % 3;
        p.stages = 1 + seed % 2;
        const CorpusCase c = generate(seed, BugClass::None, p);
        for (const auto& chk : kFcChecks) {
            const std::string v = run_corpus_check(c, chk, Backend::Exhaustive, {});
            EXPECT_TRUE(v == "UNSAT" || v == "cap") << c.name << " " << chk << " " << v;
        }
        EXPECT_EQ(run_corpus_check(c, "intra-fc", Backend::Exhaustive, {}), "UNSAT");
    }
}

TEST(Corpus, ConsistentWrongIsOnlyCaughtBySac) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        CorpusParams p;
        p.batch = 3;
        const CorpusCase c = generate(seed, BugClass::ConsistentWrong, p);
        EXPECT_EQ(run_corpus_check(c, "intra-fc", Backend::Exhaustive, {}), "UNSAT");
        EXPECT_EQ(run_corpus_check(c, "strong-fc", Backend::Exhaustive, {}), "UNSAT");
        EXPECT_EQ(run_corpus_check(c, "sac", Backend::Exhaustive, {}), "SAT");
    }
}

TEST(Corpus, ShippedManifestIsReproducible) {
    const auto cases = read_manifest(kSource + "/corpus/manifest.json");
    ASSERT_EQ(cases.size(), standard_corpus().size());
    for (const auto& shipped : cases) {
        CorpusCase fresh = generate(shipped.seed, shipped.cls, shipped.params);
        EXPECT_EQ(fresh.source, shipped.source) << shipped.name;
        compute_expected(fresh);
        EXPECT_EQ(fresh.expected, shipped.expected) << shipped.name;
    }
}

TEST(Corpus, StrongFcBugsAreAlsoIntraFcBugs) {
    for (const auto& c : read_manifest(kSource + "/corpus/manifest.json"))
        if (c.expected.at("strong-fc") == "SAT") EXPECT_EQ(c.expected.at("intra-fc"), "SAT") << c.name;
}

TEST(Corpus, ManifestRoundTrip) {
    const fs::path dir = scratch("manifest");
    std::vector<CorpusCase> cases = {generate(3, BugClass::Indexing, {}), generate(4, BugClass::Unresponsive, {})};
    for (auto& c : cases) {
        c.expected = {{"intra-fc", "SAT"}};
        write(dir / (c.name + ".abk"), c.source);
    }
    write(dir / "manifest.json", manifest_json(cases, "."));
    const auto back = read_manifest((dir / "manifest.json").string());
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_EQ(back[k].source, cases[k].source);
        EXPECT_EQ(back[k].cls, cases[k].cls);
        EXPECT_EQ(back[k].rb_mode, cases[k].rb_mode);
        EXPECT_EQ(back[k].expected, cases[k].expected);
    }
}

TEST(Corpus, DrbProgramHasRequestedLength) {
    EXPECT_GE(rb_ssa(drb_program(2, 300, false)).code.size(), 300u);
    const SsaProgram s = rb_ssa(drb_program(2, 300, true));
    EXPECT_TRUE(s.has_loops());
    EXPECT_FALSE(rb_ssa(drb_program(2, 300, false)).has_loops());
}

TEST(Drb, SingleLineWindowInterface) {
    const SsaProgram s = rb_ssa("var a: 8;\nvar b: 8;\nvar x: 8;\nx := a + b;\n");
    const std::size_t line = find_line(s, Opcode::Add);
    ASSERT_GT(line, 0u);
    WindowState w;
    w.top_line = w.bottom_line = line;
    const SubModel sm = window_to_submodel(s, w);
    ASSERT_EQ(sm.input_names.size(), 2u);
    EXPECT_EQ(sm.input_names[0].substr(0, 2), "a.");
    EXPECT_EQ(sm.input_names[1].substr(0, 2), "b.");
    ASSERT_EQ(sm.output_names.size(), 1u);
    EXPECT_EQ(sm.output_names[0], s.values[s.code[line - 1].dst].name);
    EXPECT_EQ(sm.model->program.code.size(), 1u);
}

TEST(Drb, PrefixWindowReadsProgramInputs) {
    const SsaProgram s = rb_ssa("var in[3]: 8;\nvar v: 8;\nv := in[0] + in[2];\nv := v ^ in[1];\n");
    WindowState w;
    w.top_line = 1;
    w.bottom_line = find_line(s, Opcode::Add);
    const SubModel sm = window_to_submodel(s, w);
    EXPECT_EQ(sm.input_names, (std::vector<std::string>{"in[0]", "in[2]"}));
}

TEST(Drb, WindowInsideLoopKeepsBackEdge) {
    const std::string text = "var in: 4;\nvar f: 4;\nvar g: 4;\nf := in;\nwhile (f == 3) {\n  g := g + 1;\n}\n";
    const SsaProgram s = rb_ssa(text);
    const std::size_t head = find_line(s, Opcode::LoopHead);
    const std::size_t back = find_line(s, Opcode::LoopBack);
    WindowState w;
    w.top_line = w.bottom_line = head + 1;  // strictly inside the body
    const SubModel sm = window_to_submodel(s, w);
    EXPECT_LE(sm.top, head);
    EXPECT_EQ(sm.bottom, back);
    EXPECT_TRUE(sm.model->program.has_loops());
    const CheckObligation obl = build_rb(sm.model, 50, InitPolicy::Symbolic);
    const CheckResult r = check(obl, Backend::Sat);
    ASSERT_EQ(r.verdict, Verdict::Sat);
    ASSERT_TRUE(r.trace);
    EXPECT_TRUE(confirms(obl, *r.trace));
    // the witness really runs past the bound
    std::vector<Word> mem = r.trace->initial_states[0].memory;
    place_batch(*sm.model, r.trace->batches[0][0], mem);
    EXPECT_FALSE(execute_bounded(*sm.model, mem, 50));
}

TEST(Drb, LoopFreeProgramReachesEndOfCode) {
    const SsaProgram s = rb_ssa(drb_program(4, 200, false));
    DrbOptions o;
    o.bound = s.code.size();
    const DrbCampaign c = slide(s, o);
    EXPECT_TRUE(c.reached_end);
    EXPECT_FALSE(c.failed);
    for (const auto& w : c.state.history)
        if (w.verdict) EXPECT_EQ(*w.verdict, Verdict::Unsat);
    for (bool b : c.coverage()) EXPECT_TRUE(b);
    EXPECT_EQ(history_violation(c.state, c.lines), std::nullopt);
}

TEST(Drb, InjectedLoopStopsAtFirstWindowWithHead) {
    const SsaProgram s = rb_ssa(drb_program(4, 200, true));
    const std::size_t head = find_line(s, Opcode::LoopHead);
    DrbOptions o;
    o.bound = s.code.size();
    const DrbCampaign c = slide(s, o);
    ASSERT_TRUE(c.failed);
    const auto& h = c.state.history;
    for (std::size_t k = 0; k + 1 < h.size(); ++k) EXPECT_LT(h[k].covered_bottom, head);
    EXPECT_LE(h.back().covered_top, head);
    EXPECT_GE(h.back().covered_bottom, head);
    ASSERT_TRUE(c.failing_result->trace);
    EXPECT_TRUE(confirms(*c.failing_obligation, *c.failing_result->trace));
    EXPECT_EQ(history_violation(c.state, c.lines), std::nullopt);
}

TEST(Drb, TinyBudgetShrinksAndTerminates) {
    const SsaProgram s = rb_ssa(drb_program(1, 120, true));
    DrbOptions o;
    o.bound = 200;
    o.budget.max_seconds = 1e-9;
    const DrbCampaign c = slide(s, o);
    EXPECT_TRUE(c.reached_end || c.failed);
    bool shrank = false;
    for (const auto& w : c.state.history) shrank |= w.phase == WindowPhase::Shrinking;
    EXPECT_TRUE(shrank);
    EXPECT_EQ(history_violation(c.state, c.lines), std::nullopt);
}

TEST(Drb, EmptyInterfaceExtendsByOneLine) {
    // line 1 defines a value nobody reads
    SsaProgram s;
    s.cells.push_back(CellInfo{"x", 8, Region::NonRelevant, CellKind::Storage});
    s.values = {SsaValueInfo{"dead", 8, 0}, SsaValueInfo{"k", 8, 1}};
    Instr dead;
    dead.op = Opcode::Const;
    dead.dst = 0;
    dead.imm = 1;
    dead.width = 8;
    Instr k = dead;
    k.dst = 1;
    k.imm = 2;
    Instr st;
    st.op = Opcode::Store;
    st.base = 0;
    st.a = 1;
    s.code = {dead, k, st};
    WindowState w;
    EXPECT_THROW(window_to_submodel(s, w), Error);
    DrbOptions o;
    o.bound = 10;
    o.window = 1;
    const DrbCampaign c = slide(s, o);
    ASSERT_GE(c.state.history.size(), 2u);
    EXPECT_FALSE(c.state.history[0].verdict);
    EXPECT_EQ(c.state.history[1].bottom, 2u);
    EXPECT_TRUE(c.reached_end);
    EXPECT_EQ(history_violation(c.state, c.lines), std::nullopt);
}

TEST(Drb, HistoryChecksCatchBadMoves) {
    WindowState w;
    WindowRecord a;
    a.top = 1;
    a.bottom = 8;
    a.covered_top = 1;
    a.covered_bottom = 8;
    a.verdict = Verdict::Unsat;
    WindowRecord b = a;  // passed but did not grow
    w.history = {a, b};
    EXPECT_TRUE(history_violation(w, 20));
    b.bottom = b.covered_bottom = 16;
    w.history = {a, b};
    EXPECT_FALSE(history_violation(w, 20));
    a.verdict = Verdict::Unknown;  // timed out, must shrink
    b.phase = WindowPhase::Shrinking;
    w.history = {a, b};
    EXPECT_TRUE(history_violation(w, 20));
    b.top = 5;
    b.bottom = b.covered_bottom = 8;
    w.history = {a, b};
    EXPECT_FALSE(history_violation(w, 20));
}

TEST(Drb, RejectsZeroBound) {
    DrbOptions o;
    EXPECT_THROW(slide(rb_ssa("var x: 2;\nx := 1;\n"), o), Error);
}

TEST(Report, TraceRoundTrip) {
    const CorpusCase c = generate(1, BugClass::CrossLane, {});
    const CheckObligation obl = *corpus_obligation(c, "strong-fc");
    const CheckResult r = check(obl, Backend::Sat);
    ASSERT_TRUE(r.trace);
    const CounterexampleTrace back = trace_from_json(Json::parse(trace_to_json(*r.trace).dump()));
    EXPECT_EQ(back.initial_states, r.trace->initial_states);
    ASSERT_EQ(back.batches.size(), r.trace->batches.size());
    for (std::size_t k = 0; k < back.batches.size(); ++k) EXPECT_EQ(back.batches[k], r.trace->batches[k]);
    EXPECT_EQ(back.lane, r.trace->lane);
    EXPECT_EQ(back.lane_prime, r.trace->lane_prime);
    EXPECT_TRUE(confirms(obl, back));
}

TEST(Report, ExitCodesByErrorFamily) {
    EXPECT_EQ(exit_code_for(ErrorKind::Annotation), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::Syntax), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::Config), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::Composability), 4);
    EXPECT_EQ(exit_code_for(ErrorKind::ReplayMismatch), 5);
    EXPECT_EQ(exit_code_for(ErrorKind::Internal), 6);
}

TEST(Cli, BugFreeTwoBlockKernelIsClean) {
    RunConfig cfg;
    cfg.inputs = {kSource + "/corpus/none_s2_b4_w2_k2.abk"};
    const CommandResult r = cmd_check(cfg);
    EXPECT_EQ(r.exit_code, 0) << r.text;
    EXPECT_EQ(r.report["counts"]["T"], 2);
    EXPECT_EQ(r.report["counts"]["B"], 0);
    EXPECT_EQ(r.report["counts"]["C"], 2);
}

TEST(Cli, CrossLaneCaseIsBuggyAndWritesTrace) {
    const fs::path dir = scratch("crosslane");
    RunConfig cfg;
    cfg.inputs = {kSource + "/corpus/cross_lane_s1_b4_w2_k1.abk"};
    cfg.report_path = (dir / "report.json").string();
    const CommandResult r = cmd_check(cfg);
    write_report(cfg, r);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_GE(r.report["counts"]["B"].get<int>(), 1);
    const std::string trace = r.report["results"][0]["trace_file"];
    ASSERT_TRUE(fs::exists(trace));
    RunConfig rc;
    rc.inputs = {trace};
    const CommandResult rep = cmd_replay(rc);
    EXPECT_EQ(rep.exit_code, 0) << rep.text;
    EXPECT_TRUE(rep.report["monitor"]["fc_check"].get<bool>());
    EXPECT_TRUE(fs::exists(dir / "report.json"));
}

TEST(Cli, MissingAnnotationIsExitTwo) {
    const fs::path dir = scratch("annot");
    write(dir / "k.abk",
          "var d[2]: 2;\nvar o[2]: 2;\n%IN_SIZE 1\n%BATCH_MEM_IN d\n%IN_ALLOC_RULE in(x) = [x : x + 1]\n"
          "// ===ACC1 START===\no[0] := d[0];\n// ===ACC1 END===\n%OUT_SIZE 1\n%OUT_BATCH_SIZE 2\n"
          "%BATCH_MEM_OUT o\n%OUT_ALLOC_RULE out(x) = [x : x + 1]\n");
    const int code = run_cli("check --mode intra-fc " + (dir / "k.abk").string(), dir / "log");
    EXPECT_EQ(code, 2);
    EXPECT_NE(slurp(dir / "log").find("AnnotationError"), std::string::npos);
}

TEST(Cli, RbCommand) {
    RunConfig cfg;
    cfg.inputs = {kSource + "/corpus/none_s1_b4_w2_k1.abk"};
    cfg.rb_bound = 1000;
    EXPECT_EQ(cmd_rb(cfg).exit_code, 0);
    cfg.inputs = {kSource + "/corpus/unresponsive_s1_b4_w2_k1.abk"};
    const CommandResult bad = cmd_rb(cfg);
    EXPECT_EQ(bad.exit_code, 1);
    EXPECT_TRUE(bad.report["campaign"].contains("witness"));
    cfg.rb_bound = 0;
    EXPECT_EQ(cmd_rb(cfg).exit_code, 2);
}

TEST(Cli, WidthNeedsWidthConstant) {
    RunConfig cfg;
    cfg.inputs = {kSource + "/kernels/aes_two_stage.abk"};
    cfg.width = 4;
    const CommandResult r = cmd_plan(cfg);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.text.find("--width"), std::string::npos);
}

TEST(Cli, PlanOfAesKernel) {
    const fs::path dir = scratch("plan");
    EXPECT_EQ(run_cli("plan " + kSource + "/kernels/aes_two_stage.abk", dir / "log"), 0);
    EXPECT_NE(slurp(dir / "log").find("T=2 P=2"), std::string::npos);
}

TEST(Cli, ExitCodeContractOnCorpus) {
    const fs::path dir = scratch("contract");
    for (const auto& c : read_manifest(kSource + "/corpus/manifest.json")) {
        const std::string file = kSource + "/corpus/" + c.name + ".abk";
        if (c.rb_mode) {
            EXPECT_EQ(run_cli("rb --bound 64 " + file, dir / "log"), 1) << c.name;
            continue;
        }
        bool any = false;
        for (const auto& chk : kFcChecks) any |= c.expected.at(chk) == "SAT";
        any |= c.expected.at("sac") == "SAT";
        const int code = run_cli("check --mode intra-fc --mode fc --mode strong-fc --mode fcd --mode sac " + file,
                                 dir / "log");
        EXPECT_EQ(code, any ? 1 : 0) << c.name << "\n" << slurp(dir / "log");
    }
}

TEST(Cli, CorpusRunAgreesWithManifest) {
    RunConfig cfg;
    cfg.inputs = {kSource + "/corpus/manifest.json"};
    cfg.modes.clear();
    const CommandResult r = cmd_corpus_run(cfg);
    EXPECT_EQ(r.exit_code, 0) << r.text;
    EXPECT_GT(r.report["agree"].get<int>(), 100);
    EXPECT_EQ(r.report["disagree"], 0);
}

TEST(Cli, DimacsExport) {
    const fs::path dir = scratch("dimacs");
    RunConfig cfg;
    cfg.inputs = {kSource + "/corpus/none_s1_b4_w2_k1.abk"};
    cfg.dimacs_dir = dir.string();
    EXPECT_EQ(cmd_check(cfg).exit_code, 0);
    const std::string cnf = slurp(dir / "ACC1_intra-fc.cnf");
    EXPECT_NE(cnf.find("p cnf "), std::string::npos);
}

TEST(Corpus, IntraFcWitnessConfirmsWithEitherLaneOrder) {
    CorpusParams p;
    p.batch = 3;
    const CorpusCase c = generate(3, BugClass::Indexing, p);
    const CheckObligation obl = *corpus_obligation(c, "intra-fc");
    const CheckResult r = check(obl, Backend::Sat);
    ASSERT_EQ(r.verdict, Verdict::Sat);
    ASSERT_TRUE(r.trace);
    EXPECT_TRUE(confirms(obl, *r.trace));
    CounterexampleTrace swapped = *r.trace;
    std::swap(swapped.lane, swapped.lane_prime);
    EXPECT_TRUE(confirms(obl, swapped));
}
