// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "aqed/corpus.hpp"
#include "aqed/drb.hpp"
#include "aqed/kernel.hpp"
#include "aqed/monitor.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace aqed;

namespace {

// pinned limits
constexpr std::size_t kMinEquivObligations = 200;
constexpr double kEquivSeconds = 600;
constexpr double kCompletenessSeconds = 600;
constexpr std::size_t kMinCompletenessCases = 10;
constexpr std::size_t kComposeSamples = 100;
constexpr double kDetectSeconds = 60;
constexpr std::size_t kDrbLines = 500;
constexpr std::size_t kConsistentRuns = 100;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Line {
    bool pass = true;
    std::ostringstream detail;
    std::vector<std::string> problems;

    void fail(const std::string& why) {
        pass = false;
        if (problems.size() < 5) problems.push_back(why);
    }
};

int failures = 0;

void report(int n, const char* title, const Line& l) {
    std::printf("%s %d %s: %s", l.pass ? "PASS" : "FAIL", n, title, l.detail.str().c_str());
    for (const auto& p : l.problems) std::printf(" | %s", p.c_str());
    std::printf("\n");
    std::fflush(stdout);
    failures += !l.pass;
}

LoadedKernel load(const CorpusCase& c) {
    ParseOptions po;
    po.rb_mode = c.rb_mode;
    return load_kernel(c.source, po);
}

std::vector<CellId> relevant_cells(const AcceleratorModel& m) {
    std::vector<CellId> out;
    for (CellId c = 0; c < m.layout.cells.size(); ++c)
        if (m.layout.cells[c].region == Region::Relevant) out.push_back(c);
    return out;
}

// Calls fn for every value vector over `widths`.
void for_each_valuation(const std::vector<unsigned>& widths, const std::function<void(const std::vector<Word>&)>& fn) {
    std::vector<Word> v(widths.size(), 0);
    for (;;) {
        fn(v);
        std::size_t k = 0;
        for (; k < v.size(); ++k) {
            if (v[k] < width_mask(widths[k])) {
                ++v[k];
                break;
            }
            v[k] = 0;
        }
        if (k == v.size()) return;
    }
}

void for_each_batch(const AcceleratorModel& m, const std::function<void(const InputBatch&)>& fn) {
    std::vector<unsigned> widths;
    for (std::size_t j = 0; j < m.batch_size; ++j)
        for (std::size_t w = 0; w < m.in_words; ++w) widths.push_back(m.data_width);
    // corpus kernels have a single action
    for_each_valuation(widths, [&](const std::vector<Word>& v) {
        InputBatch b;
        for (std::size_t j = 0; j < m.batch_size; ++j)
            b.lanes.push_back(Lane{0, std::vector<Word>(v.begin() + j * m.in_words, v.begin() + (j + 1) * m.in_words)});
        fn(b);
    });
}

InputBatch random_batch(const AcceleratorModel& m, std::mt19937_64& rng) {
    InputBatch b;
    for (std::size_t j = 0; j < m.batch_size; ++j) {
        Lane l;
        l.action = m.action_count > 1 ? rng() % m.action_count : 0;
        for (std::size_t w = 0; w < m.in_words; ++w) l.data.push_back(rng() & width_mask(m.data_width));
        b.lanes.push_back(l);
    }
    return b;
}

// Direct execution of the whole program body through the AST interpreter.
struct Direct {
    const AbkProgram& p;
    int first, last, spec;

    explicit Direct(const AbkProgram& prog)
        : p(prog), first(prog.leaf_blocks().front()), last(prog.leaf_blocks().back()), spec(prog.spec_block()) {}

    OutputBatch run(std::vector<Word>& storage, const InputBatch& batch) const {
        store_batch(p, first, batch, storage);
        interpret(p, storage);
        return load_outputs(p, last, storage);
    }

    OutputLane spec_lane(std::vector<Word> storage, const Lane& lane) const {
        store_batch(p, spec, InputBatch{{lane}}, storage);
        interpret(p, storage, spec);
        return load_outputs(p, spec, storage).at(0);
    }
};

// Storage with the relevant cells set and everything else at its initializer.
std::vector<Word> storage_with(const AbkProgram& p, const std::vector<CellId>& rel, const std::vector<Word>& vals) {
    std::vector<Word> s = initial_storage(p);
    for (std::size_t k = 0; k < rel.size(); ++k) s.at(rel[k]) = vals[k];
    return s;
}

std::vector<unsigned> cell_widths(const AcceleratorModel& m, const std::vector<CellId>& cells) {
    std::vector<unsigned> w;
    for (CellId c : cells) w.push_back(m.layout.cells[c].width);
    return w;
}

// Exhaustive spec equality of the AST program: every relevant valuation and
// every batch, each lane against the spec block.
bool program_meets_spec(const CorpusCase& c, std::string& why) {
    const LoadedKernel k = load(c);
    const Direct d(k.prog);
    const auto rel = relevant_cells(*k.model);
    bool ok = true;
    for_each_valuation(cell_widths(*k.model, rel), [&](const std::vector<Word>& rv) {
        if (!ok) return;
        for_each_batch(*k.model, [&](const InputBatch& b) {
            if (!ok) return;
            std::vector<Word> s = storage_with(k.prog, rel, rv);
            const OutputBatch out = d.run(s, b);
            for (std::size_t j = 0; j < b.lanes.size() && ok; ++j)
                if (out[j] != d.spec_lane(storage_with(k.prog, rel, rv), b.lanes[j])) {
                    ok = false;
                    why = c.name + " lane " + std::to_string(j) + " differs from the spec";
                }
        });
    });
    return ok;
}

// Relevant valuations reachable by any sequence of batches from an allowed
// initial state.
std::vector<std::vector<Word>> reachable_relevant(const AcceleratorModel& m) {
    const auto rel = relevant_cells(m);
    std::set<std::vector<Word>> seen;
    std::vector<std::vector<Word>> frontier;
    for_each_valuation(cell_widths(m, rel), [&](const std::vector<Word>& v) {
        for (std::size_t k = 0; k < rel.size(); ++k)
            if (m.initial_values[rel[k]] && *m.initial_values[rel[k]] != v[k]) return;
        if (seen.insert(v).second) frontier.push_back(v);
    });
    while (!frontier.empty()) {
        std::vector<Word> v = frontier.back();
        frontier.pop_back();
        MachineState s = default_initial_state(m);
        for (std::size_t k = 0; k < rel.size(); ++k) s.memory[rel[k]] = v[k];
        for_each_batch(m, [&](const InputBatch& b) {
            const auto tr = run_batch(m, s, b, RunOptions{kDefaultStepBudget, false, false});
            std::vector<Word> next;
            for (CellId c : rel) next.push_back(tr.final_state().memory[c]);
            if (seen.insert(next).second) frontier.push_back(next);
        });
    }
    return {seen.begin(), seen.end()};
}

// Composed model against the spec over the given relevant valuations.
bool composed_meets_spec(const CorpusCase& c, const std::vector<std::vector<Word>>& rels) {
    const LoadedKernel k = load(c);
    const Direct d(k.prog);
    const auto rel = relevant_cells(*k.model);
    bool ok = true;
    for (const auto& rv : rels) {
        MachineState s = default_initial_state(*k.model);
        for (std::size_t x = 0; x < rel.size(); ++x) s.memory[rel[x]] = rv[x];
        for_each_batch(*k.model, [&](const InputBatch& b) {
            if (!ok) return;
            const auto tr = run_batch(*k.model, s, b, RunOptions{kDefaultStepBudget, false, false});
            for (std::size_t j = 0; j < b.lanes.size() && ok; ++j)
                ok = tr.outputs.back()[j] == d.spec_lane(storage_with(k.prog, rel, rv), b.lanes[j]);
        });
    }
    return ok;
}

// Replays a SAT trace: the violation must confirm, and FC-family traces must
// also trip the monitor.
bool replays(const CheckObligation& obl, const CheckResult& r, std::string& why) {
    if (!r.trace) {
        why = "SAT without a trace";
        return false;
    }
    if (!confirms(obl, *r.trace)) {
        why = "trace does not confirm";
        return false;
    }
    if (is_fc_family(obl.mode) && !replay_monitor(*r.trace, obl, false).fc_check) {
        why = "monitor misses the violation";
        return false;
    }
    return true;
}

std::vector<std::string> checks_of(const CorpusCase& c) {
    std::vector<std::string> out = {"intra-fc", "fc2", "strong-fc", "fcd", "rb"};
    for (std::size_t j = 0; j < c.params.batch; ++j) out.push_back("sac:" + std::to_string(j));
    return out;
}

void criterion_backend_equivalence() {
    Line l;
    const auto t0 = Clock::now();
    Budget budget;
    budget.max_cases = std::uint64_t{1} << 21;
    std::size_t compared = 0, agree = 0, capped = 0, sat = 0, replayed = 0;
    for (const auto& base : standard_corpus()) {
        for (unsigned w = 1; w <= 3; ++w) {
            const CorpusCase c = with_width(base, w);
            for (const auto& chk : checks_of(c)) {
                std::optional<CheckObligation> obl;
                try {
                    obl = corpus_obligation(c, chk);
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::NotApplicable) continue;
                    throw;
                }
                if (!obl) continue;
                CheckResult ro, rs;
                try {
                    ro = check(*obl, Backend::Exhaustive, budget);
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::ExplosionCap) {
                        ++capped;
                        continue;
                    }
                    if (e.kind() == ErrorKind::NotApplicable || e.kind() == ErrorKind::StepBudgetExceeded) continue;
                    throw;
                }
                try {
                    rs = check(*obl, Backend::Sat);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::NotApplicable) throw;
                    continue;  // FC encodings need loop-free models
                }
                ++compared;
                if (ro.verdict == rs.verdict) {
                    ++agree;
                } else {
                    l.fail(c.name + " " + chk + ": oracle " + std::string(verdict_name(ro.verdict)) + " sat " +
                           std::string(verdict_name(rs.verdict)));
                }
                for (const CheckResult* r : {&ro, &rs}) {
                    if (r->verdict != Verdict::Sat) continue;
                    ++sat;
                    std::string why;
                    if (replays(*obl, *r, why))
                        ++replayed;
                    else
                        l.fail(c.name + " " + chk + ": " + why);
                }
            }
        }
    }
    const double secs = since(t0);
    if (compared < kMinEquivObligations) l.fail("too few obligations");
    if (secs > kEquivSeconds) l.fail("over time");
    l.detail << compared << " obligations compared (min " << kMinEquivObligations << "), " << agree
             << " agree, " << capped << " skipped at the oracle case cap, " << replayed << "/" << sat
             << " SAT traces replay, " << static_cast<int>(secs) << " s (limit " << kEquivSeconds << " s)";
    report(1, "backend equivalence", l);
}

std::vector<CorpusCase> none_family() {
    std::vector<CorpusCase> out;
    std::uint64_t seed = 1;
    for (std::size_t stages : {1, 2})
        for (std::size_t b : {2, 3, 4})
            for (unsigned w : {1u, 2u, 3u}) {
                CorpusParams p;
                p.batch = b;
                p.width = w;
                p.stages = stages;
                out.push_back(generate(seed++, BugClass::None, p));
            }
    return out;
}

void criterion_soundness() {
    Line l;
    const auto t0 = Clock::now();
    std::size_t kernels = 0, obligations = 0, alarms = 0;
    for (const auto& c : none_family()) {
        std::string why;
        if (!program_meets_spec(c, why)) {
            l.fail("generated NONE kernel is wrong: " + why);
            continue;
        }
        ++kernels;
        for (const char* chk : {"intra-fc", "fc2", "strong-fc"}) {
            const CheckObligation obl = *corpus_obligation(c, chk);
            Verdict v;
            try {
                Budget b;
                b.max_cases = std::uint64_t{1} << 22;
                v = check(obl, Backend::Exhaustive, b).verdict;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::ExplosionCap) throw;
                v = check(obl, Backend::Sat).verdict;
            }
            ++obligations;
            if (v != Verdict::Unsat) {
                ++alarms;
                l.fail(c.name + " " + chk + " " + std::string(verdict_name(v)));
            }
        }
    }
    if (kernels == 0) l.fail("no kernels");
    l.detail << kernels << " NONE kernels spec-equal by enumeration, widths 1-3; " << obligations
             << " FC/strong-FC/intra-FC obligations, " << alarms << " false alarms (limit 0), "
             << static_cast<int>(since(t0)) << " s";
    report(2, "soundness", l);
}

void criterion_completeness() {
    Line l;
    const auto t0 = Clock::now();
    // clean side
    std::size_t premises = 0, correct = 0;
    std::uint64_t seed = 100;
    for (std::size_t stages : {1, 2})
        for (std::size_t b : {2, 3, 4})
            for (unsigned w : {1u, 2u}) {
                CorpusParams p;
                p.batch = b;
                p.width = w;
                p.stages = stages;
                const CorpusCase c = generate(seed++, BugClass::None, p);
                const LoadedKernel k = load(c);
                bool sub_ok = true;
                for (const auto& sub : k.plan.stages)
                    sub_ok &= check(build_strong_fc(sub, InitPolicy::Symbolic, true), Backend::Exhaustive).verdict ==
                              Verdict::Unsat;
                const auto reach = reachable_relevant(*k.model);
                bool sac_ok = true;
                for (std::size_t j = 0; j < b; ++j)
                    sac_ok &= check(build_sac(k.model, *k.spec, j, reach, InitPolicy::Constrained),
                                    Backend::Exhaustive)
                                  .verdict == Verdict::Unsat;
                if (!sub_ok || !sac_ok) continue;
                ++premises;
                if (composed_meets_spec(c, reach))
                    ++correct;
                else
                    l.fail(c.name + " passes strong-FCD and SAC but is not spec-equal");
            }
    // buggy side
    std::size_t buggy_sac_pass = 0, caught = 0;
    for (BugClass cls : {BugClass::CrossLane, BugClass::RelMutation})
        for (std::uint64_t s = 1; s <= 20; ++s) {
            CorpusParams p;
            p.batch = 2 + s % 3;
            p.width = 1 + s % 2;
            p.stages = 1 + (s / 3) % 2;
            const CorpusCase c = generate(200 + s, cls, p);
            std::string why;
            if (program_meets_spec(c, why)) continue;  // injection happened to be harmless
            if (run_corpus_check(c, "sac", Backend::Exhaustive, {}) != "UNSAT") continue;
            ++buggy_sac_pass;
            if (run_corpus_check(c, "strong-fc", Backend::Exhaustive, {}) == "SAT")
                ++caught;
            else
                l.fail(c.name + " is wrong, passes SAC, and strong FC misses it");
        }
    const double secs = since(t0);
    if (premises < kMinCompletenessCases) l.fail("too few clean cases meet the premises");
    if (buggy_sac_pass < kMinCompletenessCases) l.fail("too few buggy cases pass SAC");
    if (secs > kCompletenessSeconds) l.fail("over time");
    l.detail << correct << "/" << premises << " cases with strong-FCD sub-models and SAC over reachable "
             << "relevant states are spec-equal (min " << kMinCompletenessCases << "); " << caught << "/"
             << buggy_sac_pass << " buggy SAC-passing cases have strong FC SAT (min " << kMinCompletenessCases
             << "), " << static_cast<int>(secs) << " s";
    report(3, "completeness", l);
}

void criterion_composition() {
    Line l;
    std::size_t decomps = 0, samples = 0, implication_cases = 0, antecedent = 0;
    std::mt19937_64 rng(2024);
    for (const auto& c : standard_corpus()) {
        const LoadedKernel k = load(c);
        const AbkProgram& p = k.prog;
        const AcceleratorModel m = compose(k.plan);
        const Direct d(p);
        const auto rel = relevant_cells(m);
        ++decomps;
        for (std::size_t t = 0; t < kComposeSamples; ++t) {
            MachineState s = default_initial_state(m);
            for (CellId x = 0; x < p.cells.size(); ++x) s.memory[x] = rng() & width_mask(p.cells[x].width);
            const InputBatch batch = random_batch(m, rng);
            std::vector<Word> direct(s.memory.begin(), s.memory.begin() + p.cells.size());
            std::optional<OutputBatch> expect;
            try {
                expect = d.run(direct, batch);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::StepBudgetExceeded) throw;
            }
            std::vector<Word> mem = s.memory;
            place_batch(m, batch, mem);
            const bool finished = execute_bounded(m, mem, kDefaultStepBudget).has_value();
            ++samples;
            if (!expect) {
                if (finished) l.fail(c.name + ": composed run finishes where direct execution spins");
                continue;
            }
            if (!finished) {
                l.fail(c.name + ": composed run spins");
                continue;
            }
            if (read_outputs(m, mem) != *expect) l.fail(c.name + ": outputs differ from direct execution");
            for (CellId x : rel)
                if (x < p.cells.size() && mem[x] != direct[x]) l.fail(c.name + ": relevant state differs");
        }
    }
    // strong-FCD of every stage implies strong-FCD of the composition
    std::vector<CorpusCase> chains;
    for (const auto& c : standard_corpus())
        if (c.params.stages == 2 && !c.rb_mode) chains.push_back(c);
    std::uint64_t seed = 300;
    for (BugClass cls : all_bug_classes())
        for (std::size_t b : {2, 3}) {
            if (cls == BugClass::Unresponsive) continue;
            CorpusParams p;
            p.batch = b;
            p.width = 1;
            p.stages = 2;
            chains.push_back(generate(seed++, cls, p));
        }
    for (const auto& c : chains) {
        const LoadedKernel k = load(c);
        try {
            bool all_sub = true;
            for (const auto& sub : k.plan.stages)
                all_sub &= check(build_strong_fc(sub, InitPolicy::Symbolic, true), Backend::Exhaustive).verdict ==
                           Verdict::Unsat;
            const Verdict whole = check(build_strong_fc(k.model, InitPolicy::Symbolic, true), Backend::Exhaustive).verdict;
            ++implication_cases;
            if (all_sub) {
                ++antecedent;
                if (whole != Verdict::Unsat) l.fail(c.name + ": stages pass strong-FCD, composition does not");
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ExplosionCap) throw;
        }
    }
    if (antecedent == 0) l.fail("implication never exercised");
    l.detail << decomps << " decompositions x " << kComposeSamples << " random inputs (" << samples
             << " runs) bit-exact against direct execution; strong-FCD implication on " << implication_cases
             << " exhaustively checked chains, " << antecedent << " with every stage passing";
    report(4, "composition fidelity", l);
}

void criterion_detection() {
    Line l;
    double worst = 0;
    std::size_t detected = 0, cw = 0, rb = 0;
    for (std::size_t b : {4, 8, 16}) {
        CorpusParams p;
        p.batch = b;
        p.width = 8;
        for (BugClass cls : {BugClass::Indexing, BugClass::Init, BugClass::CrossLane, BugClass::RelMutation}) {
            const CorpusCase c = generate(b, cls, p);
            const CheckObligation obl = *corpus_obligation(c, "intra-fc");
            const auto t0 = Clock::now();
            const CheckResult r = check(obl, Backend::Sat);
            const double secs = since(t0);
            worst = std::max(worst, secs);
            std::string why;
            if (r.verdict != Verdict::Sat)
                l.fail(c.name + " intra-FC " + std::string(verdict_name(r.verdict)));
            else if (secs >= kDetectSeconds)
                l.fail(c.name + " took " + std::to_string(secs) + " s");
            else if (!replays(obl, r, why))
                l.fail(c.name + ": " + why);
            else
                ++detected;
        }
        const CorpusCase c = generate(b, BugClass::ConsistentWrong, p);
        bool missed = true;
        for (const char* chk : {"intra-fc", "fc2", "strong-fc", "fcd"}) {
            const auto t0 = Clock::now();
            missed &= run_corpus_check(c, chk, Backend::Sat, {}) == "UNSAT";
            worst = std::max(worst, since(t0));
        }
        const bool sac = run_corpus_check(c, "sac", Backend::Sat, {}) == "SAT";
        if (!missed) l.fail(c.name + " flagged by an FC-family mode");
        if (!sac) l.fail(c.name + " not caught by SAC");
        cw += missed && sac;
        const CorpusCase u = generate(b, BugClass::Unresponsive, p);
        ParseOptions po;
        po.rb_mode = true;
        const SsaProgram ssa = unroll_and_ssa(parse(u.source, po));
        DrbOptions o;
        o.bound = ssa.code.size();
        const DrbCampaign camp = slide(ssa, o);
        if (camp.failed && camp.failing_result->trace &&
            confirms(*camp.failing_obligation, *camp.failing_result->trace))
            ++rb;
        else
            l.fail(u.name + " not caught by the window campaign");
    }
    l.detail << detected << "/12 INDEXING/INIT/CROSS_LANE/REL_MUTATION kernels caught by intra-FC at width 8, b 4/8/16 "
             << "(slowest obligation " << worst << " s, limit " << kDetectSeconds << " s); CONSISTENT_WRONG missed by "
             << "FC-family and caught by SAC " << cw << "/3; UNRESPONSIVE caught by dRB " << rb << "/3";
    report(5, "bug-class detection", l);
}

void criterion_annotation() {
    Line l;
    const std::string path = std::string(AQED_SOURCE_DIR) + "/kernels/aes_two_stage.abk";
    std::FILE* f = std::fopen(path.c_str(), "rb");
    std::string text;
    if (f) {
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
        std::fclose(f);
    } else {
        l.fail("cannot open " + path);
    }
    const AbkProgram p = parse(text);
    const DecompositionPlan pl = plan(p);
    if (pl.total() != 2) l.fail("expected 2 sub-accelerators");
    for (int blk : p.leaf_blocks()) {
        const auto& a = *p.blocks[blk].annotation;
        if (a.in_batch_size != 256) l.fail(p.blocks[blk].name + " in_batch_size " + std::to_string(a.in_batch_size));
        if (a.in_size != 16) l.fail(p.blocks[blk].name + " in_size " + std::to_string(a.in_size));
    }
    const std::string rep = plan_report(pl);
    if (rep.find("T=2 P=2") == std::string::npos) l.fail("plan report lacks T=2 P=2");
    l.detail << pl.total() << " sub-accelerators, batch 256 x 16 words each, plan report \"T=" << pl.total()
             << " P=" << pl.parallel() << "\"";
    report(6, "annotation fidelity", l);
}

std::size_t head_line(const SsaProgram& s) {
    for (std::size_t pc = 0; pc < s.code.size(); ++pc)
        if (s.code[pc].op == Opcode::LoopHead) return pc + 1;
    return 0;
}

void criterion_drb() {
    Line l;
    ParseOptions po;
    po.rb_mode = true;
    const std::size_t bound = 2 * kDrbLines;
    std::size_t histories = 0;
    auto invariants = [&](const DrbCampaign& c, const std::string& what) {
        ++histories;
        if (auto v = history_violation(c.state, c.lines)) l.fail(what + ": " + *v);
    };

    const SsaProgram clean = unroll_and_ssa(parse(drb_program(7, kDrbLines, false), po));
    DrbOptions o;
    o.bound = bound;
    const DrbCampaign a = slide(clean, o);
    invariants(a, "clean");
    std::size_t covered = 0;
    for (bool b : a.coverage()) covered += b;
    if (!a.reached_end || a.failed || covered != a.lines) l.fail("clean program not fully covered");

    const SsaProgram bad = unroll_and_ssa(parse(drb_program(7, kDrbLines, true), po));
    const std::size_t head = head_line(bad);
    const DrbCampaign b = slide(bad, o);
    invariants(b, "injected");
    std::string stop = "none";
    if (!b.failed) {
        l.fail("injected loop not found");
    } else {
        const auto& h = b.state.history;
        for (std::size_t k = 0; k + 1 < h.size(); ++k)
            if (h[k].covered_bottom >= head) l.fail("an earlier window already contained the loop");
        if (h.back().covered_top > head || h.back().covered_bottom < head) l.fail("failing window misses the loop");
        const auto& tr = b.failing_result->trace;
        if (!tr || !confirms(*b.failing_obligation, *tr)) {
            l.fail("witness does not replay");
        } else {
            std::vector<Word> mem = tr->initial_states[0].memory;
            place_batch(*b.failing->model, tr->batches[0][0], mem);
            if (execute_bounded(*b.failing->model, mem, bound)) l.fail("witness finishes within the bound");
        }
        stop = std::to_string(h.back().covered_top) + ".." + std::to_string(h.back().covered_bottom);
    }

    // starved budgets force the shrinking phase
    for (double secs : {1e-9, 1e-4}) {
        DrbOptions tight = o;
        tight.budget.max_seconds = secs;
        invariants(slide(bad, tight), "budget " + std::to_string(secs));
        invariants(slide(clean, tight), "budget " + std::to_string(secs));
    }
    for (std::size_t delta : {1, 3, 32}) {
        DrbOptions d = o;
        d.delta = delta;
        d.window = delta;
        invariants(slide(bad, d), "delta " + std::to_string(delta));
    }

    l.detail << "clean: " << covered << "/" << a.lines << " lines covered in " << a.state.history.size()
             << " windows; injected (" << bad.code.size() << " lines, loop head at " << head << "): stopped at window "
             << stop << " with a replaying witness; invariants hold on " << histories << " histories";
    report(7, "dRB conformance", l);
}

void criterion_monitor() {
    Line l;
    std::size_t traces = 0, flagged = 0;
    for (const auto& c : standard_corpus()) {
        if (c.rb_mode) continue;
        for (const char* chk : {"intra-fc", "fc2", "strong-fc", "fcd"})
            for (Backend be : {Backend::Sat, Backend::Exhaustive}) {
                const CheckObligation obl = *corpus_obligation(c, chk);
                CheckResult r;
                try {
                    r = check(obl, be);
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::ExplosionCap) continue;
                    throw;
                }
                if (r.verdict != Verdict::Sat || !r.trace) continue;
                ++traces;
                if (replay_monitor(*r.trace, obl, false).fc_check)
                    ++flagged;
                else
                    l.fail(c.name + " " + chk + " trace not flagged");
            }
    }
    // consistent runs: duplicate lanes of bug-free kernels
    std::mt19937_64 rng(99);
    std::size_t runs = 0, quiet = 0;
    const auto clean = none_family();
    for (std::size_t t = 0; t < kConsistentRuns; ++t) {
        const CorpusCase& c = clean[t % clean.size()];
        const char* chk = t % 3 == 0 ? "intra-fc" : t % 3 == 1 ? "fc2" : "strong-fc";
        const CheckObligation obl = *corpus_obligation(c, chk);
        const AcceleratorModel& m = *obl.model;
        CounterexampleTrace tr;
        tr.mode = obl.mode;
        MachineState s0 = base_state(obl);
        for (CellId x : obl.free_cells()) s0.memory[x] = rng() & width_mask(m.layout.cells[x].width);
        for (std::size_t cp = 0; cp < obl.copies(); ++cp) {
            tr.initial_states.push_back(s0);  // copies share the relevant state
            std::vector<InputBatch> bs;
            for (std::size_t k = 0; k < obl.batches(); ++k) bs.push_back(random_batch(m, rng));
            tr.batches.push_back(bs);
        }
        const std::size_t b = m.batch_size;
        tr.lane = rng() % b;
        tr.lane_prime = (tr.lane + 1 + rng() % (b - 1)) % b;
        const Lane orig = tr.batches[0][0].lanes[tr.lane];
        if (obl.mode == CheckMode::FC) {
            tr.batch_index = 0;
            tr.batches[0][obl.bound - 1].lanes[tr.lane_prime] = orig;
        } else if (obl.mode == CheckMode::StrongFC) {
            tr.batches[1][0].lanes[tr.lane_prime] = orig;
        } else {
            tr.batches[0][0].lanes[tr.lane_prime] = orig;
        }
        ++runs;
        const MonitorVerdict v = replay_monitor(tr, obl, false);
        if (!v.dup_done) l.fail(c.name + " " + chk + ": duplicate never completed");
        if (v.fc_check)
            l.fail(c.name + " " + chk + ": monitor fired on a consistent run");
        else
            ++quiet;
    }
    if (traces == 0) l.fail("no FC-family SAT traces");
    l.detail << flagged << "/" << traces << " FC-family SAT traces from the corpus give fc_check=1; " << quiet << "/"
             << runs << " randomized consistent runs give fc_check=0";
    report(8, "monitor conformance", l);
}

} // namespace

int main() {
    const std::vector<std::function<void()>> criteria = {
        criterion_backend_equivalence, criterion_soundness, criterion_completeness, criterion_composition,
        criterion_detection,           criterion_annotation, criterion_drb,         criterion_monitor};
    int n = 1;
    for (const auto& c : criteria) {
        try {
            c();
        } catch (const std::exception& e) {
            std::printf("FAIL %d: exception: %s\n", n, e.what());
            ++failures;
        }
        ++n;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures ? 1 : 0;
}
