#include "aqed/engine.hpp"

#include "aqed/bitblast.hpp"
#include "aqed/error.hpp"
#include "aqed/monitor.hpp"
#include "aqed/sat.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_map>

namespace aqed {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::optional<Clock::time_point> deadline_of(const Budget& b, Clock::time_point t0) {
    if (b.max_seconds <= 0) return std::nullopt;
    return t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(b.max_seconds));
}


// Fills runs, lane roles and the monitor log of a witness that is known to
// replay.
CounterexampleTrace finish_trace(const CheckObligation& obl, CounterexampleTrace t) {
    if (!find_violation(obl, t))
        throw Error(ErrorKind::ReplayMismatch, "witness for " + obl.label + " does not replay");
    if (is_fc_family(obl.mode)) t.monitor_log = replay_monitor(t, obl).log;
    return t;
}

} // namespace

Budget Budget::from_env() {
    Budget b;
    if (const char* s = std::getenv("AQED_BUDGET_SECONDS")) {
        char* end = nullptr;
        double v = std::strtod(s, &end);
        if (end == s || v < 0) throw Error(ErrorKind::Config, "AQED_BUDGET_SECONDS is not a non-negative number");
        b.max_seconds = v;
    }
    if (const char* s = std::getenv("AQED_BUDGET_CONFLICTS")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(s, &end, 10);
        if (end == s || *end) throw Error(ErrorKind::Config, "AQED_BUDGET_CONFLICTS is not a count");
        b.max_conflicts = v;
    }
    return b;
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
    case Verdict::Unsat: return "UNSAT";
    case Verdict::Sat: return "SAT";
    case Verdict::Unknown: return "UNKNOWN";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

namespace {

struct Case {
    std::vector<Word> init;
    std::vector<InputBatch> batches;
};

struct Slot {
    std::uint64_t domain;
    std::function<void(Case&, std::uint64_t)> set;
};

struct VecHash {
    std::size_t operator()(const std::vector<Word>& v) const noexcept {
        std::size_t h = 0xcbf29ce484222325ull;
        for (Word w : v) h = (h ^ std::hash<Word>{}(w)) * 0x100000001b3ull;
        return h;
    }
};

class Enumerator {
public:
    Enumerator(const CheckObligation& obl, bool key_major) : obl_(obl), m_(*obl.model) {
        base_.init = base_state(obl).memory;
        for (std::size_t i = 0; i < obl.batches(); ++i) base_.batches.push_back(zero_lanes());
        build(key_major);
    }

    std::uint64_t total(std::uint64_t cap) const {
        unsigned __int128 n = 1;
        for (const auto& s : slots_) {
            n *= s.domain;
            if (n > cap) return cap + 1;
        }
        return static_cast<std::uint64_t>(n);
    }

    /// Product of the domains of the first `k` slots.
    std::uint64_t prefix_size(std::size_t k) const {
        std::uint64_t n = 1;
        for (std::size_t i = 0; i < k; ++i) n *= slots_[i].domain;
        return n;
    }
    std::size_t key_slots() const { return key_slots_; }

    Case at(std::uint64_t index) const {
        Case c = base_;
        for (std::size_t k = slots_.size(); k-- > 0;) {
            slots_[k].set(c, index % slots_[k].domain);
            index /= slots_[k].domain;
        }
        return c;
    }

    bool empty_domain() const {
        return std::any_of(slots_.begin(), slots_.end(), [](const Slot& s) { return s.domain == 0; });
    }

private:
    const CheckObligation& obl_;
    const AcceleratorModel& m_;
    Case base_;
    std::vector<Slot> slots_;
    std::size_t key_slots_ = 0;

    InputBatch zero_lanes() const {
        InputBatch b;
        b.lanes.assign(m_.batch_size, Lane{0, std::vector<Word>(m_.in_words, 0)});
        return b;
    }

    void build(bool key_major) {
        const auto free = obl_.free_cells();
        const auto& relc = m_.layout.relevant;
        std::vector<Slot> rel_slots, other_slots, lane_slots;

        if (obl_.allowed_relevant) {
            auto vals = std::make_shared<std::vector<std::vector<Word>>>();
            for (const auto& v : *obl_.allowed_relevant) {
                if (v.size() != relc.size()) continue;
                bool ok = true;
                for (std::size_t k = 0; k < relc.size() && ok; ++k) {
                    if (v[k] & ~width_mask(m_.layout.cells[relc[k]].width)) ok = false;
                    if (std::find(free.begin(), free.end(), relc[k]) == free.end() && v[k] != base_.init[relc[k]])
                        ok = false;
                }
                if (ok && std::find(vals->begin(), vals->end(), v) == vals->end()) vals->push_back(v);
            }
            rel_slots.push_back(Slot{vals->size(), [vals, relc](Case& c, std::uint64_t x) {
                                         for (std::size_t k = 0; k < relc.size(); ++k) c.init[relc[k]] = (*vals)[x][k];
                                     }});
        }
        for (CellId cell : free) {
            const bool is_rel = m_.layout.cells[cell].region == Region::Relevant;
            if (is_rel && obl_.allowed_relevant) continue;
            Slot s{std::uint64_t{1} << m_.layout.cells[cell].width,
                   [cell](Case& c, std::uint64_t x) { c.init[cell] = x; }};
            (is_rel ? rel_slots : other_slots).push_back(std::move(s));
        }
        for (std::size_t i = 0; i < obl_.batches(); ++i)
            for (std::size_t j = 0; j < m_.batch_size; ++j) {
                if (obl_.mode == CheckMode::SAC && j != obl_.lane) continue;
                if (m_.has_actions())
                    lane_slots.push_back(Slot{m_.action_count, [i, j](Case& c, std::uint64_t x) {
                                                  c.batches[i].lanes[j].action = x;
                                              }});
                for (std::size_t w = 0; w < m_.in_words; ++w)
                    lane_slots.push_back(Slot{std::uint64_t{1} << m_.data_width, [i, j, w](Case& c, std::uint64_t x) {
                                                  c.batches[i].lanes[j].data[w] = x;
                                              }});
            }
        auto append = [&](std::vector<Slot>& v) {
            for (auto& s : v) slots_.push_back(std::move(s));
        };
        append(rel_slots);
        if (key_major) {
            append(lane_slots);
            key_slots_ = slots_.size();
            append(other_slots);
        } else {
            append(other_slots);
            append(lane_slots);
            key_slots_ = slots_.size();
        }
    }
};

std::vector<Word> lane_key(const Lane& l) {
    std::vector<Word> k{l.action};
    k.insert(k.end(), l.data.begin(), l.data.end());
    return k;
}

struct Executed {
    std::vector<OutputBatch> outputs;
    std::vector<std::vector<Word>> rel_in;
    std::vector<Word> final_memory;
};

Executed run_case(const AcceleratorModel& m, const Case& c) {
    Executed e;
    std::vector<Word> mem = c.init;
    for (const auto& b : c.batches) {
        e.rel_in.push_back(rel(m, mem));
        place_batch(m, b, mem);
        if (!execute_bounded(m, mem, kDefaultStepBudget))
            throw Error(ErrorKind::StepBudgetExceeded,
                        m.name + ": no final state within " + std::to_string(kDefaultStepBudget) + " steps");
        e.outputs.push_back(read_outputs(m, mem));
    }
    e.final_memory = std::move(mem);
    return e;
}

CounterexampleTrace trace_of(const CheckObligation& obl, const std::vector<const Case*>& copies) {
    CounterexampleTrace t;
    t.mode = obl.mode;
    for (const Case* c : copies) {
        t.initial_states.push_back(MachineState{obl.model->initial_control(), c->init});
        t.batches.push_back(c->batches);
    }
    return t;
}

} // namespace

CheckResult check_exhaustive(const CheckObligation& obl, const Budget& budget) {
    const auto t0 = Clock::now();
    const auto deadline = deadline_of(budget, t0);
    const AcceleratorModel& m = *obl.model;
    CheckResult res;
    res.backend = Backend::Exhaustive;

    const bool existential = obl.mode == CheckMode::SAC && obl.sac_existential;
    Enumerator en(obl, existential);
    const std::uint64_t n = en.empty_domain() ? 0 : en.total(budget.max_cases);
    if (n > budget.max_cases)
        throw Error(ErrorKind::ExplosionCap, obl.label + ": more than " + std::to_string(budget.max_cases) +
                                                 " concrete cases to enumerate");

    auto out_of_time = [&](std::uint64_t k) { return deadline && (k & 1023) == 0 && Clock::now() > *deadline; };
    auto unknown = [&](std::uint64_t k) {
        res.verdict = Verdict::Unknown;
        res.unknown_cause = "timeout";
        res.stats.cases = k;
        res.stats.seconds = since(t0);
        return res;
    };
    auto sat = [&](CounterexampleTrace t, std::uint64_t k) {
        res.verdict = Verdict::Sat;
        res.trace = finish_trace(obl, std::move(t));
        res.stats.cases = k;
        res.stats.seconds = since(t0);
        return res;
    };

    const std::size_t b = m.batch_size;
    std::uint64_t k = 0;

    if (obl.mode == CheckMode::StrongFC || obl.mode == CheckMode::StrongFCD) {
        const bool fcd = obl.mode == CheckMode::StrongFCD;
        struct Seen {
            std::vector<std::pair<std::vector<Word>, std::pair<std::uint64_t, std::size_t>>> sigs;
        };
        std::unordered_map<std::vector<Word>, Seen, VecHash> table;
        for (; k < n; ++k) {
            if (out_of_time(k)) return unknown(k);
            Case c = en.at(k);
            Executed e = run_case(m, c);
            const std::vector<Word> rel_out = fcd ? rel(m, e.final_memory) : std::vector<Word>{};
            for (std::size_t j = 0; j < b; ++j) {
                std::vector<Word> key = e.rel_in[0];
                auto lk = lane_key(c.batches[0].lanes[j]);
                key.insert(key.end(), lk.begin(), lk.end());
                std::vector<Word> sig = e.outputs[0][j];
                sig.insert(sig.end(), rel_out.begin(), rel_out.end());
                auto& seen = table[std::move(key)];
                if (std::none_of(seen.sigs.begin(), seen.sigs.end(), [&](const auto& p) { return p.first == sig; }))
                    seen.sigs.push_back({std::move(sig), {k, j}});
            }
        }
        // lexicographically first (c1, j, c2, j')
        std::optional<std::array<std::uint64_t, 4>> best;
        for (const auto& [key, seen] : table) {
            if (seen.sigs.size() < 2) continue;
            std::array<std::uint64_t, 4> w{seen.sigs[0].second.first, seen.sigs[0].second.second,
                                           seen.sigs[1].second.first, seen.sigs[1].second.second};
            if (!best || w < *best) best = w;
        }
        res.stats.cases = k;
        if (!best) {
            res.verdict = Verdict::Unsat;
            res.stats.seconds = since(t0);
            return res;
        }
        Case c1 = en.at((*best)[0]), c2 = en.at((*best)[2]);
        CounterexampleTrace t = trace_of(obl, {&c1, &c2});
        t.lane = (*best)[1];
        t.lane_prime = (*best)[3];
        if (!confirms(obl, t)) throw Error(ErrorKind::Internal, "oracle witness does not confirm");
        return sat(std::move(t), k);
    }

    if (existential) {
        const std::uint64_t inner = n == 0 ? 1 : n / en.prefix_size(en.key_slots());
        const std::uint64_t groups = n / inner;
        for (std::uint64_t g = 0; g < groups; ++g) {
            bool correct = false;
            for (std::uint64_t q = 0; q < inner && !correct; ++q) {
                if (out_of_time(k)) return unknown(k);
                Case c = en.at(g * inner + q);
                Executed e = run_case(m, c);
                ++k;
                correct = e.outputs[0][obl.lane] == spec_output(obl, c.batches[0].lanes[obl.lane], e.rel_in[0]);
            }
            if (!correct) {
                Case c = en.at(g * inner);
                CounterexampleTrace t = trace_of(obl, {&c});
                t.lane = t.lane_prime = obl.lane;
                auto r = sat(std::move(t), k);
                r.trace->description += " for every admissible initial state";
                return r;
            }
        }
        res.verdict = Verdict::Unsat;
        res.stats.cases = k;
        res.stats.seconds = since(t0);
        return res;
    }

    for (; k < n; ++k) {
        if (out_of_time(k)) return unknown(k);
        Case c = en.at(k);
        if (obl.mode == CheckMode::RB) {
            std::vector<Word> mem = c.init;
            place_batch(m, c.batches[0], mem);
            if (!execute_bounded(m, mem, obl.bound)) return sat(trace_of(obl, {&c}), k + 1);
            continue;
        }
        Executed e = run_case(m, c);
        bool hit = false;
        switch (obl.mode) {
        case CheckMode::IntraFC:
            for (std::size_t j = 0; j < b && !hit; ++j)
                for (std::size_t jp = j + 1; jp < b && !hit; ++jp)
                    hit = c.batches[0].lanes[j] == c.batches[0].lanes[jp] && e.outputs[0][j] != e.outputs[0][jp];
            break;
        case CheckMode::FC: {
            const std::size_t last = obl.bound - 1;
            for (std::size_t i = 0; i < obl.bound && !hit; ++i) {
                if (e.rel_in[i] != e.rel_in[last]) continue;
                for (std::size_t j = 0; j < b && !hit; ++j)
                    for (std::size_t jp = 0; jp < b && !hit; ++jp)
                        hit = c.batches[i].lanes[j] == c.batches[last].lanes[jp] &&
                              e.outputs[i][j] != e.outputs[last][jp];
            }
            break;
        }
        case CheckMode::SAC:
            hit = e.outputs[0][obl.lane] != spec_output(obl, c.batches[0].lanes[obl.lane], e.rel_in[0]);
            break;
        default: break;
        }
        if (hit) return sat(trace_of(obl, {&c}), k + 1);
    }
    res.verdict = Verdict::Unsat;
    res.stats.cases = k;
    res.stats.seconds = since(t0);
    return res;
}

// ---------------------------------------------------------------------------
// Symbolic encoding

namespace {

constexpr unsigned kStepWidth = 32;

struct LoopInfo {
    std::size_t head, back;
};

class SymExec {
public:
    SymExec(TermManager& tm, const AcceleratorModel& m, std::size_t cap, std::size_t& executed, bool count_steps,
            std::size_t step_bound)
        : tm_(tm), m_(m), cap_(cap), executed_(executed), count_steps_(count_steps), bound_(step_bound) {
        const auto& code = m.program.code;
        for (std::size_t pc = 0; pc < code.size(); ++pc)
            if (code[pc].op == Opcode::LoopBack) loops_[code[pc].imm] = LoopInfo{code[pc].b, pc};
        steps = tm.constant(0, kStepWidth);
        overflow = tm.fls();
    }

    std::vector<TermId> mem;
    TermId steps;
    TermId overflow;

    void run() { run_range(0, m_.program.code.size(), tm_.tru()); }

private:
    TermManager& tm_;
    const AcceleratorModel& m_;
    std::size_t cap_;
    std::size_t& executed_;
    bool count_steps_;
    std::size_t bound_;
    std::map<std::size_t, LoopInfo> loops_;

    unsigned cw(std::uint32_t c) const { return m_.layout.cells[c].width; }

    void add_steps(TermId g, std::size_t k) {
        if (!count_steps_ || k == 0) return;
        steps = tm_.add(steps, tm_.ite(g, tm_.constant(k, kStepWidth), tm_.constant(0, kStepWidth)));
    }

    void write(std::uint32_t c, TermId v, TermId g) {
        v = tm_.resize(v, cw(c));
        mem[c] = tm_.ite(g, v, mem[c]);
    }

    void tick() {
        if (++executed_ > cap_)
            throw Error(ErrorKind::UnrollCap, m_.name + ": unrolled execution exceeds " + std::to_string(cap_) +
                                                   " instructions");
    }

    // Fewest steps one iteration of the loop can take.
    std::size_t min_iteration(std::size_t start, const LoopInfo& l) const {
        std::size_t cost = l.back - start + 1;
        for (std::size_t pc = l.head + 1; pc < l.back;) {
            auto it = loops_.find(pc);
            if (it == loops_.end()) {
                ++pc;
                continue;
            }
            cost -= it->second.back - it->second.head;
            pc = it->second.back + 1;
        }
        return std::max<std::size_t>(cost, 1);
    }

    void run_range(std::size_t lo, std::size_t hi, TermId g) {
        std::size_t pending = 0;
        for (std::size_t pc = lo; pc < hi;) {
            auto it = loops_.find(pc);
            if (it != loops_.end() && it->second.back < hi) {
                add_steps(g, pending);
                pending = 0;
                run_loop(pc, it->second, g);
                pc = it->second.back + 1;
                continue;
            }
            exec(m_.program.code[pc], g);
            ++pending;
            ++pc;
        }
        add_steps(g, pending);
    }

    void run_loop(std::size_t start, const LoopInfo& l, TermId g) {
        if (!count_steps_)
            throw Error(ErrorKind::NotApplicable,
                        m_.name + " has data-dependent loops; only RB checks encode them symbolically");
        const std::size_t per = min_iteration(start, l);
        const std::size_t unroll = (bound_ + 1 + per - 1) / per;
        const Instr& head = m_.program.code[l.head];
        for (std::size_t it = 0; it < unroll; ++it) {
            run_range(start, l.head, g);
            add_steps(g, 1);
            tick();
            TermId body = tm_.land(g, tm_.nonzero(mem[head.a]));
            run_range(l.head + 1, l.back, body);
            add_steps(body, 1);
            tick();
            g = body;
            if (tm_.is_const(g) && tm_.const_value(g) == 0) return;
        }
        overflow = tm_.lor(overflow, g);
    }

    void exec(const Instr& in, TermId g) {
        tick();
        const unsigned w = in.width;
        auto val = [&](std::uint32_t c) { return mem[c]; };
        auto at = [&](TermId t, unsigned width) { return tm_.resize(t, width); };
        switch (in.op) {
        case Opcode::Nop: return;
        case Opcode::Const: write(in.dst, tm_.constant(in.imm, w), g); return;
        case Opcode::Load: write(in.dst, val(in.base), g); return;
        case Opcode::LoadIdx: {
            const TermId idx = val(in.a);
            const unsigned iw = tm_.width(idx);
            TermId r = tm_.constant(0, cw(in.dst));
            for (std::uint32_t k = in.count; k-- > 0;) {
                if (iw < 64 && (Word{k} >> iw) != 0) continue;
                r = tm_.ite(tm_.eq(idx, tm_.constant(k, iw)), at(val(in.base + k), cw(in.dst)), r);
            }
            write(in.dst, r, g);
            return;
        }
        case Opcode::Store: write(in.base, val(in.a), g); return;
        case Opcode::StoreIdx: {
            const TermId idx = val(in.b);
            const unsigned iw = tm_.width(idx);
            for (std::uint32_t k = 0; k < in.count; ++k) {
                if (iw < 64 && (Word{k} >> iw) != 0) break;
                write(in.base + k, val(in.a), tm_.land(g, tm_.eq(idx, tm_.constant(k, iw))));
            }
            return;
        }
        case Opcode::Resize: write(in.dst, at(val(in.a), w), g); return;
        case Opcode::Not:
        case Opcode::Neg: {
            const unsigned W = std::max(w, tm_.width(val(in.a)));
            const TermId x = at(val(in.a), W);
            write(in.dst, at(in.op == Opcode::Not ? tm_.mk_not(x) : tm_.neg(x), w), g);
            return;
        }
        case Opcode::Eq:
        case Opcode::Ne:
        case Opcode::Ult:
        case Opcode::Ule: {
            const unsigned W = std::max(tm_.width(val(in.a)), tm_.width(val(in.b)));
            const TermId x = at(val(in.a), W), y = at(val(in.b), W);
            TermId r = in.op == Opcode::Eq   ? tm_.eq(x, y)
                       : in.op == Opcode::Ne ? tm_.ne(x, y)
                       : in.op == Opcode::Ult ? tm_.ult(x, y)
                                              : tm_.ule(x, y);
            write(in.dst, r, g);
            return;
        }
        case Opcode::Select:
            write(in.dst, tm_.ite(tm_.nonzero(val(in.a)), at(val(in.b), w), at(val(in.c), w)), g);
            return;
        case Opcode::Permute: {
            for (auto [p, q] : m_.program.permutations.at(in.imm)) {
                const TermId vp = mem[p], vq = mem[q];
                mem[p] = tm_.ite(g, vq, vp);
                mem[q] = tm_.ite(g, vp, vq);
            }
            return;
        }
        case Opcode::LoopHead:
        case Opcode::LoopBack:
            throw Error(ErrorKind::Internal, "unstructured loop in " + m_.name);
        default: break;
        }
        const unsigned W = std::max({w, tm_.width(val(in.a)), tm_.width(val(in.b))});
        const TermId x = at(val(in.a), W), y = at(val(in.b), W);
        TermId r;
        switch (in.op) {
        case Opcode::Add: r = tm_.add(x, y); break;
        case Opcode::Sub: r = tm_.sub(x, y); break;
        case Opcode::Mul: r = tm_.mul(x, y); break;
        case Opcode::And: r = tm_.band(x, y); break;
        case Opcode::Or: r = tm_.bor(x, y); break;
        case Opcode::Xor: r = tm_.bxor(x, y); break;
        case Opcode::Shl: r = tm_.shl(x, y); break;
        case Opcode::Lshr: r = tm_.lshr(x, y); break;
        default: throw Error(ErrorKind::Internal, "opcode without an encoding");
        }
        write(in.dst, at(r, w), g);
    }
};

class Encoder {
public:
    explicit Encoder(const CheckObligation& obl, std::size_t cap) : obl_(obl), m_(*obl.model), cap_(cap) {
        sys_.obligation = obl;
        sys_.tm = std::make_shared<TermManager>();
    }

    ConstraintSystem run() {
        TermManager& tm = *sys_.tm;
        const std::size_t b = m_.batch_size;
        if (obl_.spec && obl_.spec->host && !obl_.spec->model)
            throw Error(ErrorKind::Config, "host specifications are only evaluated by the exhaustive backend");
        if (obl_.sac_existential && obl_.mode == CheckMode::SAC)
            throw Error(ErrorKind::Config, "existential SAC is only checked by the exhaustive backend");

        std::vector<std::vector<TermId>> rel0(obl_.copies());
        std::vector<std::vector<std::vector<std::vector<TermId>>>> lanes(obl_.copies());  // copy, batch, lane, word
        std::vector<std::vector<std::vector<std::vector<TermId>>>> outs(obl_.copies());
        std::vector<std::vector<std::vector<TermId>>> rel_in(obl_.copies());
        std::vector<std::vector<TermId>> rel_final(obl_.copies());
        TermId rb_violation = tm.fls();

        for (std::size_t c = 0; c < obl_.copies(); ++c) {
            SymExec ex(tm, m_, cap_, sys_.executed, obl_.mode == CheckMode::RB, obl_.bound);
            ex.mem = initial_memory(c);
            for (CellId r : m_.layout.relevant) rel0[c].push_back(ex.mem[r]);
            restrict_relevant(rel0[c]);
            for (std::size_t i = 0; i < obl_.batches(); ++i) {
                std::vector<TermId> ri;
                for (CellId r : m_.layout.relevant) ri.push_back(ex.mem[r]);
                rel_in[c].push_back(std::move(ri));
                lanes[c].push_back(place(c, i, ex.mem));
                if (obl_.mode == CheckMode::RB) {
                    if (obl_.bound >= (std::size_t{1} << (kStepWidth - 1)))
                        throw Error(ErrorKind::UnrollCap, "RB bound too large to encode");
                    ex.run();
                    rb_violation = tm.lor(tm.ult(tm.constant(obl_.bound, kStepWidth), ex.steps), ex.overflow);
                } else {
                    ex.run();
                }
                outs[c].push_back(outputs(ex.mem));
            }
            for (CellId r : m_.layout.relevant) rel_final[c].push_back(ex.mem[r]);
            if (obl_.mode == CheckMode::SAC) {
                TermId viol = tm.fls();
                const auto want = spec_outputs(rel0[c], lanes[c][0][obl_.lane]);
                const auto& got = outs[c][0][obl_.lane];
                for (std::size_t w = 0; w < got.size(); ++w)
                    viol = tm.lor(viol, tm.ne(got[w], tm.resize(want.at(w), tm.width(got[w]))));
                sys_.roots.push_back(viol);
            }
        }

        switch (obl_.mode) {
        case CheckMode::RB: sys_.roots.push_back(rb_violation); break;
        case CheckMode::SAC: break;
        case CheckMode::IntraFC: {
            auto J = selectors(VarRole::LaneSelect, b, "j");
            auto Jp = selectors(VarRole::LanePrimeSelect, b, "j'");
            for (std::size_t k = 0; k < b; ++k) sys_.roots.push_back(tm.mk_not(tm.land(J[k], Jp[k])));
            equal_lanes(mux_lanes(J, lanes[0][0]), mux_lanes(Jp, lanes[0][0]));
            differ(mux_lanes(J, outs[0][0]), mux_lanes(Jp, outs[0][0]), tm.fls());
            break;
        }
        case CheckMode::FC: {
            const std::size_t n = obl_.bound;
            auto I = selectors(VarRole::BatchSelect, n, "i");
            auto J = selectors(VarRole::LaneSelect, b, "j");
            auto Jp = selectors(VarRole::LanePrimeSelect, b, "j'");
            for (std::size_t r = 0; r < m_.layout.relevant.size(); ++r) {
                std::vector<TermId> col;
                for (std::size_t i = 0; i < n; ++i) col.push_back(rel_in[0][i][r]);
                sys_.roots.push_back(tm.eq(mux(I, col), rel_in[0][n - 1][r]));
            }
            std::vector<std::vector<TermId>> in_i, out_i;
            for (std::size_t i = 0; i < n; ++i) {
                in_i.push_back(mux_lanes(J, lanes[0][i]));
                out_i.push_back(mux_lanes(J, outs[0][i]));
            }
            equal_lanes(mux_lanes(I, in_i), mux_lanes(Jp, lanes[0][n - 1]));
            differ(mux_lanes(I, out_i), mux_lanes(Jp, outs[0][n - 1]), tm.fls());
            break;
        }
        case CheckMode::StrongFC:
        case CheckMode::StrongFCD: {
            for (std::size_t r = 0; r < rel0[0].size(); ++r) sys_.roots.push_back(tm.eq(rel0[0][r], rel0[1][r]));
            auto J = selectors(VarRole::LaneSelect, b, "j");
            auto Jp = selectors(VarRole::LanePrimeSelect, b, "j'");
            equal_lanes(mux_lanes(J, lanes[0][0]), mux_lanes(Jp, lanes[1][0]));
            TermId extra = tm.fls();
            if (obl_.mode == CheckMode::StrongFCD)
                for (std::size_t r = 0; r < rel_final[0].size(); ++r)
                    extra = tm.lor(extra, tm.ne(rel_final[0][r], rel_final[1][r]));
            differ(mux_lanes(J, outs[0][0]), mux_lanes(Jp, outs[1][0]), extra);
            break;
        }
        }
        return std::move(sys_);
    }

private:
    const CheckObligation& obl_;
    const AcceleratorModel& m_;
    std::size_t cap_;
    ConstraintSystem sys_;

    TermId new_var(const std::string& name, unsigned width, VarRole role) {
        TermId t = sys_.tm->var(name, width);
        sys_.roles.push_back(role);
        return t;
    }

    std::vector<TermId> initial_memory(std::size_t copy) {
        TermManager& tm = *sys_.tm;
        const MachineState base = base_state(obl_);
        std::vector<TermId> mem;
        for (CellId c = 0; c < m_.layout.size(); ++c) mem.push_back(tm.constant(base.memory[c], m_.layout.cells[c].width));
        for (CellId c : obl_.free_cells()) {
            VarRole role;
            role.kind = VarRole::InitCell;
            role.copy = copy;
            role.cell = c;
            mem[c] = new_var("c" + std::to_string(copy) + "." + m_.layout.cells[c].name, m_.layout.cells[c].width, role);
        }
        return mem;
    }

    void restrict_relevant(const std::vector<TermId>& rel_terms) {
        if (!obl_.allowed_relevant) return;
        TermManager& tm = *sys_.tm;
        TermId any = tm.fls();
        for (const auto& v : *obl_.allowed_relevant) {
            if (v.size() != rel_terms.size()) continue;
            TermId all = tm.tru();
            for (std::size_t k = 0; k < v.size(); ++k)
                all = tm.land(all, tm.eq(rel_terms[k], tm.constant(v[k], tm.width(rel_terms[k]))));
            any = tm.lor(any, all);
        }
        sys_.roots.push_back(any);
    }

    // Input terms per lane: action (when present) then data words.
    std::vector<std::vector<TermId>> place(std::size_t copy, std::size_t batch, std::vector<TermId>& mem) {
        TermManager& tm = *sys_.tm;
        const std::size_t per = m_.layout.in_cells_per_lane;
        const std::size_t off = m_.has_actions() ? 1 : 0;
        std::vector<std::vector<TermId>> result;
        const std::string prefix = "c" + std::to_string(copy) + ".b" + std::to_string(batch) + ".l";
        for (std::size_t j = 0; j < m_.batch_size; ++j) {
            std::vector<TermId> lane;
            const bool symbolic = obl_.mode != CheckMode::SAC || j == obl_.lane;
            VarRole role;
            role.copy = copy;
            role.batch = batch;
            role.lane = j;
            if (m_.has_actions()) {
                const unsigned aw = m_.layout.cells[m_.layout.input[j * per]].width;
                TermId a = tm.constant(0, aw);
                if (symbolic) {
                    role.kind = VarRole::LaneAction;
                    a = new_var(prefix + std::to_string(j) + ".a", aw, role);
                    sys_.roots.push_back(tm.ult(a, tm.constant(m_.action_count, aw)));
                }
                mem[m_.layout.input[j * per]] = a;
                lane.push_back(a);
            }
            for (std::size_t w = 0; w < m_.in_words; ++w) {
                TermId d = tm.constant(0, m_.data_width);
                if (symbolic) {
                    role.kind = VarRole::LaneWord;
                    role.word = w;
                    d = new_var(prefix + std::to_string(j) + ".w" + std::to_string(w), m_.data_width, role);
                }
                const CellId cell = m_.layout.input[j * per + off + w];
                mem[cell] = tm.resize(d, m_.layout.cells[cell].width);
                lane.push_back(d);
            }
            result.push_back(std::move(lane));
        }
        return result;
    }

    std::vector<std::vector<TermId>> outputs(const std::vector<TermId>& mem) const {
        const std::size_t per = m_.layout.out_cells_per_lane;
        std::vector<std::vector<TermId>> result(m_.batch_size);
        for (std::size_t j = 0; j < m_.batch_size; ++j)
            for (std::size_t w = 0; w < per; ++w) result[j].push_back(mem[m_.layout.output[j * per + w]]);
        return result;
    }

    std::vector<TermId> spec_outputs(const std::vector<TermId>& rel_terms, const std::vector<TermId>& lane) {
        TermManager& tm = *sys_.tm;
        const AcceleratorModel& sm = *obl_.spec->model;
        if (sm.program.has_loops())
            throw Error(ErrorKind::NotApplicable, "spec model " + sm.name + " has data-dependent loops");
        SymExec ex(tm, sm, cap_, sys_.executed, false, 0);
        const MachineState s = default_initial_state(sm);
        for (CellId c = 0; c < sm.layout.size(); ++c) ex.mem.push_back(tm.constant(s.memory[c], sm.layout.cells[c].width));
        const auto& relc = m_.layout.relevant;
        for (std::size_t k = 0; k < relc.size(); ++k)
            ex.mem[relc[k]] = tm.resize(rel_terms[k], sm.layout.cells[relc[k]].width);
        const std::size_t off = sm.has_actions() ? 1 : 0;
        if (sm.has_actions()) ex.mem[sm.layout.input[0]] = tm.resize(lane.at(0), sm.layout.cells[sm.layout.input[0]].width);
        for (std::size_t w = 0; w + (m_.has_actions() ? 1 : 0) < lane.size(); ++w) {
            const CellId cell = sm.layout.input[off + w];
            ex.mem[cell] = tm.resize(lane[w + (m_.has_actions() ? 1 : 0)], sm.layout.cells[cell].width);
        }
        ex.run();
        std::vector<TermId> r;
        for (std::size_t w = 0; w < sm.layout.out_cells_per_lane; ++w) r.push_back(ex.mem[sm.layout.output[w]]);
        return r;
    }

    // One-hot selector over `n` positions.
    std::vector<TermId> selectors(VarRole::Kind kind, std::size_t n, const std::string& name) {
        TermManager& tm = *sys_.tm;
        std::vector<TermId> s;
        TermId some = tm.fls();
        for (std::size_t k = 0; k < n; ++k) {
            VarRole role;
            role.kind = kind;
            role.lane = k;
            role.batch = k;
            s.push_back(new_var(name + "=" + std::to_string(k), 1, role));
            some = tm.lor(some, s.back());
        }
        sys_.roots.push_back(some);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) sys_.roots.push_back(tm.mk_not(tm.land(s[p], s[q])));
        return s;
    }

    TermId mux(const std::vector<TermId>& sel, const std::vector<TermId>& vals) {
        TermManager& tm = *sys_.tm;
        TermId r = vals.back();
        for (std::size_t k = vals.size() - 1; k-- > 0;) r = tm.ite(sel[k], vals[k], r);
        return r;
    }

    std::vector<TermId> mux_lanes(const std::vector<TermId>& sel, const std::vector<std::vector<TermId>>& per) {
        std::vector<TermId> r;
        for (std::size_t w = 0; w < per.at(0).size(); ++w) {
            std::vector<TermId> col;
            for (const auto& p : per) col.push_back(p[w]);
            r.push_back(mux(sel, col));
        }
        return r;
    }

    void equal_lanes(const std::vector<TermId>& a, const std::vector<TermId>& b) {
        for (std::size_t w = 0; w < a.size(); ++w) sys_.roots.push_back(sys_.tm->eq(a[w], b[w]));
    }

    void differ(const std::vector<TermId>& a, const std::vector<TermId>& b, TermId extra) {
        TermManager& tm = *sys_.tm;
        TermId d = extra;
        for (std::size_t w = 0; w < a.size(); ++w) d = tm.lor(d, tm.ne(a[w], b[w]));
        sys_.roots.push_back(d);
    }
};

} // namespace

ConstraintSystem encode(const CheckObligation& obl, std::size_t unroll_cap) {
    if (is_fc_family(obl.mode) && obl.model->program.has_loops())
        throw Error(ErrorKind::NotApplicable,
                    obl.model->name + " has data-dependent loops; FC-family checks need a loop-free model");
    return Encoder(obl, unroll_cap).run();
}

namespace {

CounterexampleTrace decode(const ConstraintSystem& sys, const std::vector<Word>& values) {
    const CheckObligation& obl = sys.obligation;
    const AcceleratorModel& m = *obl.model;
    CounterexampleTrace t;
    t.mode = obl.mode;
    const MachineState base = base_state(obl);
    InputBatch zero;
    zero.lanes.assign(m.batch_size, Lane{0, std::vector<Word>(m.in_words, 0)});
    for (std::size_t c = 0; c < obl.copies(); ++c) {
        t.initial_states.push_back(base);
        t.batches.push_back(std::vector<InputBatch>(obl.batches(), zero));
    }
    for (std::size_t v = 0; v < sys.roles.size(); ++v) {
        const VarRole& r = sys.roles[v];
        const Word x = values[v];
        switch (r.kind) {
        case VarRole::InitCell: t.initial_states[r.copy].memory[r.cell] = x; break;
        case VarRole::LaneAction: t.batches[r.copy][r.batch].lanes[r.lane].action = x; break;
        case VarRole::LaneWord: t.batches[r.copy][r.batch].lanes[r.lane].data[r.word] = x; break;
        case VarRole::LaneSelect:
            if (x) t.lane = r.lane;
            break;
        case VarRole::LanePrimeSelect:
            if (x) t.lane_prime = r.lane;
            break;
        case VarRole::BatchSelect:
            if (x) t.batch_index = r.batch;
            break;
        }
    }
    if (obl.mode == CheckMode::SAC) t.lane = t.lane_prime = obl.lane;
    return t;
}

} // namespace

CheckResult check_sat(const ConstraintSystem& sys, const Budget& budget) {
    const auto t0 = Clock::now();
    const TermManager& tm = *sys.tm;
    CheckResult res;
    res.backend = Backend::Sat;
    res.stats.terms = tm.size();

    auto finish = [&](Verdict v) {
        res.verdict = v;
        res.stats.seconds = since(t0);
        return res;
    };

    for (TermId r : sys.roots)
        if (tm.is_const(r) && tm.const_value(r) == 0) return finish(Verdict::Unsat);

    Cnf cnf;
    BitBlaster bb(tm, cnf);
    for (const auto& v : tm.vars()) bb.bits(v.term);
    for (TermId r : sys.roots) {
        bb.assert_true(r);
        if (cnf.clauses.size() > budget.max_clauses) {
            res.unknown_cause = "memory";
            res.stats.clauses = cnf.clauses.size();
            res.stats.vars = static_cast<std::size_t>(cnf.num_vars);
            return finish(Verdict::Unknown);
        }
    }
    res.stats.clauses = cnf.clauses.size();
    res.stats.vars = static_cast<std::size_t>(cnf.num_vars);

    SatSolver solver(cnf);
    SatLimits limits;
    limits.max_conflicts = budget.max_conflicts;
    limits.deadline = deadline_of(budget, t0);
    const SatStatus st = solver.solve(limits);
    const SatStats& ss = solver.stats();
    res.stats.decisions = ss.decisions;
    res.stats.conflicts = ss.conflicts;
    res.stats.propagations = ss.propagations;
    res.stats.restarts = ss.restarts;

    if (st == SatStatus::Unsat) return finish(Verdict::Unsat);
    if (st == SatStatus::Unknown) {
        res.unknown_cause = std::string(solver.unknown_cause()) == "time" ? "timeout" : "conflicts";
        return finish(Verdict::Unknown);
    }

    std::vector<Word> values;
    for (const auto& v : tm.vars()) {
        Word x = 0;
        const auto& lits = bb.bits(v.term);
        for (std::size_t i = 0; i < lits.size(); ++i)
            if (solver.value(lits[i])) x |= Word{1} << i;
        values.push_back(x);
    }
    for (TermId r : sys.roots)
        if (tm.eval(r, values) != 1)
            throw Error(ErrorKind::ReplayMismatch, "solver model violates an assertion of " + sys.obligation.label);
    CounterexampleTrace t = decode(sys, values);
    if (!confirms(sys.obligation, t))
        throw Error(ErrorKind::ReplayMismatch,
                    "decoded witness for " + sys.obligation.label + " does not replay on the interpreter");
    res.trace = finish_trace(sys.obligation, std::move(t));
    return finish(Verdict::Sat);
}

CheckResult check(const CheckObligation& obl, Backend backend, const Budget& budget) {
    if (backend == Backend::Exhaustive) return check_exhaustive(obl, budget);
    const auto t0 = Clock::now();
    ConstraintSystem sys = encode(obl, budget.unroll_cap);
    CheckResult r = check_sat(sys, budget);
    r.stats.seconds = since(t0);
    return r;
}

std::vector<CheckResult> check_all(const std::vector<CheckObligation>& obls, Backend backend, const Budget& budget,
                                   unsigned threads) {
    std::vector<CheckResult> results(obls.size());
    std::vector<std::exception_ptr> errors(obls.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < obls.size();) {
            try {
                results[i] = check(obls[i], backend, budget);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(obls.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

std::vector<CheckOutcome> check_each(const std::vector<CheckObligation>& obls, Backend backend, const Budget& budget,
                                     unsigned threads) {
    std::vector<CheckOutcome> out(obls.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < obls.size();) {
            try {
                out[i].result = check(obls[i], backend, budget);
            } catch (const Error& e) {
                out[i].error = e.kind();
                out[i].message = e.what();
            } catch (const std::exception& e) {
                out[i].error = ErrorKind::Internal;
                out[i].message = e.what();
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(obls.size(), 1))));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return out;
}

// ---------------------------------------------------------------------------
// Minimization

namespace {

struct Knob {
    std::function<Word&(CounterexampleTrace&)> ref;
    std::function<Word*(CounterexampleTrace&)> twin;  // paired value kept equal, may be null
};

} // namespace

CounterexampleTrace minimize(const CounterexampleTrace& trace, const CheckObligation& obl) {
    CounterexampleTrace cur = trace;
    if (!find_violation(obl, cur)) return trace;
    const AcceleratorModel& m = *obl.model;

    auto knobs = [&](const CounterexampleTrace& t) {
        std::vector<Knob> ks;
        for (std::size_t c = 0; c < t.initial_states.size(); ++c)
            for (CellId x : obl.free_cells())
                ks.push_back(Knob{[c, x](CounterexampleTrace& u) -> Word& { return u.initial_states[c].memory[x]; },
                                  nullptr});
        // paired lanes must keep equal inputs, so their words move together
        std::optional<std::pair<std::size_t, std::size_t>> pa, pb;  // (copy*batches+batch, lane)
        const std::size_t nb = obl.batches();
        switch (obl.mode) {
        case CheckMode::IntraFC: pa = {0, t.lane}, pb = {0, t.lane_prime}; break;
        case CheckMode::FC: pa = {t.batch_index, t.lane}, pb = {nb - 1, t.lane_prime}; break;
        case CheckMode::StrongFC:
        case CheckMode::StrongFCD: pa = {0, t.lane}, pb = {nb, t.lane_prime}; break;
        default: break;
        }
        const std::size_t words = m.in_words + 1;
        for (std::size_t c = 0; c < t.batches.size(); ++c)
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t j = 0; j < m.batch_size; ++j) {
                    if (obl.mode == CheckMode::SAC && j != obl.lane) continue;
                    const std::pair<std::size_t, std::size_t> me{c * nb + i, j};
                    if (pb && me == *pb) continue;
                    for (std::size_t w = 0; w < words; ++w) {
                        if (w == 0 && !m.has_actions()) continue;
                        auto access = [w](CounterexampleTrace& u, std::size_t flat, std::size_t lane) -> Word& {
                            const std::size_t n = u.batches[0].size();
                            Lane& l = u.batches[flat / n][flat % n].lanes[lane];
                            return w == 0 ? l.action : l.data[w - 1];
                        };
                        Knob k;
                        k.ref = [access, me](CounterexampleTrace& u) -> Word& { return access(u, me.first, me.second); };
                        if (pa && me == *pa) {
                            auto other = *pb;
                            k.twin = [access, other](CounterexampleTrace& u) -> Word* {
                                return &access(u, other.first, other.second);
                            };
                        }
                        ks.push_back(std::move(k));
                    }
                }
        return ks;
    };

    auto attempt = [&](const Knob& k, Word v) {
        CounterexampleTrace cand = cur;
        k.ref(cand) = v;
        if (k.twin) *k.twin(cand) = v;
        cand.runs.clear();
        if (!find_violation(obl, cand)) return false;
        cur = std::move(cand);
        return true;
    };

    for (bool changed = true; changed;) {
        changed = false;
        for (const Knob& k : knobs(cur))
            if (k.ref(cur) != 0 && attempt(k, 0)) changed = true;
        for (const Knob& k : knobs(cur))
            for (int bit = 63; bit >= 0; --bit) {
                const Word now = k.ref(cur);
                if ((now >> bit & 1) && attempt(k, now & ~(Word{1} << bit))) changed = true;
            }
    }
    if (is_fc_family(obl.mode)) cur.monitor_log = replay_monitor(cur, obl).log;
    return cur;
}

void export_dimacs(const ConstraintSystem& sys, std::ostream& os) {
    Cnf cnf;
    BitBlaster bb(*sys.tm, cnf);
    for (const auto& v : sys.tm->vars()) bb.bits(v.term);
    for (TermId r : sys.roots) bb.assert_true(r);
    write_dimacs(os, cnf, *sys.tm, bb);
}

} // namespace aqed
