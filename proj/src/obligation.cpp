#include "aqed/obligation.hpp"

#include "aqed/error.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace aqed {

std::string_view mode_name(CheckMode m) {
    switch (m) {
    case CheckMode::FC: return "fc";
    case CheckMode::StrongFC: return "strong-fc";
    case CheckMode::IntraFC: return "intra-fc";
    case CheckMode::StrongFCD: return "fcd";
    case CheckMode::SAC: return "sac";
    case CheckMode::RB: return "rb";
    }
    return "?";
}

std::string_view policy_name(InitPolicy p) {
    switch (p) {
    case InitPolicy::Concrete: return "concrete";
    case InitPolicy::Symbolic: return "symbolic";
    case InitPolicy::Constrained: return "constrained";
    }
    return "?";
}

std::optional<CheckMode> parse_mode(std::string_view s) {
    for (CheckMode m : {CheckMode::FC, CheckMode::StrongFC, CheckMode::IntraFC, CheckMode::StrongFCD, CheckMode::SAC,
                        CheckMode::RB})
        if (mode_name(m) == s) return m;
    if (s == "strong-fcd") return CheckMode::StrongFCD;
    return std::nullopt;
}

bool is_fc_family(CheckMode m) { return m != CheckMode::SAC && m != CheckMode::RB; }

std::optional<InitPolicy> parse_policy(std::string_view s) {
    for (InitPolicy p : {InitPolicy::Concrete, InitPolicy::Symbolic, InitPolicy::Constrained})
        if (policy_name(p) == s) return p;
    return std::nullopt;
}

std::size_t CheckObligation::copies() const {
    return mode == CheckMode::StrongFC || mode == CheckMode::StrongFCD ? 2 : 1;
}

std::size_t CheckObligation::batches() const { return mode == CheckMode::FC ? bound : 1; }

std::vector<CellId> CheckObligation::free_cells() const {
    const AcceleratorModel& m = *model;
    std::set<CellId> cells;
    for (CellId c : live_in_cells(m)) cells.insert(c);
    cells.insert(m.layout.relevant.begin(), m.layout.relevant.end());
    for (CellId c : m.layout.input) cells.erase(c);
    std::vector<CellId> out;
    for (CellId c : cells)
        if (policy != InitPolicy::Concrete || !m.initial_values[c]) out.push_back(c);
    return out;
}

std::string CheckObligation::serialize() const {
    std::ostringstream os;
    os << "mode=" << mode_name(mode) << " model=" << model->name << " policy=" << policy_name(policy)
       << " bound=" << bound << " lane=" << lane << " b=" << model->batch_size << " instrs=" << model->program.code.size()
       << " cells=" << model->layout.size() << " free=[";
    bool first = true;
    for (CellId c : free_cells()) {
        os << (first ? "" : ",") << model->layout.cells[c].name;
        first = false;
    }
    os << "]";
    if (allowed_relevant) {
        os << " allowed=[";
        for (std::size_t k = 0; k < allowed_relevant->size(); ++k) {
            os << (k ? ";" : "");
            for (std::size_t i = 0; i < (*allowed_relevant)[k].size(); ++i) os << (i ? "," : "") << (*allowed_relevant)[k][i];
        }
        os << "]";
    }
    if (spec) os << " spec=" << spec->name;
    if (sac_existential) os << " existential=1";
    return os.str();
}

namespace {

CheckObligation base(std::shared_ptr<const AcceleratorModel> m, CheckMode mode, InitPolicy policy) {
    if (!m) throw Error(ErrorKind::Config, "obligation without a model");
    CheckObligation o;
    o.mode = mode;
    o.model = std::move(m);
    o.policy = policy;
    o.label = o.model->name + ":" + std::string(mode_name(mode));
    return o;
}

} // namespace

CheckObligation build_fc(std::shared_ptr<const AcceleratorModel> m, std::size_t n, InitPolicy policy) {
    if (n == 0) throw Error(ErrorKind::Config, "FC needs at least one batch");
    CheckObligation o = base(std::move(m), CheckMode::FC, policy);
    o.bound = n;
    return o;
}

CheckObligation build_strong_fc(std::shared_ptr<const AcceleratorModel> m, InitPolicy policy, bool fcd) {
    return base(std::move(m), fcd ? CheckMode::StrongFCD : CheckMode::StrongFC, policy);
}

CheckObligation build_intra_fc(std::shared_ptr<const AcceleratorModel> m, InitPolicy policy) {
    if (m && m->batch_size < 2)
        throw Error(ErrorKind::NotApplicable, m->name + " has batch size 1; intra-batch FC compares two lanes");
    return base(std::move(m), CheckMode::IntraFC, policy);
}

CheckObligation build_sac(std::shared_ptr<const AcceleratorModel> m, SpecOracle spec, std::size_t lane,
                          std::optional<std::vector<std::vector<Word>>> allowed_relevant, InitPolicy policy) {
    if (!spec.model && !spec.host) throw Error(ErrorKind::Spec, "SAC needs a specification");
    CheckObligation o = base(std::move(m), CheckMode::SAC, policy);
    if (lane >= o.model->batch_size) throw Error(ErrorKind::Config, "SAC lane out of range");
    if (spec.model && spec.model->layout.size() != o.model->layout.size())
        throw Error(ErrorKind::Spec, "spec model does not share the checked model's layout");
    o.spec = std::move(spec);
    o.lane = lane;
    o.allowed_relevant = std::move(allowed_relevant);
    if (o.policy == InitPolicy::Constrained && !o.allowed_relevant)
        throw Error(ErrorKind::Config, "constrained policy needs a relevant-state set");
    return o;
}

CheckObligation build_rb(std::shared_ptr<const AcceleratorModel> m, std::size_t n, InitPolicy policy) {
    if (n == 0) throw Error(ErrorKind::Config, "RB bound must be at least 1");
    CheckObligation o = base(std::move(m), CheckMode::RB, policy);
    o.bound = n;
    return o;
}

MachineState base_state(const CheckObligation& obl) {
    MachineState s = default_initial_state(*obl.model);
    for (CellId c : obl.free_cells()) s.memory[c] = 0;
    return s;
}

bool admissible(const CheckObligation& obl, const MachineState& s) {
    const AcceleratorModel& m = *obl.model;
    if (s.control != m.initial_control() || s.memory.size() != m.layout.size()) return false;
    for (CellId c = 0; c < s.memory.size(); ++c)
        if (s.memory[c] & ~width_mask(m.layout.cells[c].width)) return false;
    if (obl.policy == InitPolicy::Concrete)
        for (CellId c = 0; c < s.memory.size(); ++c)
            if (m.initial_values[c] && m.layout.cells[c].region != Region::Input && s.memory[c] != *m.initial_values[c])
                return false;
    if (obl.allowed_relevant) {
        const std::vector<Word> r = rel(m, s.memory);
        if (std::find(obl.allowed_relevant->begin(), obl.allowed_relevant->end(), r) == obl.allowed_relevant->end())
            return false;
    }
    return true;
}

OutputLane spec_output(const CheckObligation& obl, const Lane& lane, const std::vector<Word>& rel_values) {
    if (!obl.spec) throw Error(ErrorKind::Spec, "obligation has no specification");
    if (obl.spec->host) {
        auto r = obl.spec->host(lane, rel_values);
        if (!r) throw Error(ErrorKind::Spec, "specification undefined for this input");
        return *r;
    }
    const AcceleratorModel& sm = *obl.spec->model;
    MachineState s = default_initial_state(sm);
    const auto& relc = obl.model->layout.relevant;
    for (std::size_t k = 0; k < relc.size(); ++k) s.memory[relc[k]] = rel_values[k];
    InputBatch b{{lane}};
    try {
        auto tr = run_batch(sm, s, b, RunOptions{kDefaultStepBudget, false, false});
        return tr.outputs.back().at(0);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::StepBudgetExceeded || e.kind() == ErrorKind::Config)
            throw Error(ErrorKind::Spec, std::string("specification failed: ") + e.what());
        throw;
    }
}

namespace {

bool same_lane(const Lane& a, const Lane& b) { return a == b; }

struct Runs {
    std::vector<ExecutionTrace> traces;  // one per batch per copy, copy-major
    std::vector<std::vector<Word>> rel_in;
    std::vector<std::vector<Word>> rel_out;
};

// Executes every batch of every copy; traces record only final states.
Runs execute(const CheckObligation& obl, const CounterexampleTrace& t) {
    const AcceleratorModel& m = *obl.model;
    Runs r;
    for (std::size_t c = 0; c < obl.copies(); ++c) {
        MachineState s = t.initial_states.at(c);
        for (const InputBatch& b : t.batches.at(c)) {
            r.rel_in.push_back(rel(m, s.memory));
            r.traces.push_back(run_batch(m, s, b, RunOptions{kDefaultStepBudget, false, false}));
            s = MachineState{m.initial_control(), r.traces.back().final_state().memory};
            r.rel_out.push_back(rel(m, s.memory));
        }
    }
    return r;
}

bool shape_ok(const CheckObligation& obl, const CounterexampleTrace& t) {
    if (t.initial_states.size() != obl.copies() || t.batches.size() != obl.copies()) return false;
    for (std::size_t c = 0; c < obl.copies(); ++c) {
        if (t.batches[c].size() != obl.batches()) return false;
        if (!admissible(obl, t.initial_states[c])) return false;
        for (const auto& b : t.batches[c]) {
            if (b.lanes.size() != obl.model->batch_size) return false;
            for (const auto& l : b.lanes) {
                if (l.action >= obl.model->action_count || l.data.size() != obl.model->in_words) return false;
                for (Word w : l.data)
                    if (w & ~width_mask(obl.model->data_width)) return false;
            }
        }
    }
    if (obl.mode == CheckMode::SAC) {
        const auto& lanes = t.batches[0][0].lanes;
        for (std::size_t j = 0; j < lanes.size(); ++j)
            if (j != obl.lane && !(lanes[j].action == 0 && std::all_of(lanes[j].data.begin(), lanes[j].data.end(),
                                                                         [](Word w) { return w == 0; })))
                return false;
    }
    return true;
}

// Checks one concrete violation candidate; `fixed` pins the lane roles.
bool search(const CheckObligation& obl, CounterexampleTrace& t, bool fixed) {
    if (!shape_ok(obl, t)) return false;
    const AcceleratorModel& m = *obl.model;
    const std::size_t b = m.batch_size;

    if (obl.mode == CheckMode::RB) {
        std::vector<Word> mem = t.initial_states[0].memory;
        place_batch(m, t.batches[0][0], mem);
        auto steps = execute_bounded(m, mem, obl.bound);
        t.runs.clear();
        if (steps) return false;
        t.steps = obl.bound;
        t.description = "no final state within " + std::to_string(obl.bound) + " steps";
        return true;
    }

    Runs r = execute(obl, t);
    auto outputs = [&](std::size_t run) -> const OutputBatch& { return r.traces[run].outputs.back(); };
    auto accept = [&](std::size_t i, std::size_t j, std::size_t jp, const std::string& why) {
        t.batch_index = i;
        t.lane = j;
        t.lane_prime = jp;
        t.runs = std::move(r.traces);
        t.description = why;
        return true;
    };

    switch (obl.mode) {
    case CheckMode::IntraFC: {
        const auto& lanes = t.batches[0][0].lanes;
        for (std::size_t j = 0; j < b; ++j)
            for (std::size_t jp = j + 1; jp < b; ++jp) {
                // the pair is unordered
                if (fixed && (j != std::min(t.lane, t.lane_prime) || jp != std::max(t.lane, t.lane_prime))) continue;
                if (same_lane(lanes[j], lanes[jp]) && outputs(0)[j] != outputs(0)[jp])
                    return accept(0, j, jp, "lanes " + std::to_string(j) + " and " + std::to_string(jp) +
                                                " carry equal inputs but produce different outputs");
            }
        return false;
    }
    case CheckMode::FC: {
        const std::size_t n = obl.bound;
        const auto& last = t.batches[0][n - 1].lanes;
        for (std::size_t i = 0; i < n; ++i) {
            if (r.rel_in[i] != r.rel_in[n - 1]) continue;
            for (std::size_t j = 0; j < b; ++j)
                for (std::size_t jp = 0; jp < b; ++jp) {
                    if (fixed && (i != t.batch_index || j != t.lane || jp != t.lane_prime)) continue;
                    if (same_lane(t.batches[0][i].lanes[j], last[jp]) && outputs(i)[j] != outputs(n - 1)[jp])
                        return accept(i, j, jp,
                                      "batch " + std::to_string(i) + " lane " + std::to_string(j) + " and batch " +
                                          std::to_string(n - 1) + " lane " + std::to_string(jp) +
                                          " see equal inputs and relevant state but produce different outputs");
                }
        }
        return false;
    }
    case CheckMode::StrongFC:
    case CheckMode::StrongFCD: {
        if (r.rel_in[0] != r.rel_in[1]) return false;
        const bool fcd = obl.mode == CheckMode::StrongFCD;
        const bool rel_differs = r.rel_out[0] != r.rel_out[1];
        for (std::size_t j = 0; j < b; ++j)
            for (std::size_t jp = 0; jp < b; ++jp) {
                if (fixed && (j != t.lane || jp != t.lane_prime)) continue;
                if (!same_lane(t.batches[0][0].lanes[j], t.batches[1][0].lanes[jp])) continue;
                if (outputs(0)[j] != outputs(1)[jp])
                    return accept(0, j, jp,
                                  "copy 1 lane " + std::to_string(j) + " and copy 2 lane " + std::to_string(jp) +
                                      " see equal inputs and relevant state but produce different outputs");
                if (fcd && rel_differs)
                    return accept(0, j, jp, "equal inputs and relevant state lead to different final relevant state");
            }
        return false;
    }
    case CheckMode::SAC: {
        const std::size_t j = obl.lane;
        const OutputLane want = spec_output(obl, t.batches[0][0].lanes[j], r.rel_in[0]);
        if (outputs(0)[j] == want) return false;
        return accept(0, j, j, "lane " + std::to_string(j) + " disagrees with the specification");
    }
    default: break;
    }
    return false;
}

} // namespace

bool find_violation(const CheckObligation& obl, CounterexampleTrace& t) {
    t.mode = obl.mode;
    return search(obl, t, false);
}

bool confirms(const CheckObligation& obl, const CounterexampleTrace& t) {
    CounterexampleTrace copy = t;
    return search(obl, copy, true);
}

std::string describe(const CounterexampleTrace& t, const AcceleratorModel& m) {
    std::ostringstream os;
    os << mode_name(t.mode) << " violation on " << m.name << ": " << t.description << "\n";
    for (std::size_t c = 0; c < t.initial_states.size(); ++c) {
        os << "  copy " << c + 1 << " initial:";
        bool any = false;
        for (CellId x = 0; x < t.initial_states[c].memory.size(); ++x) {
            if (m.layout.cells[x].kind != CellKind::Storage) continue;
            if (t.initial_states[c].memory[x] == 0) continue;
            os << " " << m.layout.cells[x].name << "=" << t.initial_states[c].memory[x];
            any = true;
        }
        if (!any) os << " (all zero)";
        os << "\n";
        for (std::size_t i = 0; i < t.batches[c].size(); ++i) {
            os << "  copy " << c + 1 << " batch " << i << ":";
            for (const auto& l : t.batches[c][i].lanes) {
                os << " [";
                if (m.has_actions()) os << "a" << l.action << " ";
                for (std::size_t w = 0; w < l.data.size(); ++w) os << (w ? " " : "") << l.data[w];
                os << "]";
            }
            os << "\n";
        }
    }
    if (t.mode == CheckMode::RB) {
        os << "  steps: more than " << (t.steps ? *t.steps : 0) << "\n";
    } else {
        os << "  i=" << t.batch_index << " j=" << t.lane << " j'=" << t.lane_prime << "\n";
        for (std::size_t r = 0; r < t.runs.size(); ++r) {
            os << "  run " << r << " outputs:";
            for (const auto& lane : t.runs[r].outputs.back()) {
                os << " [";
                for (std::size_t w = 0; w < lane.size(); ++w) os << (w ? " " : "") << lane[w];
                os << "]";
            }
            os << "\n";
        }
    }
    for (const auto& l : t.monitor_log) os << "  monitor: " << l << "\n";
    return os.str();
}

} // namespace aqed
