#include "aqed/drb.hpp"

#include "aqed/error.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <tuple>

namespace aqed {

std::string_view phase_name(WindowPhase p) { return p == WindowPhase::Enlarging ? "enlarging" : "shrinking"; }

namespace {

std::vector<std::uint32_t> value_operands(const Instr& in) {
    switch (in.op) {
    case Opcode::Nop:
    case Opcode::Const:
    case Opcode::Load:
    case Opcode::LoopBack:
    case Opcode::Permute: return {};
    case Opcode::LoadIdx:
    case Opcode::Store:
    case Opcode::Resize:
    case Opcode::Not:
    case Opcode::Neg:
    case Opcode::LoopHead: return {in.a};
    case Opcode::StoreIdx: return {in.a, in.b};
    case Opcode::Select: return {in.a, in.b, in.c};
    default: return {in.a, in.b};
    }
}

bool defines_value(const Instr& in) {
    return in.dst != kNone && in.op != Opcode::Store && in.op != Opcode::StoreIdx && in.op != Opcode::LoopHead &&
           in.op != Opcode::LoopBack;
}

} // namespace

std::pair<std::size_t, std::size_t> close_window(const SsaProgram& ssa, std::size_t top, std::size_t bottom) {
    // loops as 0-based [start, back-edge] ranges
    std::vector<std::pair<std::size_t, std::size_t>> loops;
    for (std::size_t pc = 0; pc < ssa.code.size(); ++pc)
        if (ssa.code[pc].op == Opcode::LoopBack) loops.emplace_back(static_cast<std::size_t>(ssa.code[pc].imm), pc);
    std::size_t t = top - 1, b = bottom - 1;
    for (bool changed = true; changed;) {
        changed = false;
        for (auto [s, e] : loops) {
            const bool overlaps = s <= b && t <= e;
            const bool inside = t <= s && e <= b;
            if (overlaps && !inside) {
                t = std::min(t, s);
                b = std::max(b, e);
                changed = true;
            }
        }
    }
    return {t + 1, b + 1};
}

SubModel window_to_submodel(const SsaProgram& ssa, const WindowState& w) {
    if (w.top_line < 1 || w.top_line > w.bottom_line || w.bottom_line > ssa.code.size())
        throw Error(ErrorKind::Config, "window " + std::to_string(w.top_line) + ".." + std::to_string(w.bottom_line) +
                                           " is outside the program");
    const auto [top, bottom] = close_window(ssa, w.top_line, w.bottom_line);
    const std::size_t t0 = top - 1, b0 = bottom - 1;

    std::vector<char> def_in(ssa.values.size(), 0);
    std::set<std::uint32_t> used_values;
    std::set<CellId> read_cells, written_cells;
    for (std::size_t pc = t0; pc <= b0; ++pc) {
        const Instr& in = ssa.code[pc];
        if (defines_value(in)) def_in[in.dst] = 1;
        for (auto v : value_operands(in))
            if (v != kNone) used_values.insert(v);
        if (in.op == Opcode::Load) read_cells.insert(in.base);
        if (in.op == Opcode::LoadIdx)
            for (std::uint32_t k = 0; k < in.count; ++k) read_cells.insert(in.base + k);
        if (in.op == Opcode::Store) written_cells.insert(in.base);
        if (in.op == Opcode::StoreIdx)
            for (std::uint32_t k = 0; k < in.count; ++k) written_cells.insert(in.base + k);
    }
    std::set<std::uint32_t> escaping;
    for (std::size_t pc = b0 + 1; pc < ssa.code.size(); ++pc)
        for (auto v : value_operands(ssa.code[pc]))
            if (v != kNone && def_in[v]) escaping.insert(v);

    const CellId value_base = static_cast<CellId>(ssa.cells.size());
    std::vector<CellId> inputs, outputs;
    SubModel sm;
    for (CellId c : read_cells)
        if (!written_cells.count(c)) {
            inputs.push_back(c);
            sm.input_names.push_back(ssa.cells[c].name);
        }
    for (auto v : used_values)
        if (!def_in[v]) {
            inputs.push_back(value_base + v);
            sm.input_names.push_back(ssa.values[v].name);
        }
    for (CellId c : written_cells) {
        outputs.push_back(c);
        sm.output_names.push_back(ssa.cells[c].name);
    }
    for (auto v : escaping) {
        outputs.push_back(value_base + v);
        sm.output_names.push_back(ssa.values[v].name);
    }
    if (outputs.empty())
        throw Error(ErrorKind::EmptyInterface,
                    "window " + std::to_string(top) + ".." + std::to_string(bottom) + " defines nothing used later");

    SsaProgram sub;
    sub.cells = ssa.cells;
    sub.values = ssa.values;
    // a loop may not start at the initial control state
    bool pad = false;
    for (std::size_t pc = t0; pc <= b0; ++pc)
        if (ssa.code[pc].op == Opcode::LoopBack && ssa.code[pc].imm == t0) pad = true;
    const std::size_t shift = pad ? 1 : 0;
    if (pad) sub.code.push_back(Instr{});
    for (std::size_t pc = t0; pc <= b0; ++pc) {
        Instr in = ssa.code[pc];
        if (in.op == Opcode::LoopHead) in.imm = in.imm - t0 + shift;
        if (in.op == Opcode::LoopBack) {
            in.imm = in.imm - t0 + shift;
            in.b = static_cast<std::uint32_t>(in.b - t0 + shift);
        }
        sub.code.push_back(in);
    }

    auto m = std::make_shared<AcceleratorModel>();
    m->name = "W" + std::to_string(top) + "-" + std::to_string(bottom);
    m->control_tag = m->name;
    m->program = to_model_program(sub, value_base);
    m->layout.cells = ssa.cells;
    for (const auto& v : ssa.values) m->layout.cells.push_back(CellInfo{v.name, v.width, Region::NonRelevant, CellKind::Temp});
    for (auto& c : m->layout.cells) c.region = Region::NonRelevant;
    for (CellId c : inputs) m->layout.cells[c].region = Region::Input;
    for (CellId c : outputs) m->layout.cells[c].region = Region::Output;
    m->layout.rebuild_regions();
    m->layout.input = inputs;
    m->layout.output = outputs;
    m->layout.in_cells_per_lane = inputs.size();
    m->layout.out_cells_per_lane = outputs.size();
    m->batch_size = 1;
    m->action_count = 1;
    m->in_words = inputs.size();
    m->out_words = outputs.size();
    m->data_width = 1;
    for (CellId c : inputs) m->data_width = std::max(m->data_width, m->layout.cells[c].width);
    m->output_width = 1;
    for (CellId c : outputs) m->output_width = std::max(m->output_width, m->layout.cells[c].width);
    m->initial_values.assign(m->layout.cells.size(), std::nullopt);
    m->validate();

    sm.model = std::move(m);
    sm.top = top;
    sm.bottom = bottom;
    return sm;
}

std::vector<bool> DrbCampaign::coverage() const {
    std::vector<bool> cov(lines, false);
    for (const auto& r : state.history)
        if (r.verdict && *r.verdict != Verdict::Unknown)
            for (std::size_t l = r.covered_top; l <= r.covered_bottom && l <= lines; ++l) cov[l - 1] = true;
    return cov;
}

DrbCampaign slide(const SsaProgram& ssa, const DrbOptions& opts) {
    if (opts.bound == 0) throw Error(ErrorKind::Config, "RB bound must be at least 1");
    if (opts.delta == 0) throw Error(ErrorKind::Config, "window step must be at least 1");
    if (opts.window == 0) throw Error(ErrorKind::Config, "initial window size must be at least 1");
    const auto start = std::chrono::steady_clock::now();
    DrbCampaign c;
    c.lines = ssa.code.size();
    c.bound = opts.bound;
    WindowState& w = c.state;
    w.delta = opts.delta;
    const std::size_t L = c.lines;
    if (L == 0) {
        c.reached_end = true;
        return c;
    }
    w.top_line = 1;
    w.bottom_line = std::min(opts.window, L);
    w.phase = WindowPhase::Enlarging;

    for (;;) {
        const auto t0 = std::chrono::steady_clock::now();
        w.bottom_line = std::max(w.bottom_line, close_window(ssa, w.top_line, w.bottom_line).second);
        WindowRecord rec;
        rec.phase = w.phase;
        rec.top = w.top_line;
        rec.bottom = w.bottom_line;
        std::tie(rec.covered_top, rec.covered_bottom) = close_window(ssa, w.top_line, w.bottom_line);
        std::optional<SubModel> sub;
        try {
            sub = window_to_submodel(ssa, w);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyInterface) throw;
        }
        if (!sub) {
            w.history.push_back(rec);
            if (w.bottom_line == L) {
                c.reached_end = true;
                break;
            }
            ++w.bottom_line;
            continue;
        }
        rec.inputs = sub->input_names.size();
        rec.outputs = sub->output_names.size();
        CheckObligation obl = build_rb(sub->model, opts.bound, InitPolicy::Symbolic);
        obl.label = sub->model->name;
        CheckResult r;
        try {
            r = check(obl, Backend::Sat, opts.budget);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::UnrollCap) throw;
            r.verdict = Verdict::Unknown;
            r.unknown_cause = "unroll";
        }
        rec.verdict = r.verdict;
        rec.unknown_cause = r.unknown_cause;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        w.history.push_back(rec);

        if (r.verdict == Verdict::Sat) {
            c.failed = true;
            c.failing = std::move(sub);
            c.failing_obligation = std::move(obl);
            c.failing_result = std::move(r);
            break;
        }
        if (w.bottom_line == L) {
            c.reached_end = true;
            break;
        }
        if (r.verdict == Verdict::Unsat) {
            w.phase = WindowPhase::Enlarging;
            w.bottom_line = std::min(w.bottom_line + w.delta, L);
        } else {
            w.phase = WindowPhase::Shrinking;
            if (w.top_line == w.bottom_line) {
                w.top_line = w.bottom_line = w.bottom_line + 1;
            } else {
                w.top_line = std::min(w.top_line + w.delta, w.bottom_line);
            }
        }
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return c;
}

std::optional<std::string> history_violation(const WindowState& w, std::size_t lines) {
    const auto& h = w.history;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const WindowRecord& r = h[k];
        const std::string at = "window " + std::to_string(k + 1) + " (" + std::to_string(r.top) + ".." +
                               std::to_string(r.bottom) + ")";
        if (r.top < 1 || r.top > r.bottom || r.bottom > lines) return at + " is malformed";
        if (r.covered_top > r.top || r.covered_bottom < r.bottom) return at + " does not cover its own lines";
        if (k + 1 == h.size()) break;
        const WindowRecord& n = h[k + 1];
        if (r.verdict == Verdict::Sat) return at + " failed but the campaign continued";
        if (n.top < r.top) return at + ": top moved up";
        if (!r.verdict || *r.verdict == Verdict::Unsat) {
            if (n.top != r.top || n.bottom <= r.bottom) return at + ": passed but the window did not enlarge";
        } else {
            if (n.phase != WindowPhase::Shrinking) return at + ": timed out but the next window is not shrinking";
            const bool shrunk = n.top > r.top && n.bottom == r.bottom;
            const bool advanced = r.top == r.bottom && n.top == r.bottom + 1 && n.bottom >= n.top;
            if (!shrunk && !advanced) return at + ": timed out but the window did not shrink";
        }
    }
    return std::nullopt;
}

} // namespace aqed
