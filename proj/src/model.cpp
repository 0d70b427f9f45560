#include "aqed/model.hpp"

#include "aqed/error.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace aqed {

std::string_view region_name(Region r) {
    switch (r) {
    case Region::Input: return "in";
    case Region::Output: return "out";
    case Region::Relevant: return "rel";
    case Region::NonRelevant: return "nrel";
    }
    return "?";
}

std::string_view opcode_name(Opcode op) {
    switch (op) {
    case Opcode::Nop: return "nop";
    case Opcode::Const: return "const";
    case Opcode::Load: return "load";
    case Opcode::LoadIdx: return "loadidx";
    case Opcode::Store: return "store";
    case Opcode::StoreIdx: return "storeidx";
    case Opcode::Resize: return "resize";
    case Opcode::Not: return "not";
    case Opcode::Neg: return "neg";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::And: return "and";
    case Opcode::Or: return "or";
    case Opcode::Xor: return "xor";
    case Opcode::Shl: return "shl";
    case Opcode::Lshr: return "lshr";
    case Opcode::Eq: return "eq";
    case Opcode::Ne: return "ne";
    case Opcode::Ult: return "ult";
    case Opcode::Ule: return "ule";
    case Opcode::Select: return "select";
    case Opcode::LoopHead: return "loophead";
    case Opcode::LoopBack: return "loopback";
    case Opcode::Permute: return "permute";
    }
    return "?";
}

bool is_binary(Opcode op) {
    switch (op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Xor:
    case Opcode::Shl:
    case Opcode::Lshr:
    case Opcode::Eq:
    case Opcode::Ne:
    case Opcode::Ult:
    case Opcode::Ule:
        return true;
    default:
        return false;
    }
}

bool Program::has_loops() const {
    return std::any_of(code.begin(), code.end(), [](const Instr& i) { return i.op == Opcode::LoopHead; });
}

void MemoryLayout::rebuild_regions() {
    input.clear();
    output.clear();
    relevant.clear();
    nonrelevant.clear();
    for (CellId c = 0; c < cells.size(); ++c) {
        switch (cells[c].region) {
        case Region::Input: input.push_back(c); break;
        case Region::Output: output.push_back(c); break;
        case Region::Relevant: relevant.push_back(c); break;
        case Region::NonRelevant: nonrelevant.push_back(c); break;
        }
    }
}

void AcceleratorModel::validate() const {
    auto fail = [&](const std::string& what) { throw Error(ErrorKind::Internal, "model " + name + ": " + what); };
    if (batch_size < 1) fail("batch size must be at least 1");
    if (initial_values.size() != layout.cells.size()) fail("initial value table does not cover memory");
    std::vector<int> seen(layout.cells.size(), 0);
    auto mark = [&](const std::vector<CellId>& ids, Region r) {
        for (CellId c : ids) {
            if (c >= layout.cells.size()) fail("region cell out of range");
            if (layout.cells[c].region != r) fail("region tag mismatch on " + layout.cells[c].name);
            ++seen[c];
        }
    };
    mark(layout.input, Region::Input);
    mark(layout.output, Region::Output);
    mark(layout.relevant, Region::Relevant);
    mark(layout.nonrelevant, Region::NonRelevant);
    for (std::size_t c = 0; c < seen.size(); ++c)
        if (seen[c] != 1) fail("cell " + layout.cells[c].name + " is not in exactly one region");
    if (layout.input.size() != batch_size * layout.in_cells_per_lane) fail("input region size mismatch");
    if (layout.output.size() != batch_size * layout.out_cells_per_lane) fail("output region size mismatch");
    for (const auto& cell : layout.cells)
        if (cell.width == 0 || cell.width > kMaxWidth) fail("cell width out of range: " + cell.name);
    for (std::size_t pc = 0; pc < program.code.size(); ++pc) {
        const Instr& in = program.code[pc];
        if (in.op == Opcode::LoopBack && in.imm == 0) fail("back-edge re-enters the initial control state");
        if (in.op == Opcode::LoopBack &&
            (in.b >= program.code.size() || program.code[in.b].op != Opcode::LoopHead || in.imm > in.b))
            fail("back-edge does not close a loop head");
    }
}

std::vector<Word> project(const MemoryLayout& layout, Region region, std::span<const Word> memory) {
    const std::vector<CellId>* ids = nullptr;
    switch (region) {
    case Region::Input: ids = &layout.input; break;
    case Region::Output: ids = &layout.output; break;
    case Region::Relevant: ids = &layout.relevant; break;
    case Region::NonRelevant: ids = &layout.nonrelevant; break;
    }
    std::vector<Word> result;
    result.reserve(ids->size());
    for (CellId c : *ids) result.push_back(memory[c]);
    return result;
}

std::vector<Word> inp(const AcceleratorModel& m, std::span<const Word> memory) {
    return project(m.layout, Region::Input, memory);
}
std::vector<Word> out(const AcceleratorModel& m, std::span<const Word> memory) {
    return project(m.layout, Region::Output, memory);
}
std::vector<Word> rel(const AcceleratorModel& m, std::span<const Word> memory) {
    return project(m.layout, Region::Relevant, memory);
}
std::vector<Word> nrel(const AcceleratorModel& m, std::span<const Word> memory) {
    return project(m.layout, Region::NonRelevant, memory);
}

std::vector<Word> reassemble(const MemoryLayout& layout, std::span<const Word> in, std::span<const Word> out,
                             std::span<const Word> rel, std::span<const Word> nrel) {
    if (in.size() != layout.input.size() || out.size() != layout.output.size() ||
        rel.size() != layout.relevant.size() || nrel.size() != layout.nonrelevant.size())
        throw Error(ErrorKind::Internal, "reassemble: region sizes do not match layout");
    std::vector<Word> memory(layout.cells.size(), 0);
    for (std::size_t i = 0; i < in.size(); ++i) memory[layout.input[i]] = in[i];
    for (std::size_t i = 0; i < out.size(); ++i) memory[layout.output[i]] = out[i];
    for (std::size_t i = 0; i < rel.size(); ++i) memory[layout.relevant[i]] = rel[i];
    for (std::size_t i = 0; i < nrel.size(); ++i) memory[layout.nonrelevant[i]] = nrel[i];
    return memory;
}

InputBatch zero_batch(const AcceleratorModel& m) {
    InputBatch batch;
    batch.lanes.assign(m.batch_size, Lane{0, std::vector<Word>(m.in_words, 0)});
    return batch;
}

void place_batch(const AcceleratorModel& m, const InputBatch& batch, std::vector<Word>& memory) {
    if (batch.lanes.size() != m.batch_size)
        throw Error(ErrorKind::Config, "batch has " + std::to_string(batch.lanes.size()) + " lanes, model expects " +
                                           std::to_string(m.batch_size));
    const std::size_t per_lane = m.layout.in_cells_per_lane;
    const std::size_t offset = m.has_actions() ? 1 : 0;
    for (std::size_t j = 0; j < batch.lanes.size(); ++j) {
        const Lane& lane = batch.lanes[j];
        if (lane.data.size() != m.in_words)
            throw Error(ErrorKind::Config, "lane " + std::to_string(j) + " carries the wrong number of words");
        if (lane.action >= m.action_count)
            throw Error(ErrorKind::Config, "lane " + std::to_string(j) + " action out of range");
        if (m.has_actions()) memory[m.layout.input[j * per_lane]] = lane.action;
        for (std::size_t w = 0; w < lane.data.size(); ++w) {
            CellId c = m.layout.input[j * per_lane + offset + w];
            memory[c] = lane.data[w] & width_mask(m.layout.cells[c].width);
        }
    }
}

InputBatch read_batch(const AcceleratorModel& m, std::span<const Word> memory) {
    InputBatch batch;
    const std::size_t per_lane = m.layout.in_cells_per_lane;
    const std::size_t offset = m.has_actions() ? 1 : 0;
    for (std::size_t j = 0; j < m.batch_size; ++j) {
        Lane lane;
        lane.action = m.has_actions() ? memory[m.layout.input[j * per_lane]] : 0;
        for (std::size_t w = 0; w < m.in_words; ++w) lane.data.push_back(memory[m.layout.input[j * per_lane + offset + w]]);
        batch.lanes.push_back(std::move(lane));
    }
    return batch;
}

OutputBatch read_outputs(const AcceleratorModel& m, std::span<const Word> memory) {
    OutputBatch result(m.batch_size);
    const std::size_t per_lane = m.layout.out_cells_per_lane;
    for (std::size_t j = 0; j < m.batch_size; ++j)
        for (std::size_t w = 0; w < per_lane; ++w) result[j].push_back(memory[m.layout.output[j * per_lane + w]]);
    return result;
}

MachineState default_initial_state(const AcceleratorModel& m) {
    MachineState s;
    s.control = m.initial_control();
    s.memory.assign(m.layout.cells.size(), 0);
    for (std::size_t c = 0; c < s.memory.size(); ++c)
        if (m.initial_values[c]) s.memory[c] = *m.initial_values[c];
    return s;
}

namespace {

Word eval_binary(Opcode op, Word x, Word y, unsigned width) {
    const Word mask = width_mask(width);
    switch (op) {
    case Opcode::Add: return (x + y) & mask;
    case Opcode::Sub: return (x - y) & mask;
    case Opcode::Mul: return (x * y) & mask;
    case Opcode::And: return x & y & mask;
    case Opcode::Or: return (x | y) & mask;
    case Opcode::Xor: return (x ^ y) & mask;
    case Opcode::Shl: return y >= width ? 0 : (x << y) & mask;
    case Opcode::Lshr: return y >= 64 ? 0 : (x >> y) & mask;
    case Opcode::Eq: return x == y ? 1 : 0;
    case Opcode::Ne: return x != y ? 1 : 0;
    case Opcode::Ult: return x < y ? 1 : 0;
    case Opcode::Ule: return x <= y ? 1 : 0;
    default: break;
    }
    throw Error(ErrorKind::Internal, "not a binary opcode");
}

struct RegionGuard {
    const AcceleratorModel& model;
    std::vector<char> written;

    void on_read(CellId c) {
        if (model.layout.cells[c].region == Region::Output && !written[c])
            throw Error(ErrorKind::Region, "read of output cell " + model.layout.cells[c].name + " before it was written");
    }
    void on_write(CellId c) {
        if (model.layout.cells[c].region == Region::Input)
            throw Error(ErrorKind::Region, "write to input cell " + model.layout.cells[c].name);
        written[c] = 1;
    }
};

// Executes the instruction at `pc`; returns the successor control state.
ControlId exec_one(const AcceleratorModel& m, ControlId pc, std::vector<Word>& mem, RegionGuard* guard) {
    const Instr& in = m.program.code[pc];
    const Word mask = width_mask(in.width);
    switch (in.op) {
    case Opcode::Nop: break;
    case Opcode::Const: mem[in.dst] = in.imm & mask; break;
    case Opcode::Load:
        if (guard) guard->on_read(in.base);
        mem[in.dst] = mem[in.base];
        break;
    case Opcode::LoadIdx: {
        Word idx = mem[in.a];
        if (idx < in.count) {
            if (guard) guard->on_read(static_cast<CellId>(in.base + idx));
            mem[in.dst] = mem[in.base + idx];
        } else {
            mem[in.dst] = 0;
        }
        break;
    }
    case Opcode::Store:
        if (guard) guard->on_write(in.base);
        mem[in.base] = mem[in.a] & width_mask(m.layout.cells[in.base].width);
        break;
    case Opcode::StoreIdx: {
        Word idx = mem[in.b];
        if (idx < in.count) {
            CellId target = static_cast<CellId>(in.base + idx);
            if (guard) guard->on_write(target);
            mem[target] = mem[in.a] & width_mask(m.layout.cells[target].width);
        }
        break;
    }
    case Opcode::Resize: mem[in.dst] = mem[in.a] & mask; break;
    case Opcode::Not: mem[in.dst] = ~mem[in.a] & mask; break;
    case Opcode::Neg: mem[in.dst] = (Word{0} - mem[in.a]) & mask; break;
    case Opcode::Select: mem[in.dst] = (mem[in.a] != 0 ? mem[in.b] : mem[in.c]) & mask; break;
    case Opcode::LoopHead:
        if (mem[in.a] == 0) return static_cast<ControlId>(in.imm);
        break;
    case Opcode::LoopBack:
        if (in.imm == m.initial_control())
            throw Error(ErrorKind::Internal, "control returned to the initial control state");
        return static_cast<ControlId>(in.imm);
    case Opcode::Permute:
        for (auto [p, q] : m.program.permutations.at(in.imm)) std::swap(mem[p], mem[q]);
        break;
    default:
        mem[in.dst] = eval_binary(in.op, mem[in.a], mem[in.b], in.width);
        break;
    }
    return pc + 1;
}

} // namespace

MachineState step(const AcceleratorModel& m, const MachineState& s) {
    if (s.control >= m.final_control()) throw Error(ErrorKind::Internal, "step from a final state");
    MachineState next = s;
    next.control = exec_one(m, s.control, next.memory, nullptr);
    return next;
}

std::optional<std::size_t> execute_bounded(const AcceleratorModel& m, std::vector<Word>& memory, std::size_t budget) {
    const ControlId final = m.final_control();
    ControlId pc = m.initial_control();
    std::size_t steps = 0;
    while (pc != final) {
        if (steps == budget) return std::nullopt;
        pc = exec_one(m, pc, memory, nullptr);
        ++steps;
    }
    return steps;
}

namespace {

void append_batch_run(const AcceleratorModel& m, std::vector<Word> memory, const InputBatch& batch,
                      const RunOptions& opts, ExecutionTrace& trace) {
    place_batch(m, batch, memory);
    std::optional<RegionGuard> guard;
    if (opts.check_regions) guard.emplace(RegionGuard{m, std::vector<char>(memory.size(), 0)});

    trace.initial_marks.push_back(trace.states.size());
    if (opts.record_states) trace.states.push_back(MachineState{m.initial_control(), memory});

    const ControlId final = m.final_control();
    ControlId pc = m.initial_control();
    std::size_t steps = 0;
    while (pc != final) {
        if (steps == opts.step_budget)
            throw Error(ErrorKind::StepBudgetExceeded,
                        "no final state within " + std::to_string(opts.step_budget) + " steps");
        pc = exec_one(m, pc, memory, guard ? &*guard : nullptr);
        ++steps;
        if (pc == m.initial_control()) throw Error(ErrorKind::Internal, "initial control state recurred");
        if (opts.record_states) trace.states.push_back(MachineState{pc, memory});
    }
    if (!opts.record_states) {
        trace.states.push_back(MachineState{pc, memory});
    }
    trace.final_marks.push_back(trace.states.size() - 1);
    trace.outputs.push_back(read_outputs(m, memory));
    trace.steps += steps;
}

} // namespace

ExecutionTrace run_batch(const AcceleratorModel& m, const MachineState& init, const InputBatch& batch,
                         const RunOptions& opts) {
    return run_sequence(m, init, std::span<const InputBatch>(&batch, 1), opts);
}

ExecutionTrace run_sequence(const AcceleratorModel& m, const MachineState& init, std::span<const InputBatch> batches,
                            const RunOptions& opts) {
    if (init.control != m.initial_control())
        throw Error(ErrorKind::Config, "run must start in the initial control state");
    if (init.memory.size() != m.layout.cells.size()) throw Error(ErrorKind::Config, "memory size does not match model");
    ExecutionTrace trace;
    std::vector<Word> memory = init.memory;
    for (const InputBatch& batch : batches) {
        append_batch_run(m, memory, batch, opts, trace);
        memory = trace.states.back().memory;
    }
    return trace;
}

namespace {

// Mixed-radix odometer over cell domains; returns false after the last value.
bool advance(std::vector<Word>& digits, const std::vector<Word>& radix) {
    for (std::size_t i = digits.size(); i-- > 0;) {
        if (++digits[i] < radix[i]) return true;
        digits[i] = 0;
    }
    return false;
}

std::size_t checked_product(const std::vector<Word>& radix, std::size_t cap) {
    std::size_t total = 1;
    for (Word r : radix) {
        if (r != 0 && total > cap / r) throw Error(ErrorKind::ExplosionCap, "state space exceeds cap " + std::to_string(cap));
        total *= r;
    }
    if (total > cap) throw Error(ErrorKind::ExplosionCap, "state space exceeds cap " + std::to_string(cap));
    return total;
}

// Every input batch of the model, in lexicographic order.
std::vector<InputBatch> all_batches(const AcceleratorModel& m, std::size_t cap) {
    std::vector<Word> radix;
    for (std::size_t j = 0; j < m.batch_size; ++j) {
        if (m.has_actions()) radix.push_back(m.action_count);
        for (std::size_t w = 0; w < m.in_words; ++w) {
            CellId c = m.layout.input[j * m.layout.in_cells_per_lane + (m.has_actions() ? 1 : 0) + w];
            radix.push_back(Word{1} << m.layout.cells[c].width);
        }
    }
    checked_product(radix, cap);
    std::vector<InputBatch> result;
    std::vector<Word> digits(radix.size(), 0);
    do {
        InputBatch batch;
        std::size_t k = 0;
        for (std::size_t j = 0; j < m.batch_size; ++j) {
            Lane lane;
            if (m.has_actions()) lane.action = digits[k++];
            for (std::size_t w = 0; w < m.in_words; ++w) lane.data.push_back(digits[k++]);
            batch.lanes.push_back(std::move(lane));
        }
        result.push_back(std::move(batch));
    } while (advance(digits, radix));
    return result;
}

} // namespace

std::set<MachineState> enumerate_reachable(const AcceleratorModel& m, std::size_t depth, std::size_t cap) {
    std::vector<CellId> free_cells;
    std::vector<Word> radix;
    for (CellId c = 0; c < m.layout.cells.size(); ++c) {
        if (m.initial_values[c]) continue;
        free_cells.push_back(c);
        radix.push_back(Word{1} << m.layout.cells[c].width);
    }
    checked_product(radix, cap);
    const std::vector<InputBatch> batches = depth > 0 ? all_batches(m, cap) : std::vector<InputBatch>{};

    std::set<MachineState> reachable;
    std::set<std::vector<Word>> frontier;
    MachineState base = default_initial_state(m);
    std::vector<Word> digits(free_cells.size(), 0);
    do {
        for (std::size_t i = 0; i < free_cells.size(); ++i) base.memory[free_cells[i]] = digits[i];
        reachable.insert(base);
        frontier.insert(base.memory);
    } while (advance(digits, radix));

    std::set<std::vector<Word>> expanded;
    for (std::size_t d = 0; d < depth && !frontier.empty(); ++d) {
        std::set<std::vector<Word>> next;
        for (const auto& memory : frontier) {
            if (!expanded.insert(memory).second) continue;
            for (const InputBatch& batch : batches) {
                ExecutionTrace t = run_batch(m, MachineState{m.initial_control(), memory}, batch);
                for (auto& s : t.states) {
                    reachable.insert(s);
                    if (reachable.size() > cap)
                        throw Error(ErrorKind::ExplosionCap, "reachable set exceeds cap " + std::to_string(cap));
                }
                next.insert(t.final_state().memory);
            }
        }
        frontier = std::move(next);
    }
    return reachable;
}

std::set<std::vector<Word>> reachable_relevant(const AcceleratorModel& m, std::size_t depth, std::size_t cap) {
    std::vector<CellId> tracked = live_in_cells(m);
    for (CellId c : m.layout.relevant) tracked.push_back(c);
    std::sort(tracked.begin(), tracked.end());
    tracked.erase(std::unique(tracked.begin(), tracked.end()), tracked.end());
    std::erase_if(tracked, [&](CellId c) { return m.layout.cells[c].region == Region::Input; });

    std::vector<CellId> free_cells;
    std::vector<Word> radix;
    for (CellId c : tracked) {
        if (m.initial_values[c]) continue;
        free_cells.push_back(c);
        radix.push_back(Word{1} << m.layout.cells[c].width);
    }
    checked_product(radix, cap);
    const std::vector<InputBatch> batches = depth > 0 ? all_batches(m, cap) : std::vector<InputBatch>{};

    auto key_of = [&](const std::vector<Word>& memory) {
        std::vector<Word> key;
        for (CellId c : tracked) key.push_back(memory[c]);
        return key;
    };

    std::set<std::vector<Word>> result;
    std::set<std::vector<Word>> frontier;
    std::vector<Word> memory = default_initial_state(m).memory;
    std::vector<Word> digits(free_cells.size(), 0);
    do {
        for (std::size_t i = 0; i < free_cells.size(); ++i) memory[free_cells[i]] = digits[i];
        result.insert(rel(m, memory));
        frontier.insert(key_of(memory));
    } while (advance(digits, radix));

    std::set<std::vector<Word>> expanded;
    for (std::size_t d = 0; d < depth && !frontier.empty(); ++d) {
        std::set<std::vector<Word>> next;
        for (const auto& key : frontier) {
            if (!expanded.insert(key).second) continue;
            for (const InputBatch& batch : batches) {
                std::vector<Word> mem(m.layout.cells.size(), 0);
                for (std::size_t i = 0; i < tracked.size(); ++i) mem[tracked[i]] = key[i];
                place_batch(m, batch, mem);
                ControlId pc = m.initial_control();
                std::size_t steps = 0;
                while (pc != m.final_control()) {
                    if (steps++ == kDefaultStepBudget)
                        throw Error(ErrorKind::StepBudgetExceeded, "reachability run did not terminate");
                    pc = exec_one(m, pc, mem, nullptr);
                    result.insert(rel(m, mem));
                }
                next.insert(key_of(mem));
                if (result.size() > cap || next.size() > cap)
                    throw Error(ErrorKind::ExplosionCap, "reachable set exceeds cap " + std::to_string(cap));
            }
        }
        frontier = std::move(next);
    }
    return result;
}

std::vector<CellId> live_in_cells(const AcceleratorModel& m) {
    const auto& code = m.program.code;
    const std::size_t n = m.layout.cells.size();
    std::vector<char> written(n, 0);
    std::vector<CellId> origin(n);
    for (CellId c = 0; c < n; ++c) origin[c] = c;
    std::vector<char> live(n, 0);

    std::map<std::size_t, std::size_t> loop_end;  // loop start pc -> back-edge pc
    for (std::size_t pc = 0; pc < code.size(); ++pc)
        if (code[pc].op == Opcode::LoopBack) loop_end[static_cast<std::size_t>(code[pc].imm)] = pc;

    std::vector<std::vector<char>> saved;
    auto read = [&](std::uint32_t c) {
        if (c != kNone && !written[c]) live[origin[c]] = 1;
    };
    for (std::size_t pc = 0; pc < code.size(); ++pc) {
        if (auto it = loop_end.find(pc); it != loop_end.end()) saved.push_back(written);
        const Instr& in = code[pc];
        switch (in.op) {
        case Opcode::Load: read(in.base); written[in.dst] = 1; break;
        case Opcode::LoadIdx:
            read(in.a);
            for (std::uint32_t k = 0; k < in.count; ++k) read(in.base + k);
            written[in.dst] = 1;
            break;
        case Opcode::Store: read(in.a); written[in.base] = 1; break;
        case Opcode::StoreIdx: read(in.a); read(in.b); break;
        case Opcode::LoopHead: read(in.a); break;
        case Opcode::LoopBack:
            written = std::move(saved.back());
            saved.pop_back();
            break;
        case Opcode::Permute:
            for (auto [p, q] : m.program.permutations.at(in.imm)) {
                std::swap(written[p], written[q]);
                std::swap(origin[p], origin[q]);
            }
            break;
        case Opcode::Nop: break;
        default:
            read(in.a);
            read(in.b);
            read(in.c);
            if (in.dst != kNone) written[in.dst] = 1;
            break;
        }
    }
    std::vector<CellId> result;
    for (CellId c = 0; c < n; ++c)
        if (live[c]) result.push_back(c);
    return result;
}

} // namespace aqed
