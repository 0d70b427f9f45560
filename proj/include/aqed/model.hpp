#pragma once

// Executable batch-mode accelerator model: a flat vector of bitvector cells
// partitioned into input/output/relevant/non-relevant regions, and a program
// counter stepping through a lowered instruction list. One instruction is
// one transition; the final control state is the pc one past the last
// instruction.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace aqed {

using Word = std::uint64_t;
using CellId = std::uint32_t;
using ControlId = std::uint32_t;

inline constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
inline constexpr unsigned kMaxWidth = 32;
inline constexpr std::size_t kDefaultStepBudget = std::size_t{1} << 20;

constexpr Word width_mask(unsigned width) {
    return width >= 64 ? ~Word{0} : ((Word{1} << width) - 1);
}

enum class Region : std::uint8_t { Input, Output, Relevant, NonRelevant };
enum class CellKind : std::uint8_t { Storage, Port, Temp };

std::string_view region_name(Region r);

struct CellInfo {
    std::string name;
    unsigned width = 8;
    Region region = Region::NonRelevant;
    CellKind kind = CellKind::Storage;
};

enum class Opcode : std::uint8_t {
    Nop,
    Const,
    Load,
    LoadIdx,
    Store,
    StoreIdx,
    Resize,
    Not,
    Neg,
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
    Eq,
    Ne,
    Ult,
    Ule,
    Select,
    LoopHead,
    LoopBack,
    Permute,
};

std::string_view opcode_name(Opcode op);
bool is_binary(Opcode op);

/// One lowered instruction. In an SsaProgram, dst/a/b/c index SSA values;
/// in a model Program they index memory cells. `base` always indexes cells.
///
///   Const     dst := imm
///   Load      dst := mem[base]
///   LoadIdx   dst := a < count ? mem[base + a] : 0
///   Store     mem[base] := a
///   StoreIdx  if b < count: mem[base + b] := a
///   Resize    dst := a truncated/zero-extended to width
///   unary     dst := op a            binary  dst := a op b
///   Select    dst := a ? b : c
///   LoopHead  if a == 0 goto imm      (imm = loop exit)
///   LoopBack  goto imm                (imm = loop start, b = LoopHead pc)
///   Permute   swap cell pairs of permutation table entry imm
struct Instr {
    Opcode op = Opcode::Nop;
    std::uint32_t dst = kNone;
    std::uint32_t a = kNone;
    std::uint32_t b = kNone;
    std::uint32_t c = kNone;
    std::uint32_t base = kNone;
    std::uint32_t count = 0;
    Word imm = 0;
    unsigned width = 0;
    int line = 0;
};

struct Program {
    std::vector<Instr> code;
    std::vector<std::vector<std::pair<CellId, CellId>>> permutations;

    bool has_loops() const;
};

struct MemoryLayout {
    std::vector<CellInfo> cells;
    std::vector<CellId> input;   // lane-major, in_cells_per_lane per lane
    std::vector<CellId> output;  // lane-major, out_cells_per_lane per lane
    std::vector<CellId> relevant;
    std::vector<CellId> nonrelevant;
    std::size_t in_cells_per_lane = 0;
    std::size_t out_cells_per_lane = 0;

    std::size_t size() const { return cells.size(); }
    /// Rebuild the four region index lists from the per-cell region tags.
    void rebuild_regions();
};

/// Where each lane's words live in the program's batch buffers. Only lowered
/// models carry this; it feeds the monitor's parallel-to-serial converters.
struct BatchPorts {
    std::string mem_in;
    std::string mem_out;
    std::vector<std::vector<CellId>> in_lanes;
    std::vector<std::vector<CellId>> out_lanes;
};

struct AcceleratorModel {
    std::string name;
    std::string control_tag;
    std::size_t batch_size = 1;
    unsigned action_count = 1;
    unsigned data_width = 8;
    unsigned output_width = 8;
    std::size_t in_words = 1;
    std::size_t out_words = 1;
    MemoryLayout layout;
    Program program;
    /// Allowed initial memories: cells with a value are fixed, the rest range
    /// over their whole domain.
    std::vector<std::optional<Word>> initial_values;
    std::optional<BatchPorts> ports;
    std::vector<std::string> diagnostics;

    ControlId initial_control() const { return 0; }
    ControlId final_control() const { return static_cast<ControlId>(program.code.size()); }
    bool has_actions() const { return action_count > 1; }

    /// Throws Internal on a violated structural invariant.
    void validate() const;
};

struct MachineState {
    ControlId control = 0;
    std::vector<Word> memory;

    friend bool operator==(const MachineState&, const MachineState&) = default;
    friend auto operator<=>(const MachineState&, const MachineState&) = default;
};

struct Lane {
    Word action = 0;
    std::vector<Word> data;

    friend bool operator==(const Lane&, const Lane&) = default;
    friend auto operator<=>(const Lane&, const Lane&) = default;
};

struct InputBatch {
    std::vector<Lane> lanes;

    friend bool operator==(const InputBatch&, const InputBatch&) = default;
};

using OutputLane = std::vector<Word>;
using OutputBatch = std::vector<OutputLane>;

struct ExecutionTrace {
    std::vector<MachineState> states;
    std::vector<std::size_t> initial_marks;
    std::vector<std::size_t> final_marks;
    std::vector<OutputBatch> outputs;  // one per batch
    std::size_t steps = 0;

    const MachineState& final_state() const { return states.at(final_marks.back()); }
};

struct RunOptions {
    std::size_t step_budget = kDefaultStepBudget;
    bool record_states = true;
    /// Debug mode: fail on a write to the input region or a read of an
    /// output cell that has not been written in this run.
    bool check_regions = false;
};

// Region projections.
std::vector<Word> project(const MemoryLayout& layout, Region region, std::span<const Word> memory);
std::vector<Word> inp(const AcceleratorModel& m, std::span<const Word> memory);
std::vector<Word> out(const AcceleratorModel& m, std::span<const Word> memory);
std::vector<Word> rel(const AcceleratorModel& m, std::span<const Word> memory);
std::vector<Word> nrel(const AcceleratorModel& m, std::span<const Word> memory);
/// Inverse of the four projections.
std::vector<Word> reassemble(const MemoryLayout& layout, std::span<const Word> in, std::span<const Word> out,
                             std::span<const Word> rel, std::span<const Word> nrel);

InputBatch zero_batch(const AcceleratorModel& m);
void place_batch(const AcceleratorModel& m, const InputBatch& batch, std::vector<Word>& memory);
InputBatch read_batch(const AcceleratorModel& m, std::span<const Word> memory);
OutputBatch read_outputs(const AcceleratorModel& m, std::span<const Word> memory);

/// A machine state at s_cI with every free cell zero and fixed cells at
/// their allowed initial value.
MachineState default_initial_state(const AcceleratorModel& m);

/// One transition. The control state must not be final.
MachineState step(const AcceleratorModel& m, const MachineState& s);

/// Runs from pc 0 in place; returns the number of steps to the final control
/// state, or nullopt when `budget` steps elapse first.
std::optional<std::size_t> execute_bounded(const AcceleratorModel& m, std::vector<Word>& memory,
                                           std::size_t budget);

ExecutionTrace run_batch(const AcceleratorModel& m, const MachineState& init, const InputBatch& batch,
                         const RunOptions& opts = {});
ExecutionTrace run_sequence(const AcceleratorModel& m, const MachineState& init,
                            std::span<const InputBatch> batches, const RunOptions& opts = {});

/// Every state appearing in some execution of at most `depth` batches from an
/// allowed initial state, plus the allowed initial states themselves.
std::set<MachineState> enumerate_reachable(const AcceleratorModel& m, std::size_t depth,
                                           std::size_t cap = std::size_t{1} << 20);

/// Reachable relevant-region valuations. Explores only cells that can
/// influence a later batch (live-in cells and relevant cells), so it scales to
/// models whose full state space is not enumerable.
std::set<std::vector<Word>> reachable_relevant(const AcceleratorModel& m, std::size_t depth,
                                               std::size_t cap = std::size_t{1} << 20);

/// Cells whose initial value can be observed: read before any definite write
/// on some path through the program.
std::vector<CellId> live_in_cells(const AcceleratorModel& m);

} // namespace aqed
