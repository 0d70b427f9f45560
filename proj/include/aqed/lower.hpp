#pragma once

// Lowering of annotated ABK blocks to executable accelerator models. All
// blocks of one program share a global cell layout: storage cells first,
// then per-block input/output port cells, then one temporary cell per SSA
// value of every lowered block.

#include "aqed/abk.hpp"
#include "aqed/model.hpp"
#include "aqed/ssa.hpp"

#include <map>
#include <memory>

namespace aqed {

struct PortSet {
    /// in[x] lists the port cells of lane x: the action cell (when the block
    /// has more than one action) followed by the data words.
    std::vector<std::vector<CellId>> in;
    std::vector<std::vector<CellId>> out;
};

struct GlobalLayout {
    std::vector<CellInfo> cells;
    std::size_t storage_cells = 0;
    std::vector<CellId> relevant;  // union of the blocks' %REL cells
    std::map<int, PortSet> ports;  // keyed by block index
    std::vector<std::optional<Word>> storage_init;
};

struct LoweredBlock {
    int block = -1;
    std::string name;
    SsaProgram ssa;
    CellId value_base = 0;
    std::shared_ptr<AcceleratorModel> model;
};

GlobalLayout make_layout(const AbkProgram& prog);

/// Lowers one annotated block into `layout`, appending its temporaries. The
/// returned model must be re-bound with bind_layout once all blocks sharing
/// the layout are lowered.
LoweredBlock lower_block(const AbkProgram& prog, int block, GlobalLayout& layout);

/// Sizes the model's memory to the layout and recomputes its regions: input
/// and output ports of `ports`, the layout's relevant cells, and everything
/// else non-relevant.
void bind_layout(AcceleratorModel& m, const GlobalLayout& layout, const PortSet& ports);

/// Standalone lowering of a single block.
AcceleratorModel lower(const AbkProgram& prog, int block);

} // namespace aqed
