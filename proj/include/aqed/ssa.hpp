#pragma once

// Straight-line single-assignment form of an ABK program with constant
// loops fully unrolled. Values are numbered in definition order; memory is
// touched only through explicit load/store instructions on storage cells.

#include "aqed/abk.hpp"
#include "aqed/model.hpp"

#include <string>
#include <vector>

namespace aqed {

struct SsaValueInfo {
    std::string name;
    unsigned width = 1;
    std::size_t def = 0;  // defining instruction
};

struct SsaProgram {
    std::vector<CellInfo> cells;
    std::vector<SsaValueInfo> values;
    /// dst/a/b/c index `values`; `base` indexes `cells`.
    std::vector<Instr> code;
    std::vector<CellId> input_cells;   // read before any write
    std::vector<CellId> output_cells;  // written
    std::vector<std::string> diagnostics;

    /// One instruction per line: `N: name = op args ; Lline`.
    std::string dump() const;
    bool has_loops() const;
};

/// Unrolls and converts the whole program body (the spec block excluded).
/// Throws UnrollCap when the instruction count exceeds prog.unroll_cap.
SsaProgram unroll_and_ssa(const AbkProgram& prog);

/// Unrolls one block's statements only.
SsaProgram unroll_block(const AbkProgram& prog, int block);

/// Executes the SSA program on storage in place; returns the final value
/// vector. Throws StepBudgetExceeded when the budget runs out.
std::vector<Word> interpret_ssa(const SsaProgram& ssa, std::vector<Word>& storage,
                                std::size_t step_budget = kDefaultStepBudget);

/// Converts SSA to a model program where value v lives in cell `value_base + v`.
Program to_model_program(const SsaProgram& ssa, CellId value_base);

} // namespace aqed
