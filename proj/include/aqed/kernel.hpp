#pragma once

// One-call loading of an ABK kernel: parse, plan, compose, and the SPEC
// block as a specification oracle when the program has one.

#include "aqed/decompose.hpp"
#include "aqed/obligation.hpp"

namespace aqed {

struct LoadedKernel {
    AbkProgram prog;
    DecompositionPlan plan;
    ModelPtr model;  // the composed accelerator
    std::optional<SpecOracle> spec;
};

LoadedKernel load_kernel(const std::string& text, const ParseOptions& opts = {});

} // namespace aqed
