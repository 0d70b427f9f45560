#pragma once

// Sliding-window responsiveness checking over SSA code. Each window of SSA
// lines is carved out as a stand-alone sub-accelerator and checked for RB.

#include "aqed/engine.hpp"
#include "aqed/ssa.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace aqed {

enum class WindowPhase { Enlarging, Shrinking };
std::string_view phase_name(WindowPhase p);

struct WindowRecord {
    std::size_t top = 1;  // 1-based SSA lines, inclusive
    std::size_t bottom = 1;
    std::size_t covered_top = 1;  // after loop closure
    std::size_t covered_bottom = 1;
    WindowPhase phase = WindowPhase::Enlarging;
    std::optional<Verdict> verdict;  // empty when the window had no interface
    std::string unknown_cause;
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    double seconds = 0;
};

struct WindowState {
    std::size_t top_line = 1;
    std::size_t bottom_line = 1;
    WindowPhase phase = WindowPhase::Enlarging;
    std::size_t delta = 8;
    std::vector<WindowRecord> history;
};

struct SubModel {
    std::shared_ptr<AcceleratorModel> model;
    std::size_t top = 1, bottom = 1;  // lines actually covered
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
};

/// Smallest line range containing [top, bottom] that does not cut a loop.
std::pair<std::size_t, std::size_t> close_window(const SsaProgram& ssa, std::size_t top, std::size_t bottom);

/// Throws EmptyInterface when nothing defined in the window escapes it.
SubModel window_to_submodel(const SsaProgram& ssa, const WindowState& w);

struct DrbOptions {
    std::size_t bound = 0;  // RB bound n, in steps
    std::size_t window = 16;
    std::size_t delta = 8;
    Budget budget;
};

struct DrbCampaign {
    std::size_t lines = 0;
    std::size_t bound = 0;
    WindowState state;
    bool failed = false;
    bool reached_end = false;
    /// Failing window: sub-model, obligation and witness.
    std::optional<SubModel> failing;
    std::optional<CheckObligation> failing_obligation;
    std::optional<CheckResult> failing_result;
    double seconds = 0;

    /// Lines covered by at least one window that returned a verdict.
    std::vector<bool> coverage() const;
};

DrbCampaign slide(const SsaProgram& ssa, const DrbOptions& opts);

/// Checks the movement invariants of a history; returns the first violation.
std::optional<std::string> history_violation(const WindowState& w, std::size_t lines);

} // namespace aqed
