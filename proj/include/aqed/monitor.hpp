#pragma once

// Concrete replay of the duplicate-lane FC monitor: inputs and outputs are
// serialized element by element, one original and one duplicate element are
// labeled, and the duplicate's output is compared with the original's.

#include "aqed/obligation.hpp"

#include <span>
#include <string>
#include <vector>

namespace aqed {

class FcMonitor {
public:
    FcMonitor(std::size_t in_size, std::size_t out_size);

    void aqed_in(std::span<const Word> in, bool orig, bool dup);
    /// Returns {dup_done, fc_check}.
    std::pair<bool, bool> aqed_out(std::span<const Word> out);

    bool dup_done() const { return dup_done_; }
    bool fc_check() const { return fc_check_; }
    std::size_t orig_idx() const { return orig_idx_; }
    std::size_t dup_idx() const { return dup_idx_; }
    bool orig_labeled() const { return orig_labeled_; }
    bool dup_labeled() const { return dup_labeled_; }

private:
    std::size_t in_size_, out_size_;
    std::vector<Word> orig_val_, orig_out_;
    bool orig_labeled_ = false, dup_labeled_ = false;
    std::size_t in_ct_ = 0, out_ct_ = 0, orig_idx_ = 0, dup_idx_ = 0;
    bool dup_done_ = false, fc_check_ = false;
};

struct MonitorVerdict {
    bool dup_done = false;
    bool fc_check = false;
    std::vector<std::string> log;
};

/// Serialized input elements of a run: action word (when the model has
/// actions) followed by the data words, per lane.
std::vector<std::vector<Word>> serialize_inputs(const AcceleratorModel& m, const InputBatch& batch);
/// Serialized output elements read through the output alloc rule.
std::vector<std::vector<Word>> serialize_outputs(const AcceleratorModel& m, const ExecutionTrace& run);

/// Replays an FC-family trace through the monitor. With `expect_violation`
/// a verdict without fc_check throws ReplayMismatch.
MonitorVerdict replay_monitor(const CounterexampleTrace& trace, const CheckObligation& obl,
                              bool expect_violation = true);

} // namespace aqed
