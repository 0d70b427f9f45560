#include "aqed/monitor.hpp"

#include "aqed/error.hpp"

namespace aqed {

FcMonitor::FcMonitor(std::size_t in_size, std::size_t out_size)
    : in_size_(in_size), out_size_(out_size), orig_val_(in_size, 0), orig_out_(out_size, 0) {}

void FcMonitor::aqed_in(std::span<const Word> in, bool orig, bool dup) {
    const bool label_orig = orig && !orig_labeled_;
    bool match = true;
    for (std::size_t i = 0; i < in_size_; ++i)
        if (in[i] != orig_val_[i]) {
            match = false;
            break;
        }
    const bool label_dup = dup && !dup_labeled_ && orig_labeled_ && match;
    if (label_orig) {
        orig_labeled_ = true;
        orig_idx_ = in_ct_;
        for (std::size_t i = 0; i < in_size_; ++i) orig_val_[i] = in[i];
    }
    if (label_dup) {
        dup_labeled_ = true;
        dup_idx_ = in_ct_;
    }
    ++in_ct_;
}

std::pair<bool, bool> FcMonitor::aqed_out(std::span<const Word> out) {
    if (orig_labeled_ && out_ct_ == orig_idx_ && !dup_done_)
        for (std::size_t i = 0; i < out_size_; ++i) orig_out_[i] = out[i];
    if (orig_labeled_ && dup_labeled_ && out_ct_ == dup_idx_ && !dup_done_) {
        dup_done_ = true;
        fc_check_ = false;
        for (std::size_t i = 0; i < out_size_; ++i)
            if (orig_out_[i] != out[i]) {
                fc_check_ = true;
                break;
            }
    }
    if (out_ct_ > dup_idx_) dup_done_ = true;
    ++out_ct_;
    return {dup_done_, fc_check_};
}

std::vector<std::vector<Word>> serialize_inputs(const AcceleratorModel& m, const InputBatch& batch) {
    std::vector<std::vector<Word>> seq;
    for (const auto& lane : batch.lanes) {
        std::vector<Word> e;
        if (m.has_actions()) e.push_back(lane.action);
        e.insert(e.end(), lane.data.begin(), lane.data.end());
        seq.push_back(std::move(e));
    }
    return seq;
}

std::vector<std::vector<Word>> serialize_outputs(const AcceleratorModel& m, const ExecutionTrace& run) {
    if (!m.ports) return run.outputs.back();
    const auto& mem = run.final_state().memory;
    std::vector<std::vector<Word>> seq;
    for (const auto& lane : m.ports->out_lanes) {
        std::vector<Word> e;
        for (CellId c : lane) e.push_back(mem[c]);
        seq.push_back(std::move(e));
    }
    return seq;
}

MonitorVerdict replay_monitor(const CounterexampleTrace& trace, const CheckObligation& obl, bool expect_violation) {
    if (obl.mode == CheckMode::SAC || obl.mode == CheckMode::RB)
        throw Error(ErrorKind::NotApplicable, "the FC monitor replays FC-family traces only");
    const AcceleratorModel& m = *obl.model;
    CounterexampleTrace t = trace;
    if (t.runs.empty()) {
        // re-execute the recorded batches
        for (std::size_t c = 0; c < t.initial_states.size(); ++c) {
            MachineState s = t.initial_states[c];
            for (const auto& b : t.batches[c]) {
                t.runs.push_back(run_batch(m, s, b, RunOptions{kDefaultStepBudget, false, false}));
                s = MachineState{m.initial_control(), t.runs.back().final_state().memory};
            }
        }
    }

    // serialize every run end to end in copy-major, batch order
    std::vector<std::vector<Word>> in_seq, out_seq;
    std::size_t run = 0;
    for (std::size_t c = 0; c < t.batches.size(); ++c)
        for (const auto& b : t.batches[c]) {
            auto in = serialize_inputs(m, b);
            auto out = serialize_outputs(m, t.runs.at(run++));
            in_seq.insert(in_seq.end(), in.begin(), in.end());
            out_seq.insert(out_seq.end(), out.begin(), out.end());
        }

    const std::size_t b = m.batch_size;
    std::size_t orig = t.lane, dup = t.lane_prime;
    switch (obl.mode) {
    case CheckMode::FC:
        orig = t.batch_index * b + t.lane;
        dup = (obl.bound - 1) * b + t.lane_prime;
        break;
    case CheckMode::StrongFC:
    case CheckMode::StrongFCD: dup = b + t.lane_prime; break;
    default: break;
    }
    if (orig > dup) std::swap(orig, dup);

    MonitorVerdict v;
    FcMonitor mon(in_seq.empty() ? 0 : in_seq[0].size(), out_seq.empty() ? 0 : out_seq[0].size());
    for (std::size_t x = 0; x < in_seq.size(); ++x) mon.aqed_in(in_seq[x], x == orig, x == dup);
    v.log.push_back("orig element " + std::to_string(orig) + (mon.orig_labeled() ? " labeled" : " not labeled") +
                    ", dup element " + std::to_string(dup) + (mon.dup_labeled() ? " labeled" : " not labeled"));
    for (const auto& o : out_seq) {
        auto [done, check] = mon.aqed_out(o);
        v.dup_done = done;
        v.fc_check = check;
    }
    v.log.push_back("dup_done=" + std::to_string(v.dup_done) + " fc_check=" + std::to_string(v.fc_check));
    if (obl.mode == CheckMode::StrongFCD && t.runs.size() == 2) {
        const bool rel_differs =
            rel(m, t.runs[0].final_state().memory) != rel(m, t.runs[1].final_state().memory);
        if (rel_differs) {
            v.fc_check = true;
            v.log.push_back("final relevant states differ");
        }
    }
    if (expect_violation && !v.fc_check)
        throw Error(ErrorKind::ReplayMismatch, "monitor does not reproduce the violation on " + m.name);
    return v;
}

} // namespace aqed
