#pragma once

// Check obligations over an accelerator model and the concrete machinery
// shared by every backend: policy-consistent initial states, violation
// search on concrete runs, and counterexample traces.

#include "aqed/model.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aqed {

enum class CheckMode { FC, StrongFC, IntraFC, StrongFCD, SAC, RB };
enum class InitPolicy { Concrete, Symbolic, Constrained };

std::string_view mode_name(CheckMode m);
std::string_view policy_name(InitPolicy p);
std::optional<CheckMode> parse_mode(std::string_view s);
std::optional<InitPolicy> parse_policy(std::string_view s);
/// Every mode except SAC and RB.
bool is_fc_family(CheckMode m);

/// Host-side specification: output words for one lane given the relevant
/// region, or nullopt where the function is undefined.
using HostSpec = std::function<std::optional<OutputLane>(const Lane&, const std::vector<Word>& rel)>;

struct SpecOracle {
    std::string name;
    /// Single-lane model sharing the checked model's cell layout; it starts
    /// with the checked model's relevant cells and fixed initializers.
    std::shared_ptr<const AcceleratorModel> model;
    HostSpec host;
};

struct CheckObligation {
    CheckMode mode = CheckMode::IntraFC;
    std::shared_ptr<const AcceleratorModel> model;
    InitPolicy policy = InitPolicy::Symbolic;
    std::size_t bound = 1;  // batches for FC, steps for RB
    std::size_t lane = 0;   // SAC lane
    /// Admissible relevant-region valuations; unrestricted when absent.
    std::optional<std::vector<std::vector<Word>>> allowed_relevant;
    std::optional<SpecOracle> spec;
    /// SAC only: require a correct result for some admissible initial state
    /// instead of for all of them.
    bool sac_existential = false;
    std::string label;

    std::size_t copies() const;
    std::size_t batches() const;
    /// Initial cells that range over their domain under the policy; every
    /// other cell starts at its fixed value (or 0).
    std::vector<CellId> free_cells() const;
    std::string serialize() const;
};

CheckObligation build_fc(std::shared_ptr<const AcceleratorModel> m, std::size_t n, InitPolicy policy);
CheckObligation build_strong_fc(std::shared_ptr<const AcceleratorModel> m, InitPolicy policy, bool fcd);
/// Throws NotApplicable for batch size 1.
CheckObligation build_intra_fc(std::shared_ptr<const AcceleratorModel> m, InitPolicy policy);
CheckObligation build_sac(std::shared_ptr<const AcceleratorModel> m, SpecOracle spec, std::size_t lane,
                          std::optional<std::vector<std::vector<Word>>> allowed_relevant, InitPolicy policy);
CheckObligation build_rb(std::shared_ptr<const AcceleratorModel> m, std::size_t n, InitPolicy policy);

struct CounterexampleTrace {
    CheckMode mode = CheckMode::IntraFC;
    std::vector<MachineState> initial_states;         // one per copy
    std::vector<std::vector<InputBatch>> batches;     // per copy
    std::size_t batch_index = 0;                      // i, 0-based
    std::size_t lane = 0;                             // j
    std::size_t lane_prime = 0;                       // j'
    std::optional<std::size_t> steps;                 // RB: steps executed before the cut
    std::vector<ExecutionTrace> runs;
    std::vector<std::string> monitor_log;
    std::string description;
};

/// Initial state with free cells zero and fixed cells at their value.
MachineState base_state(const CheckObligation& obl);
/// True when `s` is an allowed initial state of the obligation.
bool admissible(const CheckObligation& obl, const MachineState& s);

/// Spec output for one lane; throws SpecError where the oracle is partial.
OutputLane spec_output(const CheckObligation& obl, const Lane& lane, const std::vector<Word>& rel);

/// Runs the candidate's batches from its initial states and searches for a
/// violation. On success fills batch_index/lane/lane_prime/steps/runs and the
/// description of `t` and returns true. Lane roles may be re-chosen.
bool find_violation(const CheckObligation& obl, CounterexampleTrace& t);

/// Whether the candidate replays as a violation without re-choosing lanes.
bool confirms(const CheckObligation& obl, const CounterexampleTrace& t);

std::string describe(const CounterexampleTrace& t, const AcceleratorModel& m);

} // namespace aqed
