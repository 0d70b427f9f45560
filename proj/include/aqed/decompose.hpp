#pragma once

// Sub-accelerator planning, composability checks and functional composition.

#include "aqed/abk.hpp"
#include "aqed/lower.hpp"
#include "aqed/model.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aqed {

using ModelPtr = std::shared_ptr<const AcceleratorModel>;

/// Memory mapping between a producer and its consumer. Realized as a set of
/// cell swaps: producer output cell i trades places with consumer input
/// cell i. `perm[c]` is the producer cell whose value lands in consumer
/// cell c.
struct AlphaMap {
    std::vector<std::pair<CellId, CellId>> swaps;
    std::vector<CellId> perm;
};

AlphaMap make_alpha(const AcceleratorModel& producer, const AcceleratorModel& consumer);
std::vector<Word> alpha(const AlphaMap& map, std::span<const Word> producer_memory);

/// Checks one composability condition (1..5); returns the reason on failure.
std::optional<std::string> check_condition(int condition, const AcceleratorModel& producer,
                                           const AcceleratorModel& consumer, const AlphaMap& map);
/// Throws ComposabilityError naming the first failing condition.
void check_composable(const AcceleratorModel& producer, const AcceleratorModel& consumer, const AlphaMap& map);

struct Wiring {
    std::size_t producer = 0;  // stage indices
    std::size_t consumer = 0;
    std::string buffer;
};

struct DecompositionPlan {
    GlobalLayout layout;
    std::vector<LoweredBlock> blocks;           // one per annotated block, source order
    std::vector<ModelPtr> sub_models;           // parallel to `blocks`
    std::vector<std::vector<std::size_t>> parallel_groups;  // indices into sub_models
    std::vector<ModelPtr> stages;               // groups fused into one model each
    std::vector<Wiring> wiring;                 // stage k -> stage k+1
    std::vector<AlphaMap> alpha_maps;           // stage k -> stage k+1
    ModelPtr spec;                              // lowered spec block, if present

    std::size_t total() const { return sub_models.size(); }
    /// Sub-accelerators with batch size above one.
    std::size_t parallel() const;
};

DecompositionPlan plan(const AbkProgram& prog);

/// Runs the stages in order, applying the memory mapping at each handoff.
/// Stages sharing a control tag are renamed apart first.
AcceleratorModel compose(const std::vector<ModelPtr>& stages);
AcceleratorModel compose(const DecompositionPlan& plan);

/// Lanes placed side by side: batch size is the sum, programs run in order.
AcceleratorModel fuse_parallel(const std::vector<ModelPtr>& members);

/// Appends `src` to `dst`, relocating jump targets and permutation indices.
void append_program(Program& dst, const Program& src);

std::string plan_report(const DecompositionPlan& plan);

} // namespace aqed
