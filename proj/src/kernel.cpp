#include "aqed/kernel.hpp"

namespace aqed {

LoadedKernel load_kernel(const std::string& text, const ParseOptions& opts) {
    LoadedKernel k;
    k.prog = parse(text, opts);
    k.plan = plan(k.prog);
    if (k.plan.stages.size() == 1)
        k.model = k.plan.stages[0];
    else
        k.model = std::make_shared<AcceleratorModel>(compose(k.plan));
    if (k.plan.spec) k.spec = SpecOracle{"SPEC", k.plan.spec, nullptr};
    return k;
}

} // namespace aqed
