#include "aqed/decompose.hpp"

#include "aqed/error.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace aqed {

namespace {

std::set<CellId> to_set(const std::vector<CellId>& v) { return {v.begin(), v.end()}; }

std::set<CellId> lane_cells(const std::vector<std::vector<CellId>>& lanes) {
    std::set<CellId> s;
    for (const auto& l : lanes) s.insert(l.begin(), l.end());
    return s;
}

bool disjoint(const std::set<CellId>& a, const std::set<CellId>& b) {
    for (CellId c : a)
        if (b.count(c)) return false;
    return true;
}

bool can_join_group(const AbkProgram& prog, const std::vector<int>& group, int block) {
    const BatchAnnotation& nb = *prog.blocks[block].annotation;
    for (int g : group) {
        const BatchAnnotation& ga = *prog.blocks[g].annotation;
        if (ga.batch_mem_in != nb.batch_mem_in || ga.batch_mem_out != nb.batch_mem_out) return false;
        if (ga.in_size != nb.in_size || ga.out_size != nb.out_size || ga.action_count != nb.action_count)
            return false;
        if (!disjoint(lane_cells(ga.in_lanes), lane_cells(nb.in_lanes))) return false;
        if (!disjoint(lane_cells(ga.out_lanes), lane_cells(nb.out_lanes))) return false;
    }
    return true;
}

void check_wiring(const AbkProgram& prog, const std::vector<int>& producer, const std::vector<int>& consumer) {
    const BatchAnnotation& p = *prog.blocks[producer.front()].annotation;
    const BatchAnnotation& c = *prog.blocks[consumer.front()].annotation;
    const std::string pn = prog.blocks[producer.front()].name;
    const std::string cn = prog.blocks[consumer.front()].name;
    if (p.batch_mem_out != c.batch_mem_in)
        throw Error(ErrorKind::Wiring, cn + " reads buffer '" + c.batch_mem_in + "' but " + pn + " writes '" +
                                           p.batch_mem_out + "'");
    if (p.out_size != c.in_size)
        throw Error(ErrorKind::Wiring, cn + " expects " + std::to_string(c.in_size) + " words per element but " +
                                           pn + " produces " + std::to_string(p.out_size));
    std::size_t out_b = 0, in_b = 0;
    std::vector<std::vector<CellId>> out_lanes, in_lanes;
    for (int b : producer) {
        const auto& a = *prog.blocks[b].annotation;
        out_b += a.out_batch_size;
        out_lanes.insert(out_lanes.end(), a.out_lanes.begin(), a.out_lanes.end());
    }
    for (int b : consumer) {
        const auto& a = *prog.blocks[b].annotation;
        in_b += a.in_batch_size;
        in_lanes.insert(in_lanes.end(), a.in_lanes.begin(), a.in_lanes.end());
    }
    if (out_b != in_b)
        throw Error(ErrorKind::Wiring, cn + " has batch size " + std::to_string(in_b) + " but " + pn +
                                           " produces " + std::to_string(out_b) + " elements");
    for (std::size_t x = 0; x < in_lanes.size(); ++x)
        if (in_lanes[x] != out_lanes[x])
            throw Error(ErrorKind::Wiring, cn + " lane " + std::to_string(x) + " reads different cells of '" +
                                               c.batch_mem_in + "' than " + pn + " writes");
}

std::string join_names(const std::vector<ModelPtr>& ms, const char* sep) {
    std::string s;
    for (const auto& m : ms) s += (s.empty() ? "" : sep) + m->name;
    return s;
}

} // namespace

AlphaMap make_alpha(const AcceleratorModel& producer, const AcceleratorModel& consumer) {
    const auto& out1 = producer.layout.output;
    const auto& in2 = consumer.layout.input;
    if (out1.size() != in2.size())
        throw ComposabilityError(2, producer.name + " has " + std::to_string(out1.size()) + " output cells, " +
                                        consumer.name + " has " + std::to_string(in2.size()) + " input cells");
    AlphaMap map;
    map.perm.resize(producer.layout.size());
    std::iota(map.perm.begin(), map.perm.end(), CellId{0});
    std::set<CellId> touched;
    for (std::size_t i = 0; i < out1.size(); ++i) {
        if (out1[i] == in2[i]) continue;
        if (!touched.insert(out1[i]).second || !touched.insert(in2[i]).second)
            throw ComposabilityError(5, "output and input regions of " + producer.name + " and " + consumer.name +
                                            " overlap");
        map.swaps.emplace_back(out1[i], in2[i]);
        std::swap(map.perm[out1[i]], map.perm[in2[i]]);
    }
    return map;
}

std::vector<Word> alpha(const AlphaMap& map, std::span<const Word> producer_memory) {
    std::vector<Word> m(producer_memory.size());
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = producer_memory[map.perm[c]];
    return m;
}

std::optional<std::string> check_condition(int condition, const AcceleratorModel& p, const AcceleratorModel& c,
                                           const AlphaMap& map) {
    switch (condition) {
    case 1:
        if (p.batch_size != c.batch_size)
            return "batch sizes differ: " + std::to_string(p.batch_size) + " vs " + std::to_string(c.batch_size);
        return std::nullopt;
    case 2: {
        if (c.has_actions()) return c.name + " takes actions, which " + p.name + " cannot produce";
        if (p.layout.out_cells_per_lane != c.layout.in_cells_per_lane)
            return "output element of " + std::to_string(p.layout.out_cells_per_lane) +
                   " words does not match input element of " + std::to_string(c.layout.in_cells_per_lane);
        if (p.layout.output.size() != c.layout.input.size()) return "output and input region sizes differ";
        for (std::size_t i = 0; i < p.layout.output.size(); ++i)
            if (p.layout.cells[p.layout.output[i]].width != c.layout.cells[c.layout.input[i]].width)
                return "word " + std::to_string(i) + " has width " +
                       std::to_string(p.layout.cells[p.layout.output[i]].width) + " on output but " +
                       std::to_string(c.layout.cells[c.layout.input[i]].width) + " on input";
        return std::nullopt;
    }
    case 3:
        if (p.control_tag == c.control_tag) return "both models use control tag '" + p.control_tag + "'";
        return std::nullopt;
    case 4:
        if (p.layout.relevant != c.layout.relevant) return "relevant regions differ";
        return std::nullopt;
    case 5: {
        if (p.layout.size() != c.layout.size() || map.perm.size() != p.layout.size())
            return "memory sizes differ";
        std::set<CellId> nrel1 = to_set(p.layout.nonrelevant), nrel2 = to_set(c.layout.nonrelevant);
        std::set<CellId> lhs;
        std::vector<CellId> inv(map.perm.size());
        for (std::size_t d = 0; d < map.perm.size(); ++d) inv[map.perm[d]] = static_cast<CellId>(d);
        const std::set<CellId> out2 = to_set(c.layout.output), in1 = to_set(p.layout.input);
        for (CellId x : nrel1)
            if (!out2.count(x)) lhs.insert(inv[x]);
        std::set<CellId> rhs;
        for (CellId x : nrel2)
            if (!in1.count(x)) rhs.insert(x);
        if (lhs != rhs) return "non-relevant regions do not factor through the memory mapping";
        return std::nullopt;
    }
    default: throw Error(ErrorKind::Internal, "no composability condition " + std::to_string(condition));
    }
}

void check_composable(const AcceleratorModel& producer, const AcceleratorModel& consumer, const AlphaMap& map) {
    for (int k = 1; k <= 5; ++k)
        if (auto why = check_condition(k, producer, consumer, map))
            throw ComposabilityError(k, producer.name + " -> " + consumer.name + ": " + *why);
}

std::size_t DecompositionPlan::parallel() const {
    return static_cast<std::size_t>(
        std::count_if(sub_models.begin(), sub_models.end(), [](const ModelPtr& m) { return m->batch_size > 1; }));
}

void append_program(Program& dst, const Program& src) {
    const auto pc_off = static_cast<Word>(dst.code.size());
    const auto perm_off = static_cast<Word>(dst.permutations.size());
    for (Instr in : src.code) {
        switch (in.op) {
        case Opcode::LoopHead: in.imm += pc_off; break;
        case Opcode::LoopBack:
            in.imm += pc_off;
            in.b += static_cast<std::uint32_t>(pc_off);
            break;
        case Opcode::Permute: in.imm += perm_off; break;
        default: break;
        }
        dst.code.push_back(in);
    }
    dst.permutations.insert(dst.permutations.end(), src.permutations.begin(), src.permutations.end());
}

AcceleratorModel fuse_parallel(const std::vector<ModelPtr>& members) {
    if (members.empty()) throw Error(ErrorKind::Internal, "empty parallel group");
    if (members.size() == 1) return *members.front();
    const AcceleratorModel& first = *members.front();
    AcceleratorModel m;
    m.name = join_names(members, "|");
    m.control_tag = m.name;
    m.batch_size = 0;
    m.action_count = first.action_count;
    m.data_width = first.data_width;
    m.output_width = first.output_width;
    m.in_words = first.in_words;
    m.out_words = first.out_words;
    m.layout = first.layout;
    m.initial_values = first.initial_values;
    m.layout.input.clear();
    m.layout.output.clear();
    BatchPorts ports;
    for (const auto& sub : members) {
        m.batch_size += sub->batch_size;
        append_program(m.program, sub->program);
        m.layout.input.insert(m.layout.input.end(), sub->layout.input.begin(), sub->layout.input.end());
        m.layout.output.insert(m.layout.output.end(), sub->layout.output.begin(), sub->layout.output.end());
        m.diagnostics.insert(m.diagnostics.end(), sub->diagnostics.begin(), sub->diagnostics.end());
        if (sub->ports) {
            ports.mem_in = sub->ports->mem_in;
            ports.mem_out = sub->ports->mem_out;
            ports.in_lanes.insert(ports.in_lanes.end(), sub->ports->in_lanes.begin(), sub->ports->in_lanes.end());
            ports.out_lanes.insert(ports.out_lanes.end(), sub->ports->out_lanes.begin(), sub->ports->out_lanes.end());
        }
    }
    if (first.ports) m.ports = std::move(ports);
    const std::set<CellId> in = to_set(m.layout.input), out = to_set(m.layout.output);
    for (CellId c = 0; c < m.layout.size(); ++c) {
        auto& info = m.layout.cells[c];
        if (info.region == Region::Relevant) continue;
        info.region = in.count(c) ? Region::Input : out.count(c) ? Region::Output : Region::NonRelevant;
    }
    std::vector<CellId> input = m.layout.input, output = m.layout.output;
    m.layout.rebuild_regions();
    m.layout.input = std::move(input);
    m.layout.output = std::move(output);
    m.validate();
    return m;
}

AcceleratorModel compose(const std::vector<ModelPtr>& stages_in) {
    if (stages_in.empty()) throw Error(ErrorKind::Internal, "nothing to compose");
    std::vector<ModelPtr> stages;
    std::map<std::string, int> seen;
    for (const auto& s : stages_in) {
        int& k = seen[s->control_tag];
        if (k++ == 0) {
            stages.push_back(s);
            continue;
        }
        auto renamed = std::make_shared<AcceleratorModel>(*s);
        renamed->control_tag = s->control_tag + "#" + std::to_string(k);
        renamed->name = s->name + "#" + std::to_string(k);
        stages.push_back(renamed);
    }
    if (stages.size() == 1) return *stages.front();

    const AcceleratorModel& first = *stages.front();
    const AcceleratorModel& last = *stages.back();
    AcceleratorModel m;
    m.name = "compose(" + join_names(stages, ",") + ")";
    m.control_tag = m.name;
    m.batch_size = first.batch_size;
    m.action_count = first.action_count;
    m.data_width = first.data_width;
    m.in_words = first.in_words;
    m.output_width = last.output_width;
    m.out_words = last.out_words;
    m.initial_values = first.initial_values;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        if (k > 0) {
            AlphaMap map = make_alpha(*stages[k - 1], *stages[k]);
            check_composable(*stages[k - 1], *stages[k], map);
            Instr perm;
            perm.op = Opcode::Permute;
            perm.imm = m.program.permutations.size();
            m.program.permutations.push_back(map.swaps);
            m.program.code.push_back(perm);
        }
        append_program(m.program, stages[k]->program);
        m.diagnostics.insert(m.diagnostics.end(), stages[k]->diagnostics.begin(), stages[k]->diagnostics.end());
    }
    m.layout = first.layout;
    const std::set<CellId> in = to_set(first.layout.input), out = to_set(last.layout.output);
    for (CellId c = 0; c < m.layout.size(); ++c) {
        auto& info = m.layout.cells[c];
        if (info.region == Region::Relevant) continue;
        info.region = in.count(c) ? Region::Input : out.count(c) ? Region::Output : Region::NonRelevant;
    }
    m.layout.rebuild_regions();
    m.layout.input = first.layout.input;
    m.layout.output = last.layout.output;
    m.layout.in_cells_per_lane = first.layout.in_cells_per_lane;
    m.layout.out_cells_per_lane = last.layout.out_cells_per_lane;
    if (first.ports && last.ports) {
        BatchPorts p;
        p.mem_in = first.ports->mem_in;
        p.in_lanes = first.ports->in_lanes;
        p.mem_out = last.ports->mem_out;
        p.out_lanes = last.ports->out_lanes;
        m.ports = std::move(p);
    }
    m.validate();
    return m;
}

AcceleratorModel compose(const DecompositionPlan& plan) { return compose(plan.stages); }

DecompositionPlan plan(const AbkProgram& prog) {
    const std::vector<int> leaves = prog.leaf_blocks();
    if (leaves.empty()) throw Error(ErrorKind::Annotation, "program has no annotated block");

    DecompositionPlan p;
    p.layout = make_layout(prog);
    for (int b : leaves) p.blocks.push_back(lower_block(prog, b, p.layout));
    std::optional<LoweredBlock> spec;
    if (int s = prog.spec_block(); s >= 0 && prog.blocks[s].annotation) spec = lower_block(prog, s, p.layout);

    for (auto& lb : p.blocks) {
        bind_layout(*lb.model, p.layout, p.layout.ports.at(lb.block));
        p.sub_models.push_back(lb.model);
    }
    if (spec) {
        bind_layout(*spec->model, p.layout, p.layout.ports.at(spec->block));
        p.spec = spec->model;
    }

    std::vector<std::vector<int>> groups;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (!p.parallel_groups.empty() && can_join_group(prog, groups.back(), leaves[i])) {
            groups.back().push_back(leaves[i]);
            p.parallel_groups.back().push_back(i);
            continue;
        }
        groups.push_back({leaves[i]});
        p.parallel_groups.push_back({i});
    }
    for (std::size_t g = 0; g < p.parallel_groups.size(); ++g) {
        std::vector<ModelPtr> members;
        for (std::size_t i : p.parallel_groups[g]) members.push_back(p.sub_models[i]);
        p.stages.push_back(members.size() == 1 ? members.front()
                                               : std::make_shared<AcceleratorModel>(fuse_parallel(members)));
        if (g > 0) {
            check_wiring(prog, groups[g - 1], groups[g]);
            p.wiring.push_back(Wiring{g - 1, g, prog.blocks[groups[g].front()].annotation->batch_mem_in});
            p.alpha_maps.push_back(make_alpha(*p.stages[g - 1], *p.stages[g]));
        }
    }
    return p;
}

std::string plan_report(const DecompositionPlan& plan) {
    std::ostringstream os;
    os << "plan: T=" << plan.total() << " P=" << plan.parallel() << " stages=" << plan.stages.size() << "\n";
    os << "  #  name        b      in   out  rel  instrs  group\n";
    for (std::size_t i = 0; i < plan.sub_models.size(); ++i) {
        const auto& m = *plan.sub_models[i];
        std::size_t group = 0;
        for (std::size_t g = 0; g < plan.parallel_groups.size(); ++g)
            for (std::size_t k : plan.parallel_groups[g])
                if (k == i) group = g;
        char line[160];
        std::snprintf(line, sizeof line, "  %-2zu %-10s %6zu %5zu %5zu %4zu %7zu  %zu\n", i + 1, m.name.c_str(),
                      m.batch_size, m.in_words, m.out_words, m.layout.relevant.size(), m.program.code.size(), group);
        os << line;
    }
    for (const auto& w : plan.wiring)
        os << "  wire: " << plan.stages[w.producer]->name << " -> " << plan.stages[w.consumer]->name << " via "
           << w.buffer << " (" << plan.alpha_maps[w.producer].swaps.size() << " cells)\n";
    if (plan.spec) os << "  spec: " << plan.spec->name << "\n";
    return os.str();
}

} // namespace aqed
