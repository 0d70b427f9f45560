#include "aqed/lower.hpp"

#include "aqed/error.hpp"
#include "ssa_builder.hpp"

#include <algorithm>
#include <set>

namespace aqed {

GlobalLayout make_layout(const AbkProgram& prog) {
    GlobalLayout layout;
    layout.cells = prog.cells;
    layout.storage_cells = prog.cells.size();
    layout.storage_init.assign(prog.cells.size(), std::nullopt);
    for (const auto& v : prog.vars)
        if (v.init)
            for (std::size_t i = 0; i < v.cell_count(); ++i) layout.storage_init[v.first_cell + i] = *v.init;

    std::set<CellId> rel;
    std::vector<int> blocks = prog.leaf_blocks();
    if (int s = prog.spec_block(); s >= 0 && prog.blocks[s].annotation) blocks.push_back(s);
    for (int b : blocks) {
        const BlockInfo& info = prog.blocks[b];
        const BatchAnnotation& ann = *info.annotation;
        if (!info.is_spec) rel.insert(ann.rel_cells.begin(), ann.rel_cells.end());
        const unsigned in_width = prog.find_var(ann.batch_mem_in)->width;
        const unsigned out_width = prog.find_var(ann.batch_mem_out)->width;
        PortSet ports;
        for (std::size_t x = 0; x < ann.in_batch_size; ++x) {
            std::vector<CellId> lane;
            const std::string base = info.name + ".in[" + std::to_string(x) + "]";
            if (ann.action_count > 1) {
                lane.push_back(static_cast<CellId>(layout.cells.size()));
                layout.cells.push_back(
                    CellInfo{base + ".a", constant_width(ann.action_count - 1), Region::NonRelevant, CellKind::Port});
            }
            for (std::size_t w = 0; w < ann.in_size; ++w) {
                lane.push_back(static_cast<CellId>(layout.cells.size()));
                layout.cells.push_back(
                    CellInfo{base + "[" + std::to_string(w) + "]", in_width, Region::NonRelevant, CellKind::Port});
            }
            ports.in.push_back(std::move(lane));
        }
        for (std::size_t x = 0; x < ann.out_batch_size; ++x) {
            std::vector<CellId> lane;
            const std::string base = info.name + ".out[" + std::to_string(x) + "]";
            for (std::size_t w = 0; w < ann.out_size; ++w) {
                lane.push_back(static_cast<CellId>(layout.cells.size()));
                layout.cells.push_back(
                    CellInfo{base + "[" + std::to_string(w) + "]", out_width, Region::NonRelevant, CellKind::Port});
            }
            ports.out.push_back(std::move(lane));
        }
        layout.ports[b] = std::move(ports);
    }
    layout.relevant.assign(rel.begin(), rel.end());
    return layout;
}

LoweredBlock lower_block(const AbkProgram& prog, int block, GlobalLayout& layout) {
    const BlockInfo& info = prog.blocks.at(block);
    if (!info.annotation) throw Error(ErrorKind::Annotation, "block " + info.name + " is not annotated");
    const BatchAnnotation& ann = *info.annotation;
    auto pit = layout.ports.find(block);
    if (pit == layout.ports.end()) throw Error(ErrorKind::Internal, "no ports allocated for block " + info.name);
    const PortSet& ports = pit->second;

    LoweredBlock lb;
    lb.block = block;
    lb.name = info.name;
    lb.ssa.cells = layout.cells;
    detail::SsaBuilder b(prog, lb.ssa);
    const int line = info.start_line;
    const bool actions = ann.action_count > 1;
    for (std::size_t x = 0; x < ann.in_batch_size; ++x) {
        std::size_t k = 0;
        if (actions) {
            CellId port = ports.in[x][k++];
            std::uint32_t v = b.load_port(port, line);
            b.write_cell(ann.action_cells[x], detail::Operand{false, 0, v, layout.cells[port].width}, line);
        }
        for (std::size_t w = 0; w < ann.in_size; ++w, ++k) {
            CellId port = ports.in[x][k];
            std::uint32_t v = b.load_port(port, line);
            b.write_cell(ann.in_lanes[x][w], detail::Operand{false, 0, v, layout.cells[port].width}, line);
        }
    }
    b.exec_block(block);
    for (std::size_t x = 0; x < ann.out_batch_size; ++x)
        for (std::size_t w = 0; w < ann.out_size; ++w)
            b.store_port(ports.out[x][w], b.read_cell(ann.out_lanes[x][w], info.end_line), info.end_line);
    b.finish(info.end_line);

    layout.cells = lb.ssa.cells;
    lb.value_base = static_cast<CellId>(layout.cells.size());
    for (const auto& v : lb.ssa.values)
        layout.cells.push_back(CellInfo{info.name + "/" + v.name, v.width, Region::NonRelevant, CellKind::Temp});

    auto m = std::make_shared<AcceleratorModel>();
    m->name = info.name;
    m->control_tag = info.name;
    m->batch_size = ann.in_batch_size;
    m->action_count = ann.action_count;
    m->data_width = prog.find_var(ann.batch_mem_in)->width;
    m->output_width = prog.find_var(ann.batch_mem_out)->width;
    m->in_words = ann.in_size;
    m->out_words = ann.out_size;
    m->program = to_model_program(lb.ssa, lb.value_base);
    m->diagnostics = lb.ssa.diagnostics;
    BatchPorts bp;
    bp.mem_in = ann.batch_mem_in;
    bp.mem_out = ann.batch_mem_out;
    for (const auto& lane : ports.in) bp.in_lanes.emplace_back(lane.begin() + (actions ? 1 : 0), lane.end());
    bp.out_lanes = ann.out_lanes;
    m->ports = std::move(bp);
    lb.model = m;
    return lb;
}

void bind_layout(AcceleratorModel& m, const GlobalLayout& layout, const PortSet& ports) {
    m.layout.cells = layout.cells;
    for (auto& c : m.layout.cells) c.region = Region::NonRelevant;
    for (const auto& lane : ports.in)
        for (CellId c : lane) m.layout.cells[c].region = Region::Input;
    for (const auto& lane : ports.out)
        for (CellId c : lane) m.layout.cells[c].region = Region::Output;
    for (CellId c : layout.relevant) m.layout.cells[c].region = Region::Relevant;
    m.layout.rebuild_regions();
    // Region lists follow port order (lane-major), not cell order.
    m.layout.input.clear();
    for (const auto& lane : ports.in) m.layout.input.insert(m.layout.input.end(), lane.begin(), lane.end());
    m.layout.output.clear();
    for (const auto& lane : ports.out) m.layout.output.insert(m.layout.output.end(), lane.begin(), lane.end());
    m.layout.in_cells_per_lane = ports.in.empty() ? 0 : ports.in[0].size();
    m.layout.out_cells_per_lane = ports.out.empty() ? 0 : ports.out[0].size();
    m.initial_values.assign(layout.cells.size(), std::nullopt);
    for (std::size_t c = 0; c < layout.storage_init.size(); ++c) m.initial_values[c] = layout.storage_init[c];
    m.validate();
}

AcceleratorModel lower(const AbkProgram& prog, int block) {
    GlobalLayout layout = make_layout(prog);
    LoweredBlock lb = lower_block(prog, block, layout);
    bind_layout(*lb.model, layout, layout.ports.at(block));
    return *lb.model;
}

} // namespace aqed
