#include "aqed/abk.hpp"
#include "aqed/decompose.hpp"
#include "aqed/error.hpp"
#include "aqed/lower.hpp"
#include "aqed/ssa.hpp"
#include "kernels.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace aqed;

namespace {

InputBatch random_batch(const AcceleratorModel& m, std::mt19937_64& rng) {
    InputBatch b;
    for (std::size_t j = 0; j < m.batch_size; ++j) {
        Lane l;
        l.action = m.action_count > 1 ? rng() % m.action_count : 0;
        for (std::size_t w = 0; w < m.in_words; ++w) l.data.push_back(rng() & width_mask(m.data_width));
        b.lanes.push_back(l);
    }
    return b;
}

std::size_t count_op(const SsaProgram& s, Opcode op) {
    std::size_t n = 0;
    for (const auto& in : s.code) n += in.op == op;
    return n;
}

} // namespace

TEST(Parse, ConstantsAndDeclarations) {
    AbkProgram p = parse(kernels::kTwoStage);
    EXPECT_EQ(p.constants.at("US"), 4u);
    ASSERT_NE(p.find_var("buf"), nullptr);
    EXPECT_EQ(p.find_var("buf")->cell_count(), 8u);
    EXPECT_EQ(p.cells.size(), 8u + 8u + 2u);
    EXPECT_EQ(p.leaf_blocks().size(), 2u);
}

TEST(Parse, AnnotationsResolveToLaneCells) {
    AbkProgram p = parse(kernels::kTwoStage);
    const auto& a1 = *p.blocks[p.find_block("ACC1")].annotation;
    EXPECT_EQ(a1.in_batch_size, 8u);
    EXPECT_EQ(a1.in_size, 1u);
    const VarDecl& buf = *p.find_var("buf");
    // lane 5 lives at buf[1][1]
    EXPECT_EQ(a1.out_lanes[5][0], buf.first_cell + 5);
    ASSERT_EQ(a1.rel_cells.size(), 1u);
    EXPECT_EQ(a1.rel_cells[0], p.find_var("key")->first_cell);
}

TEST(Parse, AesShapeHas256LanesOf16Words) {
    AbkProgram p = parse(kernels::kAesShape);
    ASSERT_EQ(p.leaf_blocks().size(), 2u);
    for (int b : p.leaf_blocks()) {
        EXPECT_EQ(p.blocks[b].annotation->in_batch_size, 256u);
        EXPECT_EQ(p.blocks[b].annotation->in_size, 16u);
    }
}

TEST(Parse, OverlappingAllocRuleIsRejected) {
    std::string src = kernels::kParallelFused;
    src.replace(src.find("[x : x + 1]"), 11, "[x / 2 : x / 2 + 1]");
    try {
        parse(src);
        FAIL() << "expected AnnotationError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Annotation);
    }
}

TEST(Parse, MissingDirectiveIsAnnotationError) {
    std::string src = kernels::kParallelFused;
    src.erase(src.find("%BATCH_MEM_OUT o"), 16);
    try {
        parse(src);
        FAIL() << "expected AnnotationError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Annotation);
    }
}

TEST(Parse, NonConstantForBoundNeedsRbMode) {
    const char* src = R"(
var n: 4;
var x: 4;
for j in 0..n { x := x + 1; }
)";
    try {
        parse(src);
        FAIL() << "expected BoundError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Bound);
    }
    ParseOptions o;
    o.rb_mode = true;
    EXPECT_NO_THROW(parse(src, o));
}

TEST(Parse, SyntaxErrorCarriesPosition) {
    try {
        parse("var x: 4;\nx := (x + ;\n");
        FAIL();
    } catch (const SourceError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Syntax);
        EXPECT_EQ(e.line(), 2);
    }
}

TEST(Parse, EmptyBodyWithAnnotations) {
    const char* src = R"(
var d[2]: 2;
var o[2]: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
// ===ACC1 START===
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT o
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";
    AbkProgram p = parse(src);
    EXPECT_EQ(p.statement_count(), 0u);
}

TEST(Ssa, UnrolledSumHasTwoAdds) {
    AbkProgram p = parse("var a[2]: 8;\nvar x: 8;\nfor j in 0..2 { x := x + a[j]; }\n");
    SsaProgram s = unroll_and_ssa(p);
    EXPECT_EQ(count_op(s, Opcode::Add), 2u);
    EXPECT_FALSE(s.has_loops());
}

TEST(Ssa, NestedLoopsUnrollRowMajor) {
    AbkProgram p = parse("var o[6]: 8;\nfor i in 0..2 { for k in 0..3 { o[i * 3 + k] := i * 10 + k; } }\n");
    SsaProgram s = unroll_and_ssa(p);
    std::vector<Word> mem = initial_storage(p);
    interpret_ssa(s, mem, kDefaultStepBudget);
    EXPECT_EQ(mem, (std::vector<Word>{0, 1, 2, 10, 11, 12}));
}

TEST(Ssa, UnrollCapIsEnforced) {
    ParseOptions o;
    o.unroll_cap = 50;
    AbkProgram p = parse("var o[100]: 8;\nfor i in 0..100 { o[i] := i; }\n", o);
    try {
        unroll_and_ssa(p);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnrollCap);
    }
}

TEST(Ssa, AstSsaAndModelAgree) {
    for (const char* src : {kernels::kTwoStage, kernels::kAccumulate, kernels::kParallelHalves}) {
        AbkProgram p = parse(src);
        SsaProgram s = unroll_and_ssa(p);
        std::mt19937_64 rng(7);
        for (int t = 0; t < 100; ++t) {
            std::vector<Word> mem(p.cells.size());
            for (std::size_t c = 0; c < mem.size(); ++c) mem[c] = rng() & width_mask(p.cells[c].width);
            std::vector<Word> a = mem, b = mem;
            interpret(p, a);
            interpret_ssa(s, b, kDefaultStepBudget);
            ASSERT_EQ(a, b);
        }
    }
}

TEST(Lower, ModelMatchesDirectInterpretationPerBlock) {
    for (const char* src : {kernels::kTwoStage, kernels::kAccumulate}) {
        AbkProgram p = parse(src);
        for (int blk : p.leaf_blocks()) {
            AcceleratorModel m = lower(p, blk);
            std::mt19937_64 rng(blk + 1);
            for (int t = 0; t < 100; ++t) {
                MachineState s = default_initial_state(m);
                for (CellId c = 0; c < p.cells.size(); ++c) s.memory[c] = rng() & width_mask(p.cells[c].width);
                InputBatch batch = random_batch(m, rng);
                std::vector<Word> direct(s.memory.begin(), s.memory.begin() + p.cells.size());
                store_batch(p, blk, batch, direct);
                interpret(p, direct, blk);
                ExecutionTrace tr = run_batch(m, s, batch, RunOptions{kDefaultStepBudget, false, true});
                ASSERT_EQ(tr.outputs.back(), load_outputs(p, blk, direct));
                std::vector<Word> lowered(tr.final_state().memory.begin(),
                                          tr.final_state().memory.begin() + p.cells.size());
                ASSERT_EQ(lowered, direct);
            }
        }
    }
}

TEST(Lower, RegionsOfXorBlock) {
    AbkProgram p = parse(kernels::kTwoStage);
    AcceleratorModel m = lower(p, p.find_block("ACC1"));
    EXPECT_EQ(m.batch_size, 8u);
    ASSERT_EQ(m.layout.relevant.size(), 1u);
    EXPECT_EQ(m.layout.relevant[0], p.find_var("key")->first_cell);
    EXPECT_EQ(m.layout.input.size(), 8u);
    EXPECT_EQ(m.layout.output.size(), 8u);
}

TEST(Lower, ZeroKeyXorIsIdentity) {
    AbkProgram p = parse(kernels::kTwoStage);
    AcceleratorModel m = lower(p, p.find_block("ACC1"));
    MachineState s = default_initial_state(m);
    InputBatch b;
    for (Word v = 0; v < 8; ++v) b.lanes.push_back(Lane{0, {v * 2 % 16}});
    auto tr = run_batch(m, s, b);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(tr.outputs[0][j][0], b.lanes[j].data[0]);
}

TEST(Lower, RelAliasingInputIsRegionError) {
    std::string src = kernels::kParallelFused;
    src.insert(src.find("// ===ACC1 START"), "%REL d[1]\n");
    try {
        parse(src);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Region);
    }
}

TEST(Decompose, TwoStageChainThroughBuf) {
    AbkProgram p = parse(kernels::kTwoStage);
    DecompositionPlan pl = plan(p);
    ASSERT_EQ(pl.stages.size(), 2u);
    ASSERT_EQ(pl.wiring.size(), 1u);
    EXPECT_EQ(pl.wiring[0].buffer, "buf");
    EXPECT_EQ(pl.total(), 2u);
    EXPECT_EQ(pl.parallel(), 2u);
}

TEST(Decompose, SingleBlockHasNoWiring) {
    DecompositionPlan pl = plan(parse(kernels::kAccumulate));
    EXPECT_EQ(pl.stages.size(), 1u);
    EXPECT_TRUE(pl.wiring.empty());
}

TEST(Decompose, AesShapeReportsTwoAndTwo) {
    DecompositionPlan pl = plan(parse(kernels::kAesShape));
    EXPECT_EQ(pl.total(), 2u);
    EXPECT_EQ(pl.parallel(), 2u);
    EXPECT_NE(plan_report(pl).find("T=2 P=2"), std::string::npos);
}

TEST(Decompose, ComposeMatchesDirectExecution) {
    for (const char* src : {kernels::kTwoStage, kernels::kAesShape, kernels::kParallelHalves}) {
        AbkProgram p = parse(src);
        DecompositionPlan pl = plan(p);
        AcceleratorModel m = compose(pl);
        const int first = p.leaf_blocks().front(), last = p.leaf_blocks().back();
        std::mt19937_64 rng(11);
        for (int t = 0; t < 20; ++t) {
            MachineState s = default_initial_state(m);
            for (CellId c = 0; c < p.cells.size(); ++c) s.memory[c] = rng() & width_mask(p.cells[c].width);
            InputBatch batch = random_batch(m, rng);
            std::vector<Word> direct(s.memory.begin(), s.memory.begin() + p.cells.size());
            if (pl.stages.front()->name.find('|') != std::string::npos) {
                // parallel group: lanes split across the member blocks
                std::size_t off = 0;
                for (int blk : p.leaf_blocks()) {
                    InputBatch part;
                    const auto n = p.blocks[blk].annotation->in_batch_size;
                    part.lanes.assign(batch.lanes.begin() + off, batch.lanes.begin() + off + n);
                    store_batch(p, blk, part, direct);
                    off += n;
                }
            } else {
                store_batch(p, first, batch, direct);
            }
            interpret(p, direct);
            auto tr = run_batch(m, s, batch, RunOptions{kDefaultStepBudget, false, false});
            OutputBatch expect;
            if (pl.stages.back()->name.find('|') != std::string::npos) {
                for (int blk : p.leaf_blocks()) {
                    auto part = load_outputs(p, blk, direct);
                    expect.insert(expect.end(), part.begin(), part.end());
                }
            } else {
                expect = load_outputs(p, last, direct);
            }
            ASSERT_EQ(tr.outputs.back(), expect);
        }
    }
}

TEST(Decompose, ParallelHalvesFormOneGroup) {
    DecompositionPlan pl = plan(parse(kernels::kParallelHalves));
    ASSERT_EQ(pl.parallel_groups.size(), 1u);
    EXPECT_EQ(pl.parallel_groups[0].size(), 2u);
    EXPECT_EQ(pl.stages.front()->batch_size, 4u);
}

TEST(Decompose, ParallelGroupEquivalentToFusedBlockExhaustively) {
    AbkProgram ph = parse(kernels::kParallelHalves), pf = parse(kernels::kParallelFused);
    AcceleratorModel halves = compose(plan(ph));
    AcceleratorModel fused = compose(plan(pf));
    // all 4^4 batches at width 2
    for (unsigned v = 0; v < 256; ++v) {
        InputBatch b;
        for (unsigned j = 0; j < 4; ++j) b.lanes.push_back(Lane{0, {(v >> (2 * j)) & 3u}});
        auto a = run_batch(halves, default_initial_state(halves), b);
        auto f = run_batch(fused, default_initial_state(fused), b);
        ASSERT_EQ(a.outputs[0], f.outputs[0]);
    }
}

TEST(Decompose, WiringMismatchIsReported) {
    std::string src = kernels::kTwoStage;
    // second block reads from data instead of buf
    auto pos = src.find("%BATCH_MEM_IN buf");
    src.replace(pos, 17, "%BATCH_MEM_IN data");
    auto rule = src.find("in(x) addr range = [x / US][x % US : x % US + 1]");
    src.replace(rule, 48, "in(x) addr range = [x : x + 1]");
    try {
        plan(parse(src));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Wiring);
    }
}

TEST(Alpha, MovesOutputToInputAndKeepsRel) {
    DecompositionPlan pl = plan(parse(kernels::kTwoStage));
    const auto& p = *pl.stages[0];
    const auto& c = *pl.stages[1];
    std::vector<Word> mem(p.layout.size(), 0);
    mem[p.layout.output[0]] = 7;
    mem[p.layout.relevant[0]] = 3;
    std::vector<Word> next = alpha(pl.alpha_maps[0], mem);
    EXPECT_EQ(next[c.layout.input[0]], 7u);
    EXPECT_EQ(rel(c, next), rel(p, mem));
}

TEST(Alpha, IsInjectiveOnRandomMemories) {
    DecompositionPlan pl = plan(parse(kernels::kTwoStage));
    std::mt19937_64 rng(3);
    std::set<std::vector<Word>> images;
    std::set<std::vector<Word>> inputs;
    for (int t = 0; t < 100; ++t) {
        std::vector<Word> mem(pl.stages[0]->layout.size());
        for (auto& w : mem) w = rng() & 15;
        inputs.insert(mem);
        images.insert(alpha(pl.alpha_maps[0], mem));
    }
    EXPECT_EQ(images.size(), inputs.size());
    std::vector<CellId> sorted = pl.alpha_maps[0].perm;
    std::sort(sorted.begin(), sorted.end());
    for (CellId c = 0; c < sorted.size(); ++c) EXPECT_EQ(sorted[c], c);
}

TEST(Alpha, ThreeStageChainPreservesRel) {
    DecompositionPlan pl = plan(parse(kernels::kTwoStage));
    std::vector<ModelPtr> chain = {pl.stages[0], pl.stages[1], pl.stages[1]};
    AcceleratorModel m = compose(chain);
    MachineState s = default_initial_state(m);
    s.memory[m.layout.relevant[0]] = 9;
    InputBatch b;
    for (int j = 0; j < 8; ++j) b.lanes.push_back(Lane{0, {Word(j)}});
    auto tr = run_batch(m, s, b);
    EXPECT_EQ(tr.final_state().memory[m.layout.relevant[0]], 9u);
    // xor 9 then +3 twice
    for (int j = 0; j < 8; ++j) EXPECT_EQ(tr.outputs[0][j][0], ((Word(j) ^ 9) + 6) & 15);
}

TEST(Compose, SelfCompositionRenamesControl) {
    DecompositionPlan pl = plan(parse(kernels::kTwoStage));
    auto s2 = pl.stages[1];
    AlphaMap map = make_alpha(*s2, *s2);
    EXPECT_TRUE(check_condition(3, *s2, *s2, map).has_value());
    EXPECT_NO_THROW(compose(std::vector<ModelPtr>{s2, s2}));
}

TEST(Compose, ConditionFailureIsReproducible) {
    DecompositionPlan pl = plan(parse(kernels::kTwoStage));
    auto other = std::make_shared<AcceleratorModel>(*pl.stages[1]);
    other->layout.relevant.clear();
    for (auto& c : other->layout.cells)
        if (c.region == Region::Relevant) c.region = Region::NonRelevant;
    other->layout.rebuild_regions();
    other->layout.input = pl.stages[1]->layout.input;
    other->layout.output = pl.stages[1]->layout.output;
    try {
        compose(std::vector<ModelPtr>{pl.stages[0], other});
        FAIL();
    } catch (const ComposabilityError& e) {
        EXPECT_EQ(e.condition(), 4);
        EXPECT_TRUE(check_condition(4, *pl.stages[0], *other, make_alpha(*pl.stages[0], *other)).has_value());
    }
}

TEST(Compose, XorTwiceWithSameKeyIsIdentity) {
    const char* src = R"(
var d[2]: 2;
var b[2]: 2;
var key: 2;
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN d
%IN_ALLOC_RULE in(x) = [x : x + 1]
%REL key
// ===ACC1 START===
for j in 0..2 { b[j] := d[j] ^ key; }
// ===ACC1 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT b
%OUT_ALLOC_RULE out(x) = [x : x + 1]
%IN_SIZE 1
%IN_BATCH_SIZE 2
%BATCH_MEM_IN b
%IN_ALLOC_RULE in(x) = [x : x + 1]
%REL key
// ===ACC2 START===
for j in 0..2 { b[j] := b[j] ^ key; }
// ===ACC2 END===
%OUT_SIZE 1
%OUT_BATCH_SIZE 2
%BATCH_MEM_OUT b
%OUT_ALLOC_RULE out(x) = [x : x + 1]
)";
    AbkProgram p = parse(src);
    AcceleratorModel m = compose(plan(p));
    const CellId key = p.find_var("key")->first_cell;
    for (Word k = 0; k < 4; ++k)
        for (Word v = 0; v < 16; ++v) {
            MachineState s = default_initial_state(m);
            s.memory[key] = k;
            InputBatch b{{Lane{0, {v & 3}}, Lane{0, {v >> 2}}}};
            auto tr = run_batch(m, s, b);
            ASSERT_EQ(tr.outputs[0][0][0], v & 3);
            ASSERT_EQ(tr.outputs[0][1][0], v >> 2);
        }
}
