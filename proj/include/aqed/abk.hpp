#pragma once

// Annotated Batch Kernel (ABK) language: AST, parser and a reference
// interpreter over flattened storage cells.

#include "aqed/model.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aqed {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind : std::uint8_t { Number, Ref, Unary, Binary, Ternary };

struct Expr {
    ExprKind kind = ExprKind::Number;
    Word value = 0;              // Number
    std::string name;            // Ref
    std::vector<ExprPtr> index;  // Ref subscripts
    std::string op;              // Unary/Binary operator spelling
    ExprPtr lhs, rhs, third;
    int line = 0;
    int column = 0;
};

enum class StmtKind : std::uint8_t { Assign, For, While, Block };

struct Stmt {
    StmtKind kind = StmtKind::Assign;
    ExprPtr target;  // Assign: a Ref
    ExprPtr value;   // Assign value, While condition
    std::string var; // For induction variable
    ExprPtr lo, hi;  // For bounds, half-open
    std::vector<Stmt> body;
    int block = -1;  // Block: index into AbkProgram::blocks
    int line = 0;
};

struct VarDecl {
    std::string name;
    std::vector<std::size_t> dims;
    unsigned width = 8;
    std::optional<Word> init;
    CellId first_cell = 0;
    int line = 0;

    std::size_t cell_count() const;
};

/// One subscript of an alloc rule: a single expression or a half-open
/// range [lo : hi] (only allowed in the last position).
struct RuleIndex {
    ExprPtr lo;
    ExprPtr hi;  // null for a single index
};

struct AllocRule {
    bool is_output = false;  // head is out(x) rather than in(x)
    std::string lane_var;
    std::vector<RuleIndex> indices;
    int line = 0;
};

struct Directive {
    std::string name;
    std::string text;
    int line = 0;
    int column = 0;
};

struct BatchAnnotation {
    std::size_t in_size = 0;
    std::size_t in_batch_size = 0;
    std::string batch_mem_in;
    AllocRule in_rule;
    std::size_t out_size = 0;
    std::size_t out_batch_size = 0;
    std::string batch_mem_out;
    AllocRule out_rule;
    std::vector<ExprPtr> rel_refs;
    unsigned action_count = 1;
    std::string action_array;
    /// Resolved lane cells: in_lanes[x][w] is the storage cell holding word w
    /// of lane x.
    std::vector<std::vector<CellId>> in_lanes;
    std::vector<std::vector<CellId>> out_lanes;
    std::vector<CellId> action_cells;
    std::vector<CellId> rel_cells;
    /// Values chosen for free variables of the alloc rules.
    std::map<std::string, Word> rule_bindings;
};

struct BlockInfo {
    std::string name;
    int start_line = 0;
    int end_line = 0;
    int parent = -1;
    std::vector<int> children;
    std::vector<Directive> directives;
    bool is_spec = false;
    std::optional<BatchAnnotation> annotation;  // set for annotated leaf blocks
};

struct ParseOptions {
    bool rb_mode = false;
    /// Replaces the value of a `const` declaration with the same name.
    std::map<std::string, Word> overrides;
    std::size_t unroll_cap = std::size_t{1} << 22;
};

struct AbkProgram {
    std::map<std::string, Word> constants;
    std::vector<VarDecl> vars;
    std::vector<CellInfo> cells;  // flattened storage, row-major per variable
    std::vector<Stmt> body;
    std::vector<BlockInfo> blocks;  // pre-order
    std::vector<Directive> program_directives;
    std::vector<std::string> diagnostics;
    bool rb_mode = false;
    std::size_t unroll_cap = std::size_t{1} << 22;

    const VarDecl* find_var(const std::string& name) const;
    int find_block(const std::string& name) const;
    int spec_block() const;
    /// Annotated leaf blocks other than the spec block, in source order.
    std::vector<int> leaf_blocks() const;
    std::size_t statement_count() const;
};

AbkProgram parse(const std::string& text, const ParseOptions& opts = {});

/// Resolves a Ref with constant subscripts to a cell; nullopt when out of
/// bounds. Throws on unknown names or symbolic subscripts.
std::optional<CellId> resolve_ref(const AbkProgram& prog, const Expr& ref, const std::map<std::string, Word>& env);

/// All cells named by a Ref: a whole variable, a row, or one element.
std::vector<CellId> resolve_ref_cells(const AbkProgram& prog, const Expr& ref,
                                      const std::map<std::string, Word>& env);

/// Evaluates an expression that must be constant under `env` plus the
/// program's constants. Throws SyntaxError when it is not.
Word eval_constant(const AbkProgram& prog, const Expr& e, const std::map<std::string, Word>& env);

/// Exact 64-bit folding of a binary operator on constants.
Word fold_binary_op(const std::string& op, Word a, Word b, int line, int column);

/// Result width of a constant: its bit length, at least 1.
unsigned constant_width(Word v);

// Reference interpreter. Memory is the flattened storage vector.
struct InterpretOptions {
    std::size_t step_budget = kDefaultStepBudget;
};

/// Executes the statements of the program body in order, skipping the spec
/// block. `block` restricts execution to one block's statements.
void interpret(const AbkProgram& prog, std::vector<Word>& memory, int block = -1,
               const InterpretOptions& opts = {});

/// Initial storage with declared initializers applied and everything else 0.
std::vector<Word> initial_storage(const AbkProgram& prog);

/// Writes a batch into storage through the block's input alloc rule.
void store_batch(const AbkProgram& prog, int block, const InputBatch& batch, std::vector<Word>& memory);
OutputBatch load_outputs(const AbkProgram& prog, int block, const std::vector<Word>& memory);

} // namespace aqed
