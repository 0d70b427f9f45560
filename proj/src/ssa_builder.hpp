#pragma once

#include "aqed/abk.hpp"
#include "aqed/ssa.hpp"

#include <map>
#include <optional>

namespace aqed::detail {

// Operand of expression construction: a folded constant or an SSA value.
struct Operand {
    bool konst = true;
    Word v = 0;
    std::uint32_t id = kNone;
    unsigned w = 1;
};

// Builds SSA into `out`, forwarding stored values through a cell cache and
// flushing dirty cells before loops, symbolic accesses and at the end.
class SsaBuilder {
public:
    SsaBuilder(const AbkProgram& prog, SsaProgram& out);

    std::uint32_t load_port(CellId port, int line);
    void store_port(CellId port, std::uint32_t value, int line);
    std::uint32_t read_cell(CellId c, int line);
    void write_cell(CellId c, const Operand& value, int line);

    void exec_block(int block);
    void exec_body();
    void finish(int line);

private:
    struct Entry {
        std::uint32_t value;
        bool dirty;
    };
    struct Binding {
        Operand value;
        std::optional<CellId> cell;  // loop variables of non-constant loops
    };
    using Env = std::map<std::string, Binding>;

    const AbkProgram& prog_;
    SsaProgram& out_;
    std::map<CellId, Entry> cache_;
    std::vector<unsigned> version_;
    std::size_t temp_counter_ = 0;
    std::size_t hidden_counter_ = 0;

    std::uint32_t new_value(const std::string& name, unsigned width);
    std::uint32_t emit(Instr in, unsigned value_width);
    std::uint32_t materialize(const Operand& o, unsigned width, int line);
    Operand value_of(std::uint32_t id) const;

    void flush(int line);
    void flush_range(CellId base, std::size_t count, int line);
    void invalidate_range(CellId base, std::size_t count);
    void check_cap() const;

    void exec_list(const std::vector<Stmt>& list, const Env& env);
    void exec(const Stmt& s, const Env& env);
    void exec_while(const Stmt& s, const Env& env);
    void exec_dynamic_for(const Stmt& s, const Env& env, const Operand& lo, const Operand& hi);
    void assign(const Stmt& s, const Env& env);

    Operand eval(const Expr& e, const Env& env);
    Operand ref(const Expr& e, const Env& env);
    Operand binary(const std::string& op, const Operand& a, const Operand& b, int line, int col);
    Operand to_bool(const Operand& a, int line);
    // Flat index of a symbolic subscript list; out-of-range yields `count`.
    Operand flat_index(const Expr& e, const std::vector<Operand>& idx, const VarDecl& var);
};

} // namespace aqed::detail
