#pragma once

// Hash-consed bitvector term DAG with constant folding.

#include "aqed/model.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace aqed {

using TermId = std::uint32_t;

enum class TermOp : std::uint8_t {
    Const,
    Var,
    Not,
    Neg,
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,   // b >= width gives 0
    Lshr,  // b >= width gives 0
    Eq,    // width 1
    Ult,   // width 1
    Ule,   // width 1
    Ite,   // a is width 1
    Trunc, // a truncated to width
    Zext,  // a zero-extended to width
};

struct Term {
    TermOp op = TermOp::Const;
    unsigned width = 1;
    TermId a = kNone, b = kNone, c = kNone;
    Word value = 0;  // Const: the value; Var: the variable index
};

struct TermVar {
    std::string name;
    unsigned width = 1;
    TermId term = kNone;
};

class TermManager {
public:
    TermId constant(Word v, unsigned width);
    TermId var(const std::string& name, unsigned width);
    TermId tru() { return constant(1, 1); }
    TermId fls() { return constant(0, 1); }

    TermId mk_not(TermId a);
    TermId neg(TermId a);
    TermId add(TermId a, TermId b);
    TermId sub(TermId a, TermId b);
    TermId mul(TermId a, TermId b);
    TermId band(TermId a, TermId b);
    TermId bor(TermId a, TermId b);
    TermId bxor(TermId a, TermId b);
    TermId shl(TermId a, TermId b);
    TermId lshr(TermId a, TermId b);
    TermId eq(TermId a, TermId b);
    TermId ne(TermId a, TermId b) { return mk_not(eq(a, b)); }
    TermId ult(TermId a, TermId b);
    TermId ule(TermId a, TermId b);
    TermId ite(TermId c, TermId t, TermId e);
    /// Truncates or zero-extends to `width`.
    TermId resize(TermId a, unsigned width);
    /// a != 0 as a width-1 term.
    TermId nonzero(TermId a);

    TermId land(TermId a, TermId b) { return band(a, b); }
    TermId lor(TermId a, TermId b) { return bor(a, b); }
    TermId implies(TermId a, TermId b) { return bor(mk_not(a), b); }

    const Term& get(TermId t) const { return terms_.at(t); }
    unsigned width(TermId t) const { return terms_.at(t).width; }
    bool is_const(TermId t) const { return terms_.at(t).op == TermOp::Const; }
    Word const_value(TermId t) const { return terms_.at(t).value; }
    std::size_t size() const { return terms_.size(); }
    const std::vector<TermVar>& vars() const { return vars_; }

    /// Concrete evaluation under an assignment indexed like vars().
    Word eval(TermId t, const std::vector<Word>& assignment) const;

private:
    struct Key {
        TermOp op;
        unsigned width;
        TermId a, b, c;
        Word value;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };

    std::vector<Term> terms_;
    std::vector<TermVar> vars_;
    std::unordered_map<Key, TermId, KeyHash> table_;

    TermId make(TermOp op, unsigned width, TermId a, TermId b = kNone, TermId c = kNone, Word value = 0);
    TermId binary(TermOp op, TermId a, TermId b);
};

/// Evaluates a term operator on concrete operands (widths as in the term).
Word eval_term_op(TermOp op, unsigned width, Word a, Word b, Word c, unsigned operand_width);

} // namespace aqed
