#pragma once

// Tseitin bit-blasting of term DAGs to clause form.

#include "aqed/terms.hpp"

#include <iosfwd>
#include <vector>

namespace aqed {

/// Literals are DIMACS-style: variable v >= 1 is `v`, its negation `-v`.
using Lit = int;

struct Cnf {
    int num_vars = 0;
    std::vector<std::vector<Lit>> clauses;

    int new_var() { return ++num_vars; }
    void add(std::vector<Lit> clause) { clauses.push_back(std::move(clause)); }
};

class BitBlaster {
public:
    BitBlaster(const TermManager& tm, Cnf& cnf);

    /// Bits of a term, least significant first.
    const std::vector<Lit>& bits(TermId t);
    Lit bit(TermId boolean_term);
    /// Adds a unit clause asserting a width-1 term.
    void assert_true(TermId boolean_term);

    Lit true_lit() const { return true_; }
    Lit false_lit() const { return -true_; }

private:
    const TermManager& tm_;
    Cnf& cnf_;
    Lit true_;
    std::vector<std::vector<Lit>> cache_;
    std::vector<char> done_;

    void blast(TermId t);
    Lit and2(Lit a, Lit b);
    Lit or2(Lit a, Lit b) { return -and2(-a, -b); }
    Lit xor2(Lit a, Lit b);
    Lit mux(Lit s, Lit t, Lit e);
    Lit and_n(const std::vector<Lit>& ls);
    std::vector<Lit> adder(const std::vector<Lit>& a, const std::vector<Lit>& b, Lit carry_in);
    std::vector<Lit> multiplier(const std::vector<Lit>& a, const std::vector<Lit>& b);
    std::vector<Lit> shifter(const std::vector<Lit>& a, const std::vector<Lit>& b, bool left);
    Lit less_than(const std::vector<Lit>& a, const std::vector<Lit>& b, bool or_equal);
    Lit equal(const std::vector<Lit>& a, const std::vector<Lit>& b);
};

/// Writes the clause set in DIMACS format. The header comments map every
/// term variable to its literals, least significant bit first.
void write_dimacs(std::ostream& os, const Cnf& cnf, const TermManager& tm, BitBlaster& bb);

} // namespace aqed
