#pragma once

// CDCL SAT solver: two watched literals, first-UIP learning with clause
// minimization, VSIDS, phase saving, Luby restarts and learnt clause
// reduction.

#include "aqed/bitblast.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

namespace aqed {

enum class SatStatus { Sat, Unsat, Unknown };

struct SatLimits {
    std::uint64_t max_conflicts = 0;  // 0 = unlimited
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct SatStats {
    std::uint64_t decisions = 0;
    std::uint64_t conflicts = 0;
    std::uint64_t propagations = 0;
    std::uint64_t restarts = 0;
    std::uint64_t learnts = 0;
    std::uint64_t removed = 0;
};

class SatSolver {
public:
    SatSolver() = default;
    explicit SatSolver(const Cnf& cnf);

    void reserve_vars(int n);
    /// Returns false if the clause set became trivially unsatisfiable.
    bool add_clause(std::vector<Lit> clause);
    SatStatus solve(const SatLimits& limits = {});
    /// Value of a literal in the last satisfying assignment.
    bool value(Lit l) const;
    const SatStats& stats() const { return stats_; }
    /// Why the last Unknown happened: "conflicts" or "time".
    const char* unknown_cause() const { return unknown_cause_; }

private:
    using ClauseRef = std::uint32_t;
    static constexpr ClauseRef kNoReason = 0xffffffffu;

    struct Clause {
        std::vector<Lit> lits;
        bool learnt = false;
        bool deleted = false;
        double activity = 0;
    };
    struct Watch {
        ClauseRef cref;
        Lit blocker;
    };

    int nvars_ = 0;
    std::vector<Clause> clauses_;
    std::vector<std::vector<Watch>> watches_;  // indexed by literal code
    std::vector<std::int8_t> assigns_;         // per var: -1 unassigned, 0 false, 1 true
    std::vector<int> level_;
    std::vector<ClauseRef> reason_;
    std::vector<char> phase_;
    std::vector<double> activity_;
    std::vector<Lit> trail_;
    std::vector<std::size_t> trail_lim_;
    std::size_t qhead_ = 0;
    double var_inc_ = 1.0, cla_inc_ = 1.0;
    std::vector<int> heap_;       // binary max-heap of vars on activity
    std::vector<int> heap_pos_;   // -1 when not in heap
    std::vector<char> seen_;
    std::vector<std::int8_t> model_;
    bool ok_ = true;
    SatStats stats_;
    const char* unknown_cause_ = "";
    std::size_t num_learnts_ = 0;

    static std::size_t code(Lit l) { return l > 0 ? 2 * static_cast<std::size_t>(l) : 2 * static_cast<std::size_t>(-l) + 1; }
    int lit_value(Lit l) const;  // -1 unassigned, 0 false, 1 true
    int decision_level() const { return static_cast<int>(trail_lim_.size()); }

    void ensure_var(int v);
    void assign(Lit l, ClauseRef reason);
    ClauseRef propagate();
    void analyze(ClauseRef conflict, std::vector<Lit>& learnt, int& backtrack_level);
    bool redundant(Lit l, unsigned abstract_levels, std::vector<int>& to_clear);
    void backtrack(int level);
    Lit pick_branch();
    void attach(ClauseRef cr);
    void bump_var(int v);
    void bump_clause(Clause& c);
    void reduce_db();

    void heap_insert(int v);
    void heap_up(std::size_t i);
    void heap_down(std::size_t i);
    int heap_pop();
    bool heap_less(int a, int b) const { return activity_[a] > activity_[b]; }
};

} // namespace aqed
