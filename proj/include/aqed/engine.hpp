#pragma once

// Discharging check obligations: an exhaustive enumeration oracle and a
// symbolic backend (term encoding, bit-blasting, CDCL), witness decoding with
// replay validation, and witness minimization.

#include "aqed/error.hpp"
#include "aqed/obligation.hpp"
#include "aqed/terms.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aqed {

struct Budget {
    std::uint64_t max_conflicts = 0;         // 0 = unlimited
    double max_seconds = 0;                  // 0 = unlimited
    std::uint64_t max_cases = std::uint64_t{1} << 24;
    std::size_t max_clauses = std::size_t{40} << 20;
    std::size_t unroll_cap = std::size_t{1} << 22;  // executed instructions in the encoding

    /// Defaults overridden by AQED_BUDGET_SECONDS / AQED_BUDGET_CONFLICTS.
    static Budget from_env();
};

enum class Verdict { Unsat, Sat, Unknown };
enum class Backend { Sat, Exhaustive };

std::string_view verdict_name(Verdict v);

struct CheckStats {
    std::size_t terms = 0;
    std::size_t vars = 0;
    std::size_t clauses = 0;
    std::uint64_t decisions = 0;
    std::uint64_t conflicts = 0;
    std::uint64_t propagations = 0;
    std::uint64_t restarts = 0;
    std::uint64_t cases = 0;
    double seconds = 0;
};

struct CheckResult {
    Verdict verdict = Verdict::Unknown;
    std::optional<CounterexampleTrace> trace;
    std::string unknown_cause;  // "timeout", "conflicts" or "memory"
    CheckStats stats;
    Backend backend = Backend::Sat;
};

/// Where a term variable lives in the obligation.
struct VarRole {
    enum Kind { InitCell, LaneAction, LaneWord, LaneSelect, LanePrimeSelect, BatchSelect } kind = InitCell;
    std::size_t copy = 0;
    std::size_t batch = 0;
    std::size_t lane = 0;
    std::size_t word = 0;
    CellId cell = kNone;
};

struct ConstraintSystem {
    CheckObligation obligation;
    std::shared_ptr<TermManager> tm;
    std::vector<TermId> roots;   // width-1 assertions
    std::vector<VarRole> roles;  // indexed like tm->vars()
    std::size_t executed = 0;    // instructions symbolically executed
};

CheckResult check_exhaustive(const CheckObligation& obl, const Budget& budget = {});

/// Throws UnrollCap when the unrolled execution exceeds `unroll_cap`
/// instructions, NotApplicable for FC-family checks of models with loops and
/// Config for specifications only the oracle can evaluate.
ConstraintSystem encode(const CheckObligation& obl, std::size_t unroll_cap = std::size_t{1} << 22);

CheckResult check_sat(const ConstraintSystem& sys, const Budget& budget = {});

CheckResult check(const CheckObligation& obl, Backend backend, const Budget& budget = {});

/// Checks independent obligations on `threads` workers; results keep the
/// input order.
std::vector<CheckResult> check_all(const std::vector<CheckObligation>& obls, Backend backend, const Budget& budget,
                                   unsigned threads = 1);

struct CheckOutcome {
    std::optional<CheckResult> result;
    std::optional<ErrorKind> error;  // set instead of result when the check threw
    std::string message;
};

/// Like check_all, but a failing obligation does not abort the others.
std::vector<CheckOutcome> check_each(const std::vector<CheckObligation>& obls, Backend backend, const Budget& budget,
                                     unsigned threads = 1);

CounterexampleTrace minimize(const CounterexampleTrace& trace, const CheckObligation& obl);

void export_dimacs(const ConstraintSystem& sys, std::ostream& os);

} // namespace aqed
