#include "aqed/sat.hpp"

#include "aqed/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace aqed {

namespace {

double luby(double y, int x) {
    int size = 1, seq = 0;
    while (size < x + 1) {
        ++seq;
        size = 2 * size + 1;
    }
    while (size - 1 != x) {
        size = (size - 1) >> 1;
        --seq;
        x = x % size;
    }
    return std::pow(y, seq);
}

} // namespace

SatSolver::SatSolver(const Cnf& cnf) {
    reserve_vars(cnf.num_vars);
    for (const auto& c : cnf.clauses)
        if (!add_clause(c)) break;
}

void SatSolver::reserve_vars(int n) { ensure_var(n); }

void SatSolver::ensure_var(int v) {
    if (v <= nvars_) return;
    const int old = nvars_;
    nvars_ = v;
    watches_.resize(2 * static_cast<std::size_t>(nvars_) + 2);
    assigns_.resize(nvars_ + 1, -1);
    level_.resize(nvars_ + 1, 0);
    reason_.resize(nvars_ + 1, kNoReason);
    phase_.resize(nvars_ + 1, 0);
    activity_.resize(nvars_ + 1, 0.0);
    seen_.resize(nvars_ + 1, 0);
    heap_pos_.resize(nvars_ + 1, -1);
    for (int x = old + 1; x <= nvars_; ++x) heap_insert(x);
}

int SatSolver::lit_value(Lit l) const {
    const int a = assigns_[std::abs(l)];
    if (a < 0) return -1;
    return l > 0 ? a : 1 - a;
}

void SatSolver::assign(Lit l, ClauseRef reason) {
    const int v = std::abs(l);
    assigns_[v] = l > 0 ? 1 : 0;
    level_[v] = decision_level();
    reason_[v] = reason;
    trail_.push_back(l);
}

void SatSolver::attach(ClauseRef cr) {
    const Clause& c = clauses_[cr];
    watches_[code(-c.lits[0])].push_back(Watch{cr, c.lits[1]});
    watches_[code(-c.lits[1])].push_back(Watch{cr, c.lits[0]});
}

bool SatSolver::add_clause(std::vector<Lit> lits) {
    if (!ok_) return false;
    backtrack(0);
    for (Lit l : lits) {
        if (l == 0) throw Error(ErrorKind::Internal, "literal 0 in clause");
        ensure_var(std::abs(l));
    }
    std::sort(lits.begin(), lits.end());
    lits.erase(std::unique(lits.begin(), lits.end()), lits.end());
    std::vector<Lit> keep;
    for (std::size_t i = 0; i < lits.size(); ++i) {
        if (std::binary_search(lits.begin(), lits.end(), -lits[i])) return true;  // tautology
        const int val = lit_value(lits[i]);
        if (val == 1) return true;
        if (val == -1) keep.push_back(lits[i]);
    }
    if (keep.empty()) return ok_ = false;
    if (keep.size() == 1) {
        assign(keep[0], kNoReason);
        if (propagate() != kNoReason) ok_ = false;
        return ok_;
    }
    clauses_.push_back(Clause{std::move(keep), false, false, 0});
    attach(static_cast<ClauseRef>(clauses_.size() - 1));
    return true;
}

SatSolver::ClauseRef SatSolver::propagate() {
    while (qhead_ < trail_.size()) {
        const Lit p = trail_[qhead_++];
        ++stats_.propagations;
        auto& ws = watches_[code(p)];
        const Lit false_lit = -p;
        std::size_t i = 0, j = 0;
        while (i < ws.size()) {
            const Watch w = ws[i];
            if (lit_value(w.blocker) == 1) {
                ws[j++] = ws[i++];
                continue;
            }
            Clause& c = clauses_[w.cref];
            ++i;
            if (c.deleted) continue;
            if (c.lits[0] == false_lit) std::swap(c.lits[0], c.lits[1]);
            const Lit first = c.lits[0];
            const Watch nw{w.cref, first};
            if (first != w.blocker && lit_value(first) == 1) {
                ws[j++] = nw;
                continue;
            }
            bool moved = false;
            for (std::size_t k = 2; k < c.lits.size(); ++k) {
                if (lit_value(c.lits[k]) != 0) {
                    std::swap(c.lits[1], c.lits[k]);
                    watches_[code(-c.lits[1])].push_back(nw);
                    moved = true;
                    break;
                }
            }
            if (moved) continue;
            ws[j++] = nw;
            if (lit_value(first) == 0) {
                qhead_ = trail_.size();
                while (i < ws.size()) ws[j++] = ws[i++];
                ws.resize(j);
                return w.cref;
            }
            assign(first, w.cref);
        }
        ws.resize(j);
    }
    return kNoReason;
}

void SatSolver::bump_var(int v) {
    if ((activity_[v] += var_inc_) > 1e100) {
        for (int x = 1; x <= nvars_; ++x) activity_[x] *= 1e-100;
        var_inc_ *= 1e-100;
    }
    if (heap_pos_[v] >= 0) heap_up(static_cast<std::size_t>(heap_pos_[v]));
}

void SatSolver::bump_clause(Clause& c) {
    if ((c.activity += cla_inc_) > 1e20) {
        for (auto& k : clauses_)
            if (k.learnt) k.activity *= 1e-20;
        cla_inc_ *= 1e-20;
    }
}

bool SatSolver::redundant(Lit p, unsigned abstract_levels, std::vector<int>& to_clear) {
    std::vector<Lit> stack{p};
    std::vector<int> added;
    while (!stack.empty()) {
        const Lit q = stack.back();
        stack.pop_back();
        const Clause& c = clauses_[reason_[std::abs(q)]];
        for (std::size_t k = 1; k < c.lits.size(); ++k) {
            const int v = std::abs(c.lits[k]);
            if (seen_[v] || level_[v] == 0) continue;
            if (reason_[v] != kNoReason && ((1u << (level_[v] & 31)) & abstract_levels)) {
                seen_[v] = 1;
                stack.push_back(c.lits[k]);
                added.push_back(v);
            } else {
                for (int x : added) seen_[x] = 0;
                return false;
            }
        }
    }
    // proven-redundant marks stay until analyze clears them
    to_clear.insert(to_clear.end(), added.begin(), added.end());
    return true;
}

void SatSolver::analyze(ClauseRef conflict, std::vector<Lit>& learnt, int& bt_level) {
    learnt.assign(1, 0);
    int path = 0;
    Lit p = 0;
    std::size_t idx = trail_.size();
    ClauseRef cr = conflict;
    do {
        Clause& c = clauses_[cr];
        if (c.learnt) bump_clause(c);
        for (std::size_t k = p == 0 ? 0 : 1; k < c.lits.size(); ++k) {
            const Lit q = c.lits[k];
            const int v = std::abs(q);
            if (seen_[v] || level_[v] == 0) continue;
            bump_var(v);
            seen_[v] = 1;
            if (level_[v] >= decision_level()) ++path;
            else learnt.push_back(q);
        }
        while (!seen_[std::abs(trail_[--idx])]) {
        }
        p = trail_[idx];
        cr = reason_[std::abs(p)];
        seen_[std::abs(p)] = 0;
        --path;
    } while (path > 0);
    learnt[0] = -p;

    std::vector<int> to_clear;
    for (std::size_t k = 1; k < learnt.size(); ++k) to_clear.push_back(std::abs(learnt[k]));
    unsigned levels = 0;
    for (std::size_t k = 1; k < learnt.size(); ++k) levels |= 1u << (level_[std::abs(learnt[k])] & 31);
    std::size_t out = 1;
    for (std::size_t k = 1; k < learnt.size(); ++k) {
        const int v = std::abs(learnt[k]);
        if (reason_[v] == kNoReason || !redundant(learnt[k], levels, to_clear)) learnt[out++] = learnt[k];
    }
    learnt.resize(out);
    for (int x : to_clear) seen_[x] = 0;

    bt_level = 0;
    if (learnt.size() > 1) {
        std::size_t max_i = 1;
        for (std::size_t k = 2; k < learnt.size(); ++k)
            if (level_[std::abs(learnt[k])] > level_[std::abs(learnt[max_i])]) max_i = k;
        std::swap(learnt[1], learnt[max_i]);
        bt_level = level_[std::abs(learnt[1])];
    }
}

void SatSolver::backtrack(int level) {
    if (decision_level() <= level) return;
    for (std::size_t i = trail_.size(); i > trail_lim_[level]; --i) {
        const int v = std::abs(trail_[i - 1]);
        phase_[v] = static_cast<char>(assigns_[v]);
        assigns_[v] = -1;
        reason_[v] = kNoReason;
        heap_insert(v);
    }
    trail_.resize(trail_lim_[level]);
    trail_lim_.resize(level);
    qhead_ = trail_.size();
}

Lit SatSolver::pick_branch() {
    while (!heap_.empty()) {
        const int v = heap_pop();
        if (assigns_[v] < 0) return phase_[v] ? v : -v;
    }
    return 0;
}

void SatSolver::reduce_db() {
    std::vector<ClauseRef> learnts;
    for (ClauseRef i = 0; i < clauses_.size(); ++i)
        if (clauses_[i].learnt && !clauses_[i].deleted && clauses_[i].lits.size() > 2) learnts.push_back(i);
    std::sort(learnts.begin(), learnts.end(),
              [&](ClauseRef a, ClauseRef b) { return clauses_[a].activity < clauses_[b].activity; });
    auto locked = [&](ClauseRef cr) {
        const Lit l = clauses_[cr].lits[0];
        return lit_value(l) == 1 && reason_[std::abs(l)] == cr;
    };
    for (std::size_t k = 0; k < learnts.size() / 2; ++k) {
        if (locked(learnts[k])) continue;
        Clause& c = clauses_[learnts[k]];
        c.deleted = true;
        c.lits.clear();
        c.lits.shrink_to_fit();
        --num_learnts_;
        ++stats_.removed;
    }
    for (auto& ws : watches_)
        ws.erase(std::remove_if(ws.begin(), ws.end(), [&](const Watch& w) { return clauses_[w.cref].deleted; }),
                 ws.end());
}

SatStatus SatSolver::solve(const SatLimits& limits) {
    unknown_cause_ = "";
    if (!ok_) return SatStatus::Unsat;
    backtrack(0);
    if (propagate() != kNoReason) {
        ok_ = false;
        return SatStatus::Unsat;
    }
    const std::uint64_t start_conflicts = stats_.conflicts;
    double max_learnts = std::max<double>(clauses_.size() / 3.0, 2000.0);
    std::vector<Lit> learnt;
    for (int restart = 0;; ++restart) {
        const auto budget = static_cast<std::uint64_t>(luby(2.0, restart) * 100);
        std::uint64_t here = 0;
        for (;;) {
            const ClauseRef confl = propagate();
            if (confl != kNoReason) {
                ++stats_.conflicts;
                ++here;
                if (decision_level() == 0) {
                    ok_ = false;
                    return SatStatus::Unsat;
                }
                int bt = 0;
                analyze(confl, learnt, bt);
                backtrack(bt);
                if (learnt.size() == 1) {
                    assign(learnt[0], kNoReason);
                } else {
                    clauses_.push_back(Clause{learnt, true, false, 0});
                    const auto cr = static_cast<ClauseRef>(clauses_.size() - 1);
                    attach(cr);
                    bump_clause(clauses_[cr]);
                    assign(learnt[0], cr);
                    ++num_learnts_;
                    ++stats_.learnts;
                }
                var_inc_ /= 0.95;
                cla_inc_ /= 0.999;
                if (limits.max_conflicts && stats_.conflicts - start_conflicts >= limits.max_conflicts) {
                    unknown_cause_ = "conflicts";
                    backtrack(0);
                    return SatStatus::Unknown;
                }
                if (limits.deadline && (stats_.conflicts & 63) == 0 &&
                    std::chrono::steady_clock::now() >= *limits.deadline) {
                    unknown_cause_ = "time";
                    backtrack(0);
                    return SatStatus::Unknown;
                }
                continue;
            }
            if (here >= budget) {
                ++stats_.restarts;
                backtrack(0);
                if (static_cast<double>(num_learnts_) >= max_learnts) {
                    reduce_db();
                    max_learnts *= 1.1;
                }
                break;
            }
            if (limits.deadline && (stats_.decisions & 4095) == 0 &&
                std::chrono::steady_clock::now() >= *limits.deadline) {
                unknown_cause_ = "time";
                backtrack(0);
                return SatStatus::Unknown;
            }
            const Lit next = pick_branch();
            if (next == 0) {
                model_.assign(assigns_.begin(), assigns_.end());
                backtrack(0);
                return SatStatus::Sat;
            }
            ++stats_.decisions;
            trail_lim_.push_back(trail_.size());
            assign(next, kNoReason);
        }
    }
}

bool SatSolver::value(Lit l) const {
    const auto v = static_cast<std::size_t>(std::abs(l));
    const bool t = v < model_.size() && model_[v] == 1;
    return l > 0 ? t : !t;
}

void SatSolver::heap_insert(int v) {
    if (heap_pos_[v] >= 0) return;
    heap_pos_[v] = static_cast<int>(heap_.size());
    heap_.push_back(v);
    heap_up(heap_.size() - 1);
}

void SatSolver::heap_up(std::size_t i) {
    const int v = heap_[i];
    while (i > 0) {
        const std::size_t parent = (i - 1) / 2;
        if (!heap_less(v, heap_[parent])) break;
        heap_[i] = heap_[parent];
        heap_pos_[heap_[i]] = static_cast<int>(i);
        i = parent;
    }
    heap_[i] = v;
    heap_pos_[v] = static_cast<int>(i);
}

void SatSolver::heap_down(std::size_t i) {
    const int v = heap_[i];
    for (;;) {
        std::size_t child = 2 * i + 1;
        if (child >= heap_.size()) break;
        if (child + 1 < heap_.size() && heap_less(heap_[child + 1], heap_[child])) ++child;
        if (!heap_less(heap_[child], v)) break;
        heap_[i] = heap_[child];
        heap_pos_[heap_[i]] = static_cast<int>(i);
        i = child;
    }
    heap_[i] = v;
    heap_pos_[v] = static_cast<int>(i);
}

int SatSolver::heap_pop() {
    const int top = heap_.front();
    heap_pos_[top] = -1;
    heap_.front() = heap_.back();
    heap_.pop_back();
    if (!heap_.empty()) {
        heap_pos_[heap_.front()] = 0;
        heap_down(0);
    }
    return top;
}

} // namespace aqed
