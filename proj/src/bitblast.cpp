#include "aqed/bitblast.hpp"

#include "aqed/error.hpp"

#include <ostream>

namespace aqed {

BitBlaster::BitBlaster(const TermManager& tm, Cnf& cnf) : tm_(tm), cnf_(cnf) {
    true_ = cnf_.new_var();
    cnf_.add({true_});
}

Lit BitBlaster::and2(Lit a, Lit b) {
    if (a == false_lit() || b == false_lit() || a == -b) return false_lit();
    if (a == true_lit()) return b;
    if (b == true_lit() || a == b) return a;
    Lit o = cnf_.new_var();
    cnf_.add({-o, a});
    cnf_.add({-o, b});
    cnf_.add({o, -a, -b});
    return o;
}

Lit BitBlaster::xor2(Lit a, Lit b) {
    if (a == false_lit()) return b;
    if (b == false_lit()) return a;
    if (a == true_lit()) return -b;
    if (b == true_lit()) return -a;
    if (a == b) return false_lit();
    if (a == -b) return true_lit();
    Lit o = cnf_.new_var();
    cnf_.add({-o, a, b});
    cnf_.add({-o, -a, -b});
    cnf_.add({o, -a, b});
    cnf_.add({o, a, -b});
    return o;
}

Lit BitBlaster::mux(Lit s, Lit t, Lit e) {
    if (s == true_lit() || t == e) return t;
    if (s == false_lit()) return e;
    if (t == true_lit() && e == false_lit()) return s;
    if (t == false_lit() && e == true_lit()) return -s;
    if (t == true_lit()) return or2(s, e);
    if (t == false_lit()) return and2(-s, e);
    if (e == true_lit()) return or2(-s, t);
    if (e == false_lit()) return and2(s, t);
    Lit o = cnf_.new_var();
    cnf_.add({-s, -t, o});
    cnf_.add({-s, t, -o});
    cnf_.add({s, -e, o});
    cnf_.add({s, e, -o});
    cnf_.add({-t, -e, o});
    cnf_.add({t, e, -o});
    return o;
}

Lit BitBlaster::and_n(const std::vector<Lit>& ls) {
    std::vector<Lit> keep;
    for (Lit l : ls) {
        if (l == false_lit()) return false_lit();
        if (l != true_lit()) keep.push_back(l);
    }
    if (keep.empty()) return true_lit();
    if (keep.size() == 1) return keep[0];
    Lit o = cnf_.new_var();
    std::vector<Lit> big{o};
    for (Lit l : keep) {
        cnf_.add({-o, l});
        big.push_back(-l);
    }
    cnf_.add(std::move(big));
    return o;
}

std::vector<Lit> BitBlaster::adder(const std::vector<Lit>& a, const std::vector<Lit>& b, Lit carry) {
    std::vector<Lit> s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        Lit axb = xor2(a[i], b[i]);
        s[i] = xor2(axb, carry);
        if (i + 1 < a.size()) carry = or2(and2(a[i], b[i]), and2(carry, axb));
    }
    return s;
}

std::vector<Lit> BitBlaster::multiplier(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    const std::size_t w = a.size();
    std::vector<Lit> acc(w, false_lit());
    for (std::size_t i = 0; i < w; ++i) {
        if (b[i] == false_lit()) continue;
        std::vector<Lit> row(w, false_lit());
        for (std::size_t k = i; k < w; ++k) row[k] = and2(a[k - i], b[i]);
        acc = adder(acc, row, false_lit());
    }
    return acc;
}

std::vector<Lit> BitBlaster::shifter(const std::vector<Lit>& a, const std::vector<Lit>& b, bool left) {
    const std::size_t w = a.size();
    std::vector<Lit> cur = a;
    Lit overflow = false_lit();
    for (std::size_t k = 0; k < b.size(); ++k) {
        const std::size_t amount = k < 63 ? (std::size_t{1} << k) : w;
        if (amount >= w) {
            overflow = or2(overflow, b[k]);
            continue;
        }
        std::vector<Lit> next(w);
        for (std::size_t i = 0; i < w; ++i) {
            Lit shifted;
            if (left) shifted = i >= amount ? cur[i - amount] : false_lit();
            else shifted = i + amount < w ? cur[i + amount] : false_lit();
            next[i] = mux(b[k], shifted, cur[i]);
        }
        cur = std::move(next);
    }
    for (auto& l : cur) l = and2(l, -overflow);
    return cur;
}

Lit BitBlaster::less_than(const std::vector<Lit>& a, const std::vector<Lit>& b, bool or_equal) {
    // scan from the least significant bit: lt_i = (!a_i & b_i) | (a_i == b_i & lt_{i-1})
    Lit lt = or_equal ? true_lit() : false_lit();
    for (std::size_t i = 0; i < a.size(); ++i) {
        Lit eq = -xor2(a[i], b[i]);
        lt = or2(and2(-a[i], b[i]), and2(eq, lt));
    }
    return lt;
}

Lit BitBlaster::equal(const std::vector<Lit>& a, const std::vector<Lit>& b) {
    std::vector<Lit> eqs;
    for (std::size_t i = 0; i < a.size(); ++i) eqs.push_back(-xor2(a[i], b[i]));
    return and_n(eqs);
}

void BitBlaster::blast(TermId root) {
    if (cache_.size() < tm_.size()) {
        cache_.resize(tm_.size());
        done_.resize(tm_.size(), 0);
    }
    std::vector<TermId> stack{root};
    while (!stack.empty()) {
        TermId t = stack.back();
        if (done_[t]) {
            stack.pop_back();
            continue;
        }
        const Term& n = tm_.get(t);
        bool ready = true;
        for (TermId k : {n.a, n.b, n.c})
            if (k != kNone && !done_[k]) {
                stack.push_back(k);
                ready = false;
            }
        if (!ready) continue;
        stack.pop_back();
        const unsigned w = n.width;
        std::vector<Lit> r(w);
        auto A = [&]() -> const std::vector<Lit>& { return cache_[n.a]; };
        auto B = [&]() -> const std::vector<Lit>& { return cache_[n.b]; };
        switch (n.op) {
        case TermOp::Const:
            for (unsigned i = 0; i < w; ++i) r[i] = ((n.value >> i) & 1) ? true_lit() : false_lit();
            break;
        case TermOp::Var:
            for (unsigned i = 0; i < w; ++i) r[i] = cnf_.new_var();
            break;
        case TermOp::Not:
            for (unsigned i = 0; i < w; ++i) r[i] = -A()[i];
            break;
        case TermOp::Neg: {
            std::vector<Lit> inv(w), zero(w, false_lit());
            for (unsigned i = 0; i < w; ++i) inv[i] = -A()[i];
            r = adder(inv, zero, true_lit());
            break;
        }
        case TermOp::Add: r = adder(A(), B(), false_lit()); break;
        case TermOp::Sub: {
            std::vector<Lit> inv(w);
            for (unsigned i = 0; i < w; ++i) inv[i] = -B()[i];
            r = adder(A(), inv, true_lit());
            break;
        }
        case TermOp::Mul: r = multiplier(A(), B()); break;
        case TermOp::And:
            for (unsigned i = 0; i < w; ++i) r[i] = and2(A()[i], B()[i]);
            break;
        case TermOp::Or:
            for (unsigned i = 0; i < w; ++i) r[i] = or2(A()[i], B()[i]);
            break;
        case TermOp::Xor:
            for (unsigned i = 0; i < w; ++i) r[i] = xor2(A()[i], B()[i]);
            break;
        case TermOp::Shl: r = shifter(A(), B(), true); break;
        case TermOp::Lshr: r = shifter(A(), B(), false); break;
        case TermOp::Eq: r[0] = equal(A(), B()); break;
        case TermOp::Ult: r[0] = less_than(A(), B(), false); break;
        case TermOp::Ule: r[0] = less_than(A(), B(), true); break;
        case TermOp::Ite: {
            Lit s = cache_[n.a][0];
            for (unsigned i = 0; i < w; ++i) r[i] = mux(s, cache_[n.b][i], cache_[n.c][i]);
            break;
        }
        case TermOp::Trunc:
            for (unsigned i = 0; i < w; ++i) r[i] = A()[i];
            break;
        case TermOp::Zext:
            for (unsigned i = 0; i < w; ++i) r[i] = i < A().size() ? A()[i] : false_lit();
            break;
        }
        cache_[t] = std::move(r);
        done_[t] = 1;
    }
}

const std::vector<Lit>& BitBlaster::bits(TermId t) {
    if (t >= done_.size() || !done_[t]) blast(t);
    return cache_[t];
}

Lit BitBlaster::bit(TermId t) {
    if (tm_.width(t) != 1) throw Error(ErrorKind::Internal, "bit() of a wide term");
    return bits(t)[0];
}

void BitBlaster::assert_true(TermId t) { cnf_.add({bit(t)}); }

void write_dimacs(std::ostream& os, const Cnf& cnf, const TermManager& tm, BitBlaster& bb) {
    os << "c aqed clause export\n";
    os << "c variable 1 is constant true\n";
    os << "c var <name> <width> <literals, least significant bit first>\n";
    for (const auto& v : tm.vars()) {
        if (v.term >= tm.size()) continue;
        os << "c var " << v.name << " " << v.width;
        for (Lit l : bb.bits(v.term)) os << " " << l;
        os << "\n";
    }
    os << "p cnf " << cnf.num_vars << " " << cnf.clauses.size() << "\n";
    for (const auto& c : cnf.clauses) {
        for (Lit l : c) os << l << " ";
        os << "0\n";
    }
}

} // namespace aqed
