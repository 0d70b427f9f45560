#include "aqed/terms.hpp"

#include "aqed/error.hpp"

#include <utility>

namespace aqed {

std::size_t TermManager::KeyHash::operator()(const Key& k) const noexcept {
    std::size_t h = static_cast<std::size_t>(k.op) * 0x9e3779b97f4a7c15ULL;
    auto mix = [&h](std::uint64_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
    mix(k.width);
    mix(k.a);
    mix(k.b);
    mix(k.c);
    mix(k.value);
    return h;
}

Word eval_term_op(TermOp op, unsigned width, Word a, Word b, Word c, unsigned operand_width) {
    const Word mask = width_mask(width);
    switch (op) {
    case TermOp::Not: return ~a & mask;
    case TermOp::Neg: return (Word{0} - a) & mask;
    case TermOp::Add: return (a + b) & mask;
    case TermOp::Sub: return (a - b) & mask;
    case TermOp::Mul: return (a * b) & mask;
    case TermOp::And: return a & b;
    case TermOp::Or: return a | b;
    case TermOp::Xor: return a ^ b;
    case TermOp::Shl: return b >= width ? 0 : (a << b) & mask;
    case TermOp::Lshr: return b >= width ? 0 : a >> b;
    case TermOp::Eq: return a == b;
    case TermOp::Ult: return a < b;
    case TermOp::Ule: return a <= b;
    case TermOp::Ite: return a ? b : c;
    case TermOp::Trunc: return a & mask;
    case TermOp::Zext: return a & width_mask(operand_width);
    default: break;
    }
    throw Error(ErrorKind::Internal, "eval_term_op on a leaf");
}

TermId TermManager::make(TermOp op, unsigned width, TermId a, TermId b, TermId c, Word value) {
    Key k{op, width, a, b, c, value};
    auto it = table_.find(k);
    if (it != table_.end()) return it->second;
    TermId id = static_cast<TermId>(terms_.size());
    terms_.push_back(Term{op, width, a, b, c, value});
    table_.emplace(k, id);
    return id;
}

TermId TermManager::constant(Word v, unsigned width) {
    if (width == 0 || width > 64) throw Error(ErrorKind::Internal, "bad term width");
    return make(TermOp::Const, width, kNone, kNone, kNone, v & width_mask(width));
}

TermId TermManager::var(const std::string& name, unsigned width) {
    if (width == 0 || width > 64) throw Error(ErrorKind::Internal, "bad term width");
    TermId id = static_cast<TermId>(terms_.size());
    terms_.push_back(Term{TermOp::Var, width, kNone, kNone, kNone, vars_.size()});
    vars_.push_back(TermVar{name, width, id});
    return id;
}

TermId TermManager::mk_not(TermId a) {
    const Term& t = get(a);
    if (t.op == TermOp::Const) return constant(~t.value, t.width);
    if (t.op == TermOp::Not) return t.a;
    return make(TermOp::Not, t.width, a);
}

TermId TermManager::neg(TermId a) {
    const Term& t = get(a);
    if (t.op == TermOp::Const) return constant(Word{0} - t.value, t.width);
    return make(TermOp::Neg, t.width, a);
}

TermId TermManager::binary(TermOp op, TermId a, TermId b) {
    if (width(a) != width(b)) throw Error(ErrorKind::Internal, "term width mismatch");
    const unsigned w = width(a);
    const bool ca = is_const(a), cb = is_const(b);
    const bool cmp = op == TermOp::Eq || op == TermOp::Ult || op == TermOp::Ule;
    if (ca && cb) return constant(eval_term_op(op, w, const_value(a), const_value(b), 0, w), cmp ? 1 : w);
    const bool commutative = op == TermOp::Add || op == TermOp::Mul || op == TermOp::And || op == TermOp::Or ||
                             op == TermOp::Xor || op == TermOp::Eq;
    if (commutative && (ca || (!cb && a > b))) std::swap(a, b);
    const bool kb = is_const(b);
    const Word vb = kb ? const_value(b) : 0;
    const Word ones = width_mask(w);
    switch (op) {
    case TermOp::Add:
    case TermOp::Or:
    case TermOp::Xor:
        if (kb && vb == 0) return a;
        if (op == TermOp::Or && kb && vb == ones) return b;
        if (op == TermOp::Or && a == b) return a;
        if (op == TermOp::Xor && a == b) return constant(0, w);
        break;
    case TermOp::Sub:
        if (kb && vb == 0) return a;
        if (a == b) return constant(0, w);
        break;
    case TermOp::Mul:
        if (kb && vb == 0) return b;
        if (kb && vb == 1) return a;
        break;
    case TermOp::And:
        if (kb && vb == 0) return b;
        if (kb && vb == ones) return a;
        if (a == b) return a;
        break;
    case TermOp::Shl:
    case TermOp::Lshr:
        if (kb && vb == 0) return a;
        if (kb && vb >= w) return constant(0, w);
        break;
    case TermOp::Eq:
        if (a == b) return tru();
        if (w == 1 && kb) return vb ? a : mk_not(a);
        break;
    case TermOp::Ult:
        if (a == b) return fls();
        if (kb && vb == 0) return fls();
        break;
    case TermOp::Ule:
        if (a == b) return tru();
        if (kb && vb == ones) return tru();
        break;
    default: break;
    }
    return make(op, cmp ? 1 : w, a, b);
}

TermId TermManager::add(TermId a, TermId b) { return binary(TermOp::Add, a, b); }
TermId TermManager::sub(TermId a, TermId b) { return binary(TermOp::Sub, a, b); }
TermId TermManager::mul(TermId a, TermId b) { return binary(TermOp::Mul, a, b); }
TermId TermManager::band(TermId a, TermId b) { return binary(TermOp::And, a, b); }
TermId TermManager::bor(TermId a, TermId b) { return binary(TermOp::Or, a, b); }
TermId TermManager::bxor(TermId a, TermId b) { return binary(TermOp::Xor, a, b); }
TermId TermManager::shl(TermId a, TermId b) { return binary(TermOp::Shl, a, b); }
TermId TermManager::lshr(TermId a, TermId b) { return binary(TermOp::Lshr, a, b); }
TermId TermManager::eq(TermId a, TermId b) { return binary(TermOp::Eq, a, b); }
TermId TermManager::ult(TermId a, TermId b) { return binary(TermOp::Ult, a, b); }
TermId TermManager::ule(TermId a, TermId b) { return binary(TermOp::Ule, a, b); }

TermId TermManager::ite(TermId c, TermId t, TermId e) {
    if (width(c) != 1 || width(t) != width(e)) throw Error(ErrorKind::Internal, "ite width mismatch");
    if (is_const(c)) return const_value(c) ? t : e;
    if (t == e) return t;
    if (width(t) == 1 && is_const(t) && is_const(e)) return const_value(t) ? c : mk_not(c);
    if (get(c).op == TermOp::Not) return ite(get(c).a, e, t);
    return make(TermOp::Ite, width(t), c, t, e);
}

TermId TermManager::resize(TermId a, unsigned w) {
    const unsigned aw = width(a);
    if (aw == w) return a;
    if (is_const(a)) return constant(const_value(a), w);
    if (w < aw) {
        const Term& t = get(a);
        if (t.op == TermOp::Zext && width(t.a) <= w) return resize(t.a, w);
        return make(TermOp::Trunc, w, a);
    }
    const Term& t = get(a);
    if (t.op == TermOp::Zext) return make(TermOp::Zext, w, t.a);
    return make(TermOp::Zext, w, a);
}

TermId TermManager::nonzero(TermId a) {
    if (width(a) == 1) return a;
    return mk_not(eq(a, constant(0, width(a))));
}

Word TermManager::eval(TermId root, const std::vector<Word>& assignment) const {
    std::vector<Word> memo(root + 1, 0);
    std::vector<char> done(root + 1, 0);
    std::vector<TermId> stack{root};
    while (!stack.empty()) {
        TermId t = stack.back();
        if (done[t]) {
            stack.pop_back();
            continue;
        }
        const Term& n = terms_[t];
        bool ready = true;
        for (TermId k : {n.a, n.b, n.c})
            if (k != kNone && !done[k]) {
                stack.push_back(k);
                ready = false;
            }
        if (!ready) continue;
        stack.pop_back();
        switch (n.op) {
        case TermOp::Const: memo[t] = n.value; break;
        case TermOp::Var: memo[t] = assignment.at(n.value) & width_mask(n.width); break;
        default:
            memo[t] = eval_term_op(n.op, n.width, memo[n.a], n.b != kNone ? memo[n.b] : 0,
                                   n.c != kNone ? memo[n.c] : 0, n.a != kNone ? terms_[n.a].width : 0);
        }
        done[t] = 1;
    }
    return memo[root];
}

} // namespace aqed
