#include "aqed/ssa.hpp"

#include "aqed/error.hpp"
#include "ssa_builder.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace aqed {

bool SsaProgram::has_loops() const {
    return std::any_of(code.begin(), code.end(), [](const Instr& i) { return i.op == Opcode::LoopHead; });
}

std::string SsaProgram::dump() const {
    std::ostringstream os;
    auto val = [&](std::uint32_t v) { return v == kNone ? std::string("_") : values.at(v).name; };
    auto cell = [&](std::uint32_t c) { return c == kNone ? std::string("_") : cells.at(c).name; };
    for (std::size_t pc = 0; pc < code.size(); ++pc) {
        const Instr& in = code[pc];
        os << pc << ": ";
        if (in.dst != kNone) os << val(in.dst) << " = ";
        os << opcode_name(in.op);
        switch (in.op) {
        case Opcode::Nop: break;
        case Opcode::Const: os << ' ' << in.imm; break;
        case Opcode::Load: os << ' ' << cell(in.base); break;
        case Opcode::LoadIdx: os << ' ' << cell(in.base) << ", " << val(in.a) << ", " << in.count; break;
        case Opcode::Store: os << ' ' << cell(in.base) << ", " << val(in.a); break;
        case Opcode::StoreIdx:
            os << ' ' << cell(in.base) << ", " << val(in.b) << ", " << in.count << ", " << val(in.a);
            break;
        case Opcode::Select: os << ' ' << val(in.a) << ", " << val(in.b) << ", " << val(in.c); break;
        case Opcode::LoopHead: os << ' ' << val(in.a) << " -> " << in.imm; break;
        case Opcode::LoopBack: os << " -> " << in.imm; break;
        case Opcode::Permute: os << ' ' << in.imm; break;
        default:
            os << ' ' << val(in.a);
            if (in.b != kNone) os << ", " << val(in.b);
            break;
        }
        os << " ; L" << in.line << '\n';
    }
    return os.str();
}

Program to_model_program(const SsaProgram& ssa, CellId value_base) {
    Program p;
    p.code = ssa.code;
    auto map = [&](std::uint32_t& v) {
        if (v != kNone) v += value_base;
    };
    for (Instr& in : p.code) {
        map(in.dst);
        map(in.a);
        if (in.op != Opcode::LoopBack) map(in.b);  // b of a back edge is a pc
        map(in.c);
    }
    return p;
}

std::vector<Word> interpret_ssa(const SsaProgram& ssa, std::vector<Word>& storage, std::size_t step_budget) {
    std::vector<Word> v(ssa.values.size(), 0);
    std::size_t pc = 0, steps = 0;
    while (pc < ssa.code.size()) {
        if (steps++ == step_budget) throw Error(ErrorKind::StepBudgetExceeded, "SSA interpreter step budget exhausted");
        const Instr& in = ssa.code[pc];
        const Word mask = width_mask(in.width);
        std::size_t next = pc + 1;
        switch (in.op) {
        case Opcode::Nop: break;
        case Opcode::Const: v[in.dst] = in.imm & mask; break;
        case Opcode::Load: v[in.dst] = storage[in.base]; break;
        case Opcode::LoadIdx: v[in.dst] = v[in.a] < in.count ? storage[in.base + v[in.a]] : 0; break;
        case Opcode::Store: storage[in.base] = v[in.a] & width_mask(ssa.cells[in.base].width); break;
        case Opcode::StoreIdx:
            if (v[in.b] < in.count) {
                CellId c = static_cast<CellId>(in.base + v[in.b]);
                storage[c] = v[in.a] & width_mask(ssa.cells[c].width);
            }
            break;
        case Opcode::Resize: v[in.dst] = v[in.a] & mask; break;
        case Opcode::Not: v[in.dst] = ~v[in.a] & mask; break;
        case Opcode::Neg: v[in.dst] = (Word{0} - v[in.a]) & mask; break;
        case Opcode::Add: v[in.dst] = (v[in.a] + v[in.b]) & mask; break;
        case Opcode::Sub: v[in.dst] = (v[in.a] - v[in.b]) & mask; break;
        case Opcode::Mul: v[in.dst] = (v[in.a] * v[in.b]) & mask; break;
        case Opcode::And: v[in.dst] = v[in.a] & v[in.b] & mask; break;
        case Opcode::Or: v[in.dst] = (v[in.a] | v[in.b]) & mask; break;
        case Opcode::Xor: v[in.dst] = (v[in.a] ^ v[in.b]) & mask; break;
        case Opcode::Shl: v[in.dst] = v[in.b] >= in.width ? 0 : (v[in.a] << v[in.b]) & mask; break;
        case Opcode::Lshr: v[in.dst] = v[in.b] >= 64 ? 0 : (v[in.a] >> v[in.b]) & mask; break;
        case Opcode::Eq: v[in.dst] = v[in.a] == v[in.b]; break;
        case Opcode::Ne: v[in.dst] = v[in.a] != v[in.b]; break;
        case Opcode::Ult: v[in.dst] = v[in.a] < v[in.b]; break;
        case Opcode::Ule: v[in.dst] = v[in.a] <= v[in.b]; break;
        case Opcode::Select: v[in.dst] = (v[in.a] != 0 ? v[in.b] : v[in.c]) & mask; break;
        case Opcode::LoopHead:
            if (v[in.a] == 0) next = static_cast<std::size_t>(in.imm);
            break;
        case Opcode::LoopBack: next = static_cast<std::size_t>(in.imm); break;
        case Opcode::Permute: throw Error(ErrorKind::Internal, "permute in SSA program");
        }
        pc = next;
    }
    return v;
}

namespace detail {

namespace {

bool is_cmp(Opcode op) { return op == Opcode::Eq || op == Opcode::Ne || op == Opcode::Ult || op == Opcode::Ule; }

const Stmt* find_block_stmt(const std::vector<Stmt>& body, int block) {
    for (const auto& s : body) {
        if (s.kind == StmtKind::Block && s.block == block) return &s;
        if (const Stmt* r = find_block_stmt(s.body, block)) return r;
    }
    return nullptr;
}

} // namespace

SsaBuilder::SsaBuilder(const AbkProgram& prog, SsaProgram& out) : prog_(prog), out_(out) {
    if (out_.cells.empty()) out_.cells = prog.cells;
    version_.assign(out_.cells.size(), 0);
}

void SsaBuilder::check_cap() const {
    if (out_.code.size() > prog_.unroll_cap)
        throw Error(ErrorKind::UnrollCap,
                    "unrolled program exceeds " + std::to_string(prog_.unroll_cap) + " instructions");
}

std::uint32_t SsaBuilder::new_value(const std::string& name, unsigned width) {
    out_.values.push_back(SsaValueInfo{name, width, out_.code.size()});
    return static_cast<std::uint32_t>(out_.values.size() - 1);
}

std::uint32_t SsaBuilder::emit(Instr in, unsigned value_width) {
    std::uint32_t id = kNone;
    if (value_width > 0) {
        id = new_value("t." + std::to_string(temp_counter_++), value_width);
        in.dst = id;
    }
    out_.code.push_back(in);
    check_cap();
    return id;
}

Operand SsaBuilder::value_of(std::uint32_t id) const { return Operand{false, 0, id, out_.values[id].width}; }

std::uint32_t SsaBuilder::materialize(const Operand& o, unsigned width, int line) {
    if (!o.konst) return o.id;
    Instr in;
    in.op = Opcode::Const;
    in.imm = o.v & width_mask(width);
    in.width = width;
    in.line = line;
    return emit(in, width);
}

std::uint32_t SsaBuilder::load_port(CellId port, int line) {
    Instr in;
    in.op = Opcode::Load;
    in.base = port;
    in.width = out_.cells[port].width;
    in.line = line;
    std::uint32_t id = emit(in, in.width);
    out_.values[id].name = out_.cells[port].name + "." + std::to_string(version_[port]++);
    return id;
}

void SsaBuilder::store_port(CellId port, std::uint32_t value, int line) {
    Instr in;
    in.op = Opcode::Store;
    in.base = port;
    in.a = value;
    in.width = out_.cells[port].width;
    in.line = line;
    emit(in, 0);
}

std::uint32_t SsaBuilder::read_cell(CellId c, int line) {
    if (auto it = cache_.find(c); it != cache_.end()) return it->second.value;
    std::uint32_t id = load_port(c, line);
    cache_[c] = Entry{id, false};
    return id;
}

void SsaBuilder::write_cell(CellId c, const Operand& value, int line) {
    const unsigned cw = out_.cells[c].width;
    std::uint32_t id;
    if (value.konst) {
        id = materialize(value, cw, line);
    } else if (value.w != cw) {
        Instr in;
        in.op = Opcode::Resize;
        in.a = value.id;
        in.width = cw;
        in.line = line;
        id = emit(in, cw);
    } else {
        id = value.id;
    }
    if (out_.values[id].name.rfind("t.", 0) == 0)
        out_.values[id].name = out_.cells[c].name + "." + std::to_string(version_[c]++);
    cache_[c] = Entry{id, true};
}

void SsaBuilder::flush(int line) {
    for (auto& [c, e] : cache_) {
        if (!e.dirty) continue;
        store_port(c, e.value, line);
        e.dirty = false;
    }
}

void SsaBuilder::flush_range(CellId base, std::size_t count, int line) {
    for (auto it = cache_.lower_bound(base); it != cache_.end() && it->first < base + count; ++it) {
        if (!it->second.dirty) continue;
        store_port(it->first, it->second.value, line);
        it->second.dirty = false;
    }
}

void SsaBuilder::invalidate_range(CellId base, std::size_t count) {
    cache_.erase(cache_.lower_bound(base), cache_.lower_bound(static_cast<CellId>(base + count)));
}

void SsaBuilder::finish(int line) {
    flush(line);
    std::set<CellId> stored, inputs;
    for (const Instr& in : out_.code) {
        if (in.op == Opcode::Load && !stored.count(in.base)) inputs.insert(in.base);
        if (in.op == Opcode::LoadIdx)
            for (std::uint32_t k = 0; k < in.count; ++k)
                if (!stored.count(in.base + k)) inputs.insert(in.base + k);
        if (in.op == Opcode::Store) stored.insert(in.base);
        if (in.op == Opcode::StoreIdx)
            for (std::uint32_t k = 0; k < in.count; ++k) stored.insert(in.base + k);
    }
    out_.input_cells.assign(inputs.begin(), inputs.end());
    out_.output_cells.assign(stored.begin(), stored.end());
}

void SsaBuilder::exec_block(int block) {
    const Stmt* s = find_block_stmt(prog_.body, block);
    if (!s) throw Error(ErrorKind::Config, "no such block");
    exec_list(s->body, {});
}

void SsaBuilder::exec_body() { exec_list(prog_.body, {}); }

void SsaBuilder::exec_list(const std::vector<Stmt>& list, const Env& env) {
    for (const auto& s : list) exec(s, env);
}

void SsaBuilder::exec(const Stmt& s, const Env& env) {
    switch (s.kind) {
    case StmtKind::Block:
        if (prog_.blocks[s.block].is_spec) return;
        exec_list(s.body, env);
        return;
    case StmtKind::Assign: assign(s, env); return;
    case StmtKind::While: exec_while(s, env); return;
    case StmtKind::For: {
        Operand lo = eval(*s.lo, env);
        Operand hi = eval(*s.hi, env);
        if (!lo.konst || !hi.konst) {
            if (!prog_.rb_mode)
                throw SourceError(ErrorKind::Bound, s.line, 1, "for-loop bounds must be constant outside RB mode");
            exec_dynamic_for(s, env, lo, hi);
            return;
        }
        for (Word j = lo.v; j < hi.v; ++j) {
            Env inner = env;
            inner[s.var] = Binding{Operand{true, j, kNone, constant_width(j)}, std::nullopt};
            exec_list(s.body, inner);
        }
        return;
    }
    }
}

void SsaBuilder::exec_while(const Stmt& s, const Env& env) {
    flush(s.line);
    cache_.clear();
    if (out_.code.empty()) {
        Instr nop;
        nop.line = s.line;
        emit(nop, 0);
    }
    const std::size_t start = out_.code.size();
    Operand c = eval(*s.value, env);
    Instr head;
    head.op = Opcode::LoopHead;
    head.a = materialize(c, c.w, s.line);
    head.line = s.line;
    const std::size_t head_pc = out_.code.size();
    emit(head, 0);
    exec_list(s.body, env);
    flush(s.line);
    cache_.clear();
    Instr back;
    back.op = Opcode::LoopBack;
    back.imm = start;
    back.b = static_cast<std::uint32_t>(head_pc);
    back.line = s.line;
    emit(back, 0);
    out_.code[head_pc].imm = out_.code.size();
}

void SsaBuilder::exec_dynamic_for(const Stmt& s, const Env& env, const Operand& lo, const Operand& hi) {
    const std::string tag = s.var + "#" + std::to_string(hidden_counter_++);
    const CellId jcell = static_cast<CellId>(out_.cells.size());
    out_.cells.push_back(CellInfo{tag, 32, Region::NonRelevant, CellKind::Storage});
    const CellId hcell = static_cast<CellId>(out_.cells.size());
    out_.cells.push_back(CellInfo{tag + ".hi", 32, Region::NonRelevant, CellKind::Storage});
    version_.resize(out_.cells.size(), 0);
    write_cell(jcell, lo, s.line);
    write_cell(hcell, hi, s.line);
    flush(s.line);
    cache_.clear();
    const std::size_t start = out_.code.size();
    Operand j = value_of(read_cell(jcell, s.line));
    Operand h = value_of(read_cell(hcell, s.line));
    Operand c = binary("<", j, h, s.line, 1);
    Instr head;
    head.op = Opcode::LoopHead;
    head.a = c.id;
    head.line = s.line;
    const std::size_t head_pc = out_.code.size();
    emit(head, 0);
    Env inner = env;
    inner[s.var] = Binding{Operand{}, jcell};
    exec_list(s.body, inner);
    Operand cur = value_of(read_cell(jcell, s.line));
    write_cell(jcell, binary("+", cur, Operand{true, 1, kNone, 1}, s.line, 1), s.line);
    flush(s.line);
    cache_.clear();
    Instr back;
    back.op = Opcode::LoopBack;
    back.imm = start;
    back.b = static_cast<std::uint32_t>(head_pc);
    back.line = s.line;
    emit(back, 0);
    out_.code[head_pc].imm = out_.code.size();
}

void SsaBuilder::assign(const Stmt& s, const Env& env) {
    const Expr& t = *s.target;
    const VarDecl* var = prog_.find_var(t.name);
    if (t.index.size() != var->dims.size())
        throw SourceError(ErrorKind::Syntax, t.line, t.column,
                          "'" + var->name + "' expects " + std::to_string(var->dims.size()) + " subscript(s)");
    Operand value = eval(*s.value, env);
    std::vector<Operand> idx;
    bool all_const = true;
    for (const auto& i : t.index) {
        idx.push_back(eval(*i, env));
        all_const = all_const && idx.back().konst;
    }
    if (all_const) {
        std::size_t flat = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k].v >= var->dims[k]) {
                std::string msg = "line " + std::to_string(t.line) + ": out-of-bounds write to '" + t.name + "' dropped";
                if (std::find(out_.diagnostics.begin(), out_.diagnostics.end(), msg) == out_.diagnostics.end())
                    out_.diagnostics.push_back(msg);
                return;
            }
            flat = flat * var->dims[k] + static_cast<std::size_t>(idx[k].v);
        }
        write_cell(static_cast<CellId>(var->first_cell + flat), value, s.line);
        return;
    }
    Operand fi = flat_index(t, idx, *var);
    const std::size_t count = var->cell_count();
    flush_range(var->first_cell, count, s.line);
    Instr st;
    st.op = Opcode::StoreIdx;
    st.a = materialize(value, var->width, s.line);
    st.b = materialize(fi, fi.w, s.line);
    st.base = var->first_cell;
    st.count = static_cast<std::uint32_t>(count);
    st.width = var->width;
    st.line = s.line;
    emit(st, 0);
    invalidate_range(var->first_cell, count);
}

Operand SsaBuilder::eval(const Expr& e, const Env& env) {
    switch (e.kind) {
    case ExprKind::Number: return Operand{true, e.value, kNone, constant_width(e.value)};
    case ExprKind::Ref: return ref(e, env);
    case ExprKind::Unary: {
        Operand a = eval(*e.lhs, env);
        if (e.op == "!") {
            if (a.konst) return Operand{true, a.v == 0 ? Word{1} : Word{0}, kNone, 1};
            return binary("==", a, Operand{true, 0, kNone, 1}, e.line, e.column);
        }
        if (a.konst) {
            Word r = e.op == "-" ? Word{0} - a.v : ~a.v;
            return Operand{true, r, kNone, constant_width(r)};
        }
        Instr in;
        in.op = e.op == "-" ? Opcode::Neg : Opcode::Not;
        in.a = a.id;
        in.width = a.w;
        in.line = e.line;
        return value_of(emit(in, a.w));
    }
    case ExprKind::Binary: {
        Operand a = eval(*e.lhs, env);
        Operand b = eval(*e.rhs, env);
        return binary(e.op, a, b, e.line, e.column);
    }
    case ExprKind::Ternary: {
        Operand c = eval(*e.lhs, env);
        if (c.konst) return c.v != 0 ? eval(*e.rhs, env) : eval(*e.third, env);
        Operand a = eval(*e.rhs, env);
        Operand b = eval(*e.third, env);
        const unsigned w = std::max(a.w, b.w);
        Instr in;
        in.op = Opcode::Select;
        in.a = c.id;
        in.b = materialize(a, w, e.line);
        in.c = materialize(b, w, e.line);
        in.width = w;
        in.line = e.line;
        return value_of(emit(in, w));
    }
    }
    return {};
}

Operand SsaBuilder::to_bool(const Operand& a, int line) {
    if (a.konst) return Operand{true, a.v != 0 ? Word{1} : Word{0}, kNone, 1};
    return binary("!=", a, Operand{true, 0, kNone, 1}, line, 1);
}

Operand SsaBuilder::binary(const std::string& op, const Operand& a, const Operand& b, int line, int col) {
    if (a.konst && b.konst) {
        Word r = fold_binary_op(op, a.v, b.v, line, col);
        return Operand{true, r, kNone, constant_width(r)};
    }
    if (op == "/" || op == "%")
        throw SourceError(ErrorKind::Syntax, line, col, "operator '" + op + "' requires constant operands");
    if (op == "&&" || op == "||") {
        Operand x = to_bool(a, line), y = to_bool(b, line);
        Instr in;
        in.op = op == "&&" ? Opcode::And : Opcode::Or;
        in.a = materialize(x, 1, line);
        in.b = materialize(y, 1, line);
        in.width = 1;
        in.line = line;
        return value_of(emit(in, 1));
    }
    const unsigned w = std::max(a.w, b.w);
    Operand x = a, y = b;
    Opcode code;
    if (op == "+") code = Opcode::Add;
    else if (op == "-") code = Opcode::Sub;
    else if (op == "*") code = Opcode::Mul;
    else if (op == "&") code = Opcode::And;
    else if (op == "|") code = Opcode::Or;
    else if (op == "^") code = Opcode::Xor;
    else if (op == "<<") code = Opcode::Shl;
    else if (op == ">>") code = Opcode::Lshr;
    else if (op == "==") code = Opcode::Eq;
    else if (op == "!=") code = Opcode::Ne;
    else if (op == "<") code = Opcode::Ult;
    else if (op == "<=") code = Opcode::Ule;
    else if (op == ">") {
        code = Opcode::Ult;
        std::swap(x, y);
    } else if (op == ">=") {
        code = Opcode::Ule;
        std::swap(x, y);
    } else {
        throw SourceError(ErrorKind::Syntax, line, col, "unknown operator '" + op + "'");
    }
    Instr in;
    in.op = code;
    in.a = materialize(x, w, line);
    in.b = materialize(y, w, line);
    in.width = w;
    in.line = line;
    return value_of(emit(in, is_cmp(code) ? 1 : w));
}

Operand SsaBuilder::ref(const Expr& e, const Env& env) {
    if (e.index.empty()) {
        if (auto it = env.find(e.name); it != env.end()) {
            if (it->second.cell) return value_of(read_cell(*it->second.cell, e.line));
            return it->second.value;
        }
        if (auto it = prog_.constants.find(e.name); it != prog_.constants.end())
            return Operand{true, it->second, kNone, constant_width(it->second)};
    }
    const VarDecl* var = prog_.find_var(e.name);
    if (!var) throw SourceError(ErrorKind::Syntax, e.line, e.column, "unknown name '" + e.name + "'");
    if (e.index.size() != var->dims.size())
        throw SourceError(ErrorKind::Syntax, e.line, e.column,
                          "'" + var->name + "' expects " + std::to_string(var->dims.size()) + " subscript(s)");
    std::vector<Operand> idx;
    bool all_const = true;
    for (const auto& i : e.index) {
        idx.push_back(eval(*i, env));
        all_const = all_const && idx.back().konst;
    }
    if (all_const) {
        std::size_t flat = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k].v >= var->dims[k]) {
                std::string msg = "line " + std::to_string(e.line) + ": out-of-bounds read of '" + e.name + "' yields 0";
                if (std::find(out_.diagnostics.begin(), out_.diagnostics.end(), msg) == out_.diagnostics.end())
                    out_.diagnostics.push_back(msg);
                return value_of(materialize(Operand{true, 0, kNone, 1}, var->width, e.line));
            }
            flat = flat * var->dims[k] + static_cast<std::size_t>(idx[k].v);
        }
        return value_of(read_cell(static_cast<CellId>(var->first_cell + flat), e.line));
    }
    Operand fi = flat_index(e, idx, *var);
    const std::size_t count = var->cell_count();
    flush_range(var->first_cell, count, e.line);
    Instr in;
    in.op = Opcode::LoadIdx;
    in.a = materialize(fi, fi.w, e.line);
    in.base = var->first_cell;
    in.count = static_cast<std::uint32_t>(count);
    in.width = var->width;
    in.line = e.line;
    return value_of(emit(in, var->width));
}

Operand SsaBuilder::flat_index(const Expr& e, const std::vector<Operand>& idx, const VarDecl& var) {
    const std::size_t count = var.cell_count();
    if (idx.size() == 1) return idx[0];
    for (std::size_t k = 0; k < idx.size(); ++k)
        if (idx[k].konst && idx[k].v >= var.dims[k]) return Operand{true, count, kNone, constant_width(count)};
    Operand ok{true, 1, kNone, 1};
    Operand flat{true, 0, kNone, 1};
    auto resize32 = [&](const Operand& o) {
        if (o.konst || o.w == 32) return o;
        Instr in;
        in.op = Opcode::Resize;
        in.a = o.id;
        in.width = 32;
        in.line = e.line;
        return value_of(emit(in, 32));
    };
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (!idx[k].konst) {
            Operand in_range = binary("<", idx[k], Operand{true, var.dims[k], kNone, constant_width(var.dims[k])},
                                      e.line, e.column);
            ok = ok.konst ? in_range : binary("&", ok, in_range, e.line, e.column);
        }
        Operand scaled = flat.konst && flat.v == 0 ? flat : binary("*", flat, Operand{true, var.dims[k], kNone, 32}, e.line, e.column);
        if (!scaled.konst) scaled = resize32(scaled);
        Operand term = resize32(idx[k]);
        flat = binary("+", scaled, term, e.line, e.column);
        if (!flat.konst) flat = resize32(flat);
    }
    Instr sel;
    sel.op = Opcode::Select;
    sel.a = ok.id;
    sel.b = materialize(flat, 32, e.line);
    sel.c = materialize(Operand{true, count, kNone, 32}, 32, e.line);
    sel.width = 32;
    sel.line = e.line;
    return value_of(emit(sel, 32));
}

} // namespace detail

SsaProgram unroll_and_ssa(const AbkProgram& prog) {
    SsaProgram out;
    detail::SsaBuilder b(prog, out);
    b.exec_body();
    b.finish(prog.body.empty() ? 0 : prog.body.back().line);
    return out;
}

SsaProgram unroll_block(const AbkProgram& prog, int block) {
    SsaProgram out;
    detail::SsaBuilder b(prog, out);
    b.exec_block(block);
    b.finish(prog.blocks.at(block).end_line);
    return out;
}

} // namespace aqed
