#include "aqed/abk.hpp"

#include "aqed/error.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

namespace aqed {

std::size_t VarDecl::cell_count() const {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

unsigned constant_width(Word v) {
    unsigned w = 1;
    while (w < 64 && (v >> w) != 0) ++w;
    return w;
}

namespace {

enum class Tok : std::uint8_t { Ident, Number, Punct, MarkerStart, MarkerEnd, Directive, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::string extra;  // directive value
    Word value = 0;
    int line = 0;
    int column = 0;
};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string strip_comment(std::string_view s) {
    auto pos = s.find("//");
    return trim(pos == std::string_view::npos ? s : s.substr(0, pos));
}

int bracket_balance(std::string_view s) {
    int depth = 0;
    for (char c : s) {
        if (c == '[' || c == '(') ++depth;
        if (c == ']' || c == ')') --depth;
    }
    return depth;
}

class Lexer {
public:
    explicit Lexer(const std::string& text) : src_(text) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            Token t = next();
            out.push_back(t);
            if (t.kind == Tok::End) break;
        }
        return out;
    }

private:
    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    bool line_start_ = true;

    char peek(std::size_t k = 0) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
            line_start_ = true;
        } else {
            ++col_;
        }
        ++pos_;
    }
    std::string read_line() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        return src_.substr(start, pos_ - start);
    }
    [[noreturn]] void fail(const std::string& msg) const { throw SourceError(ErrorKind::Syntax, line_, col_, msg); }

    Token next() {
        for (;;) {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(peek()))) advance();
            if (pos_ >= src_.size()) return Token{Tok::End, "", "", 0, line_, col_};
            if (peek() == '/' && peek(1) == '/') {
                int line = line_, col = col_;
                std::string body = trim(read_line().substr(2));
                if (auto marker = parse_marker(body)) {
                    marker->line = line;
                    marker->column = col;
                    return *marker;
                }
                continue;
            }
            if (peek() == '/' && peek(1) == '*') {
                advance();
                advance();
                while (pos_ < src_.size() && !(peek() == '*' && peek(1) == '/')) advance();
                if (pos_ >= src_.size()) fail("unterminated block comment");
                advance();
                advance();
                continue;
            }
            break;
        }
        const int line = line_, col = col_;
        const bool at_line_start = line_start_;
        line_start_ = false;
        char c = peek();
        if (c == '%' && at_line_start && (std::isupper(static_cast<unsigned char>(peek(1))) || peek(1) == '_')) {
            advance();
            std::string name;
            while (is_ident_char(peek())) {
                name += peek();
                advance();
            }
            std::string value = strip_comment(read_line());
            while ((bracket_balance(value) > 0 || (!value.empty() && value.back() == '=')) && pos_ < src_.size()) {
                advance();  // newline
                value += " " + strip_comment(read_line());
            }
            return Token{Tok::Directive, name, trim(value), 0, line, col};
        }
        if (is_ident_start(c)) {
            std::string id;
            while (is_ident_char(peek())) {
                id += peek();
                advance();
            }
            return Token{Tok::Ident, id, "", 0, line, col};
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string digits;
            int base = 10;
            if (c == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
                base = 16;
                advance();
                advance();
            } else if (c == '0' && (peek(1) == 'b' || peek(1) == 'B')) {
                base = 2;
                advance();
                advance();
            }
            auto digit_ok = [&](char ch) {
                if (base == 16) return std::isxdigit(static_cast<unsigned char>(ch)) != 0;
                if (base == 2) return ch == '0' || ch == '1';
                return std::isdigit(static_cast<unsigned char>(ch)) != 0;
            };
            while (digit_ok(peek()) || peek() == '_') {
                if (peek() != '_') digits += peek();
                advance();
            }
            if (digits.empty()) fail("malformed number");
            Word v = 0;
            try {
                v = std::stoull(digits, nullptr, base);
            } catch (const std::exception&) {
                throw SourceError(ErrorKind::Syntax, line, col, "malformed number '" + digits + "'");
            }
            return Token{Tok::Number, digits, "", v, line, col};
        }
        static const char* two[] = {":=", "..", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||"};
        for (const char* p : two) {
            if (peek() == p[0] && peek(1) == p[1]) {
                advance();
                advance();
                return Token{Tok::Punct, p, "", 0, line, col};
            }
        }
        static const std::string singles = "+-*/%&|^~!<>?:;,()[]{}=";
        if (singles.find(c) != std::string::npos) {
            advance();
            return Token{Tok::Punct, std::string(1, c), "", 0, line, col};
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    static std::optional<Token> parse_marker(const std::string& body) {
        if (body.size() < 6 || body.compare(0, 3, "===") != 0 || body.compare(body.size() - 3, 3, "===") != 0)
            return std::nullopt;
        std::string inner = trim(std::string_view(body).substr(3, body.size() - 6));
        auto space = inner.find_last_of(" \t");
        if (space == std::string::npos) return std::nullopt;
        std::string name = trim(std::string_view(inner).substr(0, space));
        std::string what = trim(std::string_view(inner).substr(space + 1));
        if (name.empty() || !std::all_of(name.begin(), name.end(), is_ident_char)) return std::nullopt;
        if (what == "START") return Token{Tok::MarkerStart, name, "", 0, 0, 0};
        if (what == "END") return Token{Tok::MarkerEnd, name, "", 0, 0, 0};
        return std::nullopt;
    }
};

ExprPtr make_number(Word v, int line, int col) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Number;
    e->value = v;
    e->line = line;
    e->column = col;
    return e;
}

class ExprParser {
public:
    ExprParser(const std::vector<Token>& toks, std::size_t& pos) : t_(toks), pos_(pos) {}

    ExprPtr expr() { return ternary(); }

    const Token& peek(std::size_t k = 0) const { return t_[std::min(pos_ + k, t_.size() - 1)]; }
    bool is(const char* p) const { return peek().kind == Tok::Punct && peek().text == p; }
    bool is_word(const char* w) const { return peek().kind == Tok::Ident && peek().text == w; }
    const Token& take() { return t_[pos_ < t_.size() - 1 ? pos_++ : pos_]; }
    [[noreturn]] void fail(const std::string& msg) const {
        throw SourceError(ErrorKind::Syntax, peek().line, peek().column, msg);
    }
    void expect(const char* p) {
        if (!is(p)) fail(std::string("expected '") + p + "'" + found());
        take();
    }
    std::string expect_ident() {
        if (peek().kind != Tok::Ident) fail("expected identifier" + found());
        return take().text;
    }
    std::string found() const {
        if (peek().kind == Tok::End) return ", found end of input";
        return ", found '" + peek().text + "'";
    }

private:
    const std::vector<Token>& t_;
    std::size_t& pos_;

    ExprPtr binary(const std::string& op, ExprPtr l, ExprPtr r, const Token& at) {
        auto e = std::make_shared<Expr>();
        e->kind = ExprKind::Binary;
        e->op = op;
        e->lhs = std::move(l);
        e->rhs = std::move(r);
        e->line = at.line;
        e->column = at.column;
        return e;
    }

    ExprPtr ternary() {
        ExprPtr c = level(0);
        if (is("?")) {
            Token at = take();
            ExprPtr a = ternary();
            expect(":");
            ExprPtr b = ternary();
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::Ternary;
            e->lhs = c;
            e->rhs = a;
            e->third = b;
            e->line = at.line;
            e->column = at.column;
            return e;
        }
        return c;
    }

    ExprPtr level(int lvl) {
        static const std::vector<std::vector<std::string>> ops = {
            {"||"}, {"&&"}, {"|"}, {"^"}, {"&"}, {"==", "!="}, {"<", "<=", ">", ">="}, {"<<", ">>"}, {"+", "-"},
            {"*", "/", "%"}};
        if (lvl == static_cast<int>(ops.size())) return unary();
        ExprPtr l = level(lvl + 1);
        for (;;) {
            const Token& p = peek();
            if (p.kind != Tok::Punct) return l;
            auto& row = ops[lvl];
            if (std::find(row.begin(), row.end(), p.text) == row.end()) return l;
            Token at = take();
            ExprPtr r = level(lvl + 1);
            l = binary(at.text, l, r, at);
        }
    }

    ExprPtr unary() {
        if (is("-") || is("~") || is("!") || is("+")) {
            Token at = take();
            ExprPtr operand = unary();
            if (at.text == "+") return operand;
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::Unary;
            e->op = at.text;
            e->lhs = operand;
            e->line = at.line;
            e->column = at.column;
            return e;
        }
        return primary();
    }

    ExprPtr primary() {
        const Token& p = peek();
        if (p.kind == Tok::Number) {
            Token t = take();
            return make_number(t.value, t.line, t.column);
        }
        if (p.kind == Tok::Ident) {
            Token t = take();
            auto e = std::make_shared<Expr>();
            e->kind = ExprKind::Ref;
            e->name = t.text;
            e->line = t.line;
            e->column = t.column;
            while (is("[")) {
                take();
                e->index.push_back(expr());
                expect("]");
            }
            return e;
        }
        if (is("(")) {
            take();
            ExprPtr e = expr();
            expect(")");
            return e;
        }
        fail("expected expression" + found());
    }
};

// Tokenizes a directive value; positions are reported relative to the
// directive's source line.
std::vector<Token> lex_fragment(const Directive& d) {
    try {
        std::vector<Token> toks = Lexer(d.text).run();
        for (auto& t : toks) t.line += d.line - 1;
        return toks;
    } catch (const SourceError& e) {
        throw SourceError(ErrorKind::Annotation, d.line, d.column, "%" + d.name + ": " + e.what());
    }
}

// Evaluation shared by the interpreter and constant folding.
struct Val {
    Word v = 0;
    unsigned w = 1;
    bool konst = true;
};

} // namespace

Word fold_binary_op(const std::string& op, Word a, Word b, int line, int col) {
    if (op == "+") return a + b;
    if (op == "-") return a - b;
    if (op == "*") return a * b;
    if (op == "/" || op == "%") {
        if (b == 0) throw SourceError(ErrorKind::Syntax, line, col, "division by zero in constant expression");
        return op == "/" ? a / b : a % b;
    }
    if (op == "&") return a & b;
    if (op == "|") return a | b;
    if (op == "^") return a ^ b;
    if (op == "<<") return b >= 64 ? 0 : a << b;
    if (op == ">>") return b >= 64 ? 0 : a >> b;
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "&&") return (a != 0) && (b != 0);
    if (op == "||") return (a != 0) || (b != 0);
    throw SourceError(ErrorKind::Syntax, line, col, "unknown operator '" + op + "'");
}

namespace {

unsigned val_width(const Val& v) { return v.konst ? constant_width(v.v) : v.w; }

bool is_comparison(const std::string& op) {
    return op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=" || op == "&&" ||
           op == "||";
}

} // namespace

const VarDecl* AbkProgram::find_var(const std::string& name) const {
    for (const auto& v : vars)
        if (v.name == name) return &v;
    return nullptr;
}

int AbkProgram::find_block(const std::string& name) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].name == name) return static_cast<int>(i);
    return -1;
}

int AbkProgram::spec_block() const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].is_spec) return static_cast<int>(i);
    return -1;
}

std::vector<int> AbkProgram::leaf_blocks() const {
    std::vector<int> result;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& b = blocks[i];
        if (b.is_spec || !b.children.empty()) continue;
        int p = b.parent;
        bool under_spec = false;
        while (p >= 0) {
            if (blocks[p].is_spec) under_spec = true;
            p = blocks[p].parent;
        }
        if (!under_spec && b.annotation) result.push_back(static_cast<int>(i));
    }
    return result;
}

std::size_t AbkProgram::statement_count() const {
    std::function<std::size_t(const std::vector<Stmt>&)> count = [&](const std::vector<Stmt>& ss) {
        std::size_t n = 0;
        for (const auto& s : ss) n += (s.kind == StmtKind::Block ? 0 : 1) + count(s.body);
        return n;
    };
    return count(body);
}

namespace {

// Generic expression evaluator; `load` supplies runtime values of cells and
// `lookup` resolves names bound in the environment.
class Evaluator {
public:
    using Env = std::map<std::string, Val>;

    Evaluator(const AbkProgram& prog, const std::vector<Word>* memory, std::vector<std::string>* diagnostics)
        : prog_(prog), mem_(memory), diag_(diagnostics) {}

    Val eval(const Expr& e, const Env& env) const {
        switch (e.kind) {
        case ExprKind::Number: return Val{e.value, constant_width(e.value), true};
        case ExprKind::Ref: return ref(e, env);
        case ExprKind::Unary: {
            Val a = eval(*e.lhs, env);
            if (e.op == "!") return Val{a.v == 0 ? Word{1} : Word{0}, 1, a.konst};
            if (a.konst) return Val{e.op == "-" ? Word{0} - a.v : ~a.v, 64, true};
            const Word mask = width_mask(a.w);
            return Val{(e.op == "-" ? Word{0} - a.v : ~a.v) & mask, a.w, false};
        }
        case ExprKind::Binary: {
            Val a = eval(*e.lhs, env);
            Val b = eval(*e.rhs, env);
            if (a.konst && b.konst) {
                Word r = fold_binary_op(e.op, a.v, b.v, e.line, e.column);
                return Val{r, constant_width(r), true};
            }
            if (e.op == "/" || e.op == "%")
                throw SourceError(ErrorKind::Syntax, e.line, e.column,
                                  "operator '" + e.op + "' requires constant operands");
            const unsigned w = std::max(val_width(a), val_width(b));
            const Word mask = width_mask(w);
            Word x = a.v & mask, y = b.v & mask;
            Word r = 0;
            if (e.op == "<<") {
                r = y >= w ? 0 : (x << y) & mask;
            } else if (e.op == ">>") {
                r = y >= 64 ? 0 : x >> y;
            } else if (e.op == "&&" || e.op == "||") {
                r = fold_binary_op(e.op, a.v, b.v, e.line, e.column);
            } else {
                r = fold_binary_op(e.op, x, y, e.line, e.column) & mask;
            }
            return Val{r, is_comparison(e.op) ? 1u : w, false};
        }
        case ExprKind::Ternary: {
            Val c = eval(*e.lhs, env);
            Val a = eval(*e.rhs, env);
            Val b = eval(*e.third, env);
            if (c.konst) return c.v != 0 ? a : b;
            const unsigned w = std::max(val_width(a), val_width(b));
            return Val{(c.v != 0 ? a.v : b.v) & width_mask(w), w, false};
        }
        }
        return {};
    }

    /// Flat cell index of a Ref; nullopt when out of bounds.
    std::optional<CellId> locate(const Expr& e, const Env& env, const VarDecl& var) const {
        if (e.index.size() != var.dims.size())
            throw SourceError(ErrorKind::Syntax, e.line, e.column,
                              "'" + var.name + "' expects " + std::to_string(var.dims.size()) + " subscript(s)");
        std::size_t flat = 0;
        bool oob = false;
        for (std::size_t k = 0; k < e.index.size(); ++k) {
            Val i = eval(*e.index[k], env);
            if (i.v >= var.dims[k]) oob = true;
            flat = flat * var.dims[k] + static_cast<std::size_t>(oob ? 0 : i.v);
        }
        if (oob) return std::nullopt;
        return static_cast<CellId>(var.first_cell + flat);
    }

    bool subscripts_constant(const Expr& e, const Env& env) const {
        return std::all_of(e.index.begin(), e.index.end(), [&](const ExprPtr& i) { return eval(*i, env).konst; });
    }

    void note(const std::string& msg) const {
        if (diag_ && std::find(diag_->begin(), diag_->end(), msg) == diag_->end()) diag_->push_back(msg);
    }

private:
    const AbkProgram& prog_;
    const std::vector<Word>* mem_;
    std::vector<std::string>* diag_;

    Val ref(const Expr& e, const Env& env) const {
        if (e.index.empty()) {
            if (auto it = env.find(e.name); it != env.end()) return it->second;
            if (auto it = prog_.constants.find(e.name); it != prog_.constants.end())
                return Val{it->second, constant_width(it->second), true};
        }
        const VarDecl* var = prog_.find_var(e.name);
        if (!var) throw SourceError(ErrorKind::Syntax, e.line, e.column, "unknown name '" + e.name + "'");
        if (!mem_) throw SourceError(ErrorKind::Syntax, e.line, e.column, "'" + e.name + "' is not a constant");
        auto cell = locate(e, env, *var);
        if (!cell) {
            note("line " + std::to_string(e.line) + ": out-of-bounds read of '" + e.name + "' yields 0");
            return Val{0, var->width, false};
        }
        return Val{(*mem_)[*cell], var->width, false};
    }
};

Evaluator::Env to_env(const std::map<std::string, Word>& env) {
    Evaluator::Env out;
    for (auto& [k, v] : env) out[k] = Val{v, constant_width(v), true};
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> toks, const ParseOptions& opts) : toks_(std::move(toks)), ep_(toks_, pos_), opts_(opts) {
        prog_.rb_mode = opts.rb_mode;
        prog_.unroll_cap = opts.unroll_cap;
    }

    AbkProgram run() {
        parse_items(prog_.body, -1, 0, true);
        if (!pending_.empty()) {
            if (last_ended_ >= 0) {
                for (auto& d : pending_) prog_.blocks[last_ended_].directives.push_back(d);
            } else {
                const auto& d = pending_.front();
                throw SourceError(ErrorKind::Annotation, d.line, d.column,
                                  "%" + d.name + " is not attached to any block");
            }
        }
        for (auto& [name, value] : opts_.overrides)
            if (!prog_.constants.count(name)) prog_.diagnostics.push_back("override for undeclared constant " + name);
        for (std::size_t i = 0; i < prog_.blocks.size(); ++i) resolve_block(static_cast<int>(i));
        return std::move(prog_);
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    ExprParser ep_;
    const ParseOptions& opts_;
    AbkProgram prog_;
    std::vector<Directive> pending_;
    int last_ended_ = -1;
    std::vector<int> open_;
    std::set<std::string> loop_vars_;

    const Token& peek() const { return ep_.peek(); }

    // Parses items until '}' (loop body) or the END marker of `block`.
    void parse_items(std::vector<Stmt>& out, int block, int loop_depth, bool top) {
        for (;;) {
            const Token& t = peek();
            if (t.kind == Tok::End) {
                if (block >= 0)
                    throw SourceError(ErrorKind::Syntax, t.line, t.column,
                                      "missing END marker for block " + prog_.blocks[block].name);
                if (!top) ep_.fail("unexpected end of input");
                return;
            }
            if (t.kind == Tok::Punct && t.text == "}") {
                if (loop_depth == 0) ep_.fail("unmatched '}'");
                return;
            }
            if (t.kind == Tok::Directive) {
                Token d = ep_.take();
                on_directive(Directive{d.text, d.extra, d.line, d.column});
                continue;
            }
            if (t.kind == Tok::MarkerStart) {
                if (loop_depth > 0)
                    throw SourceError(ErrorKind::Syntax, t.line, t.column, "block markers are not allowed inside loops");
                Token m = ep_.take();
                out.push_back(open_block(m, block));
                continue;
            }
            if (t.kind == Tok::MarkerEnd) {
                Token m = ep_.take();
                if (block < 0 || prog_.blocks[block].name != m.text || loop_depth > 0)
                    throw SourceError(ErrorKind::Syntax, m.line, m.column, "unmatched END marker for " + m.text);
                auto& info = prog_.blocks[block];
                info.end_line = m.line;
                for (auto& d : pending_) info.directives.push_back(d);
                pending_.clear();
                last_ended_ = block;
                return;
            }
            if (ep_.is_word("const")) {
                parse_const();
                continue;
            }
            if (ep_.is_word("var")) {
                parse_var();
                continue;
            }
            out.push_back(parse_statement(loop_depth));
        }
    }

    Stmt open_block(const Token& m, int parent) {
        if (prog_.find_block(m.text) >= 0)
            throw SourceError(ErrorKind::Syntax, m.line, m.column, "duplicate block name " + m.text);
        BlockInfo info;
        info.name = m.text;
        info.start_line = m.line;
        info.parent = parent;
        info.is_spec = m.text == "SPEC";
        info.directives = std::move(pending_);
        pending_.clear();
        int idx = static_cast<int>(prog_.blocks.size());
        prog_.blocks.push_back(std::move(info));
        if (parent >= 0) prog_.blocks[parent].children.push_back(idx);
        last_ended_ = -1;
        Stmt s;
        s.kind = StmtKind::Block;
        s.block = idx;
        s.line = m.line;
        open_.push_back(idx);
        parse_items(s.body, idx, 0, false);
        open_.pop_back();
        return s;
    }

    void on_directive(Directive d) {
        static const std::set<std::string> known = {"IN_SIZE",       "IN_BATCH_SIZE", "BATCH_MEM_IN", "IN_ALLOC_RULE",
                                                    "OUT_SIZE",      "OUT_BATCH_SIZE", "BATCH_MEM_OUT",
                                                    "OUT_ALLOC_RULE", "REL",           "ACTIONS",      "ASSUME"};
        if (!known.count(d.name))
            throw SourceError(ErrorKind::Annotation, d.line, d.column, "unknown directive %" + d.name);
        if (d.name == "IN_ALLOC_RULE" && d.text.rfind("out", 0) == 0) d.name = "OUT_ALLOC_RULE";
        if (d.name == "ASSUME") {
            prog_.program_directives.push_back(d);
            return;
        }
        const bool out_side = d.name.rfind("OUT_", 0) == 0 || d.name == "BATCH_MEM_OUT";
        if (out_side && last_ended_ >= 0) {
            prog_.blocks[last_ended_].directives.push_back(d);
            return;
        }
        pending_.push_back(std::move(d));
    }

    Word const_expr(const ExprPtr& e) { return eval_constant(prog_, *e, {}); }

    void parse_const() {
        ep_.take();
        Token name = peek();
        std::string id = ep_.expect_ident();
        ep_.expect("=");
        ExprPtr e = ep_.expr();
        ep_.expect(";");
        if (prog_.constants.count(id) || prog_.find_var(id))
            throw SourceError(ErrorKind::Syntax, name.line, name.column, "redefinition of '" + id + "'");
        auto it = opts_.overrides.find(id);
        prog_.constants[id] = it != opts_.overrides.end() ? it->second : const_expr(e);
    }

    void parse_var() {
        ep_.take();
        Token name = peek();
        VarDecl v;
        v.name = ep_.expect_ident();
        v.line = name.line;
        if (prog_.constants.count(v.name) || prog_.find_var(v.name))
            throw SourceError(ErrorKind::Syntax, name.line, name.column, "redefinition of '" + v.name + "'");
        while (ep_.is("[")) {
            ep_.take();
            Token at = peek();
            Word d = const_expr(ep_.expr());
            if (d == 0 || d > (Word{1} << 24))
                throw SourceError(ErrorKind::Syntax, at.line, at.column, "array dimension out of range");
            v.dims.push_back(static_cast<std::size_t>(d));
            ep_.expect("]");
        }
        ep_.expect(":");
        Token wt = peek();
        Word w = const_expr(ep_.expr());
        if (w == 0 || w > kMaxWidth)
            throw SourceError(ErrorKind::Syntax, wt.line, wt.column,
                              "width must be between 1 and " + std::to_string(kMaxWidth));
        v.width = static_cast<unsigned>(w);
        if (ep_.is("=")) {
            ep_.take();
            v.init = const_expr(ep_.expr()) & width_mask(v.width);
        }
        ep_.expect(";");
        v.first_cell = static_cast<CellId>(prog_.cells.size());
        const std::size_t n = v.cell_count();
        for (std::size_t i = 0; i < n; ++i) {
            std::string cname = v.name;
            std::size_t rem = i;
            std::vector<std::size_t> idx(v.dims.size());
            for (std::size_t k = v.dims.size(); k-- > 0;) {
                idx[k] = rem % v.dims[k];
                rem /= v.dims[k];
            }
            for (std::size_t k : idx) cname += "[" + std::to_string(k) + "]";
            prog_.cells.push_back(CellInfo{cname, v.width, Region::NonRelevant, CellKind::Storage});
        }
        prog_.vars.push_back(std::move(v));
    }

    Stmt parse_statement(int loop_depth) {
        const Token& t = peek();
        Stmt s;
        s.line = t.line;
        if (ep_.is_word("for")) {
            ep_.take();
            s.kind = StmtKind::For;
            s.var = ep_.expect_ident();
            if (!ep_.is_word("in")) ep_.fail("expected 'in'" + ep_.found());
            ep_.take();
            Token lo_at = peek();
            s.lo = ep_.expr();
            ep_.expect("..");
            s.hi = ep_.expr();
            if (!opts_.rb_mode) {
                try {
                    std::map<std::string, Word> env;
                    for (auto& lv : loop_vars_) env[lv] = 0;
                    eval_constant(prog_, *s.lo, env);
                    eval_constant(prog_, *s.hi, env);
                } catch (const SourceError&) {
                    throw SourceError(ErrorKind::Bound, lo_at.line, lo_at.column,
                                      "for-loop bounds must be constant outside RB mode");
                }
            }
            bool fresh = loop_vars_.insert(s.var).second;
            ep_.expect("{");
            parse_items(s.body, -1, loop_depth + 1, false);
            ep_.expect("}");
            if (fresh) loop_vars_.erase(s.var);
            return s;
        }
        if (ep_.is_word("while")) {
            if (!opts_.rb_mode)
                throw SourceError(ErrorKind::Syntax, t.line, t.column, "while-loops are only permitted in RB mode");
            ep_.take();
            s.kind = StmtKind::While;
            s.value = ep_.expr();
            ep_.expect("{");
            parse_items(s.body, -1, loop_depth + 1, false);
            ep_.expect("}");
            return s;
        }
        if (peek().kind != Tok::Ident) ep_.fail("expected statement" + ep_.found());
        ExprPtr target = ep_.expr();
        if (target->kind != ExprKind::Ref) ep_.fail("assignment target must be a variable");
        if (!prog_.find_var(target->name))
            throw SourceError(ErrorKind::Syntax, target->line, target->column,
                              "assignment to undeclared variable '" + target->name + "'");
        ep_.expect(":=");
        s.kind = StmtKind::Assign;
        s.target = target;
        s.value = ep_.expr();
        ep_.expect(";");
        return s;
    }

    // --- annotations ---------------------------------------------------

    const Directive* find_directive(const BlockInfo& b, const std::string& name) {
        const Directive* found = nullptr;
        for (const auto& d : b.directives) {
            if (d.name != name) continue;
            if (found)
                throw SourceError(ErrorKind::Annotation, d.line, d.column,
                                  "duplicate %" + name + " for block " + b.name);
            found = &d;
        }
        return found;
    }

    Word directive_value(const Directive& d, const std::map<std::string, Word>& env) {
        std::vector<Token> toks = lex_fragment(d);
        std::size_t pos = 0;
        ExprParser p(toks, pos);
        try {
            ExprPtr e = p.expr();
            if (p.peek().kind != Tok::End) p.fail("trailing input");
            return eval_constant(prog_, *e, env);
        } catch (const SourceError& e) {
            throw SourceError(ErrorKind::Annotation, d.line, d.column, "%" + d.name + ": " + e.what());
        }
    }

    std::string directive_ident(const Directive& d) {
        std::vector<Token> toks = lex_fragment(d);
        if (toks.size() != 2 || toks[0].kind != Tok::Ident)
            throw SourceError(ErrorKind::Annotation, d.line, d.column, "%" + d.name + " expects a variable name");
        return toks[0].text;
    }

    AllocRule parse_rule(const Directive& d, bool want_output) {
        std::vector<Token> toks = lex_fragment(d);
        std::size_t pos = 0;
        ExprParser p(toks, pos);
        AllocRule r;
        r.line = d.line;
        try {
            std::string head = p.expect_ident();
            if (head != "in" && head != "out") p.fail("alloc rule must start with in(x) or out(x)");
            r.is_output = head == "out";
            p.expect("(");
            r.lane_var = p.expect_ident();
            p.expect(")");
            if (p.is_word("addr")) {
                p.take();
                if (!p.is_word("range")) p.fail("expected 'range'");
                p.take();
            }
            p.expect("=");
            while (p.is("[")) {
                p.take();
                RuleIndex idx;
                idx.lo = p.expr();
                if (p.is(":")) {
                    p.take();
                    idx.hi = p.expr();
                }
                p.expect("]");
                r.indices.push_back(idx);
            }
            if (r.indices.empty()) p.fail("alloc rule needs at least one subscript");
            if (p.peek().kind != Tok::End) p.fail("trailing input in alloc rule");
        } catch (const SourceError& e) {
            if (e.kind() == ErrorKind::Annotation) throw;
            throw SourceError(ErrorKind::Annotation, d.line, d.column, "%" + d.name + ": " + e.what());
        }
        if (r.is_output != want_output)
            throw SourceError(ErrorKind::Annotation, d.line, d.column,
                              "%" + d.name + " head does not match its direction");
        return r;
    }

    static void collect_names(const Expr& e, std::set<std::string>& out) {
        if (e.kind == ExprKind::Ref && e.index.empty()) out.insert(e.name);
        for (const auto& i : e.index) collect_names(*i, out);
        if (e.lhs) collect_names(*e.lhs, out);
        if (e.rhs) collect_names(*e.rhs, out);
        if (e.third) collect_names(*e.third, out);
    }

    // Cells per lane; nullopt when some lane falls out of bounds.
    std::optional<std::vector<std::vector<CellId>>> rule_cells(const AllocRule& r, const VarDecl& var,
                                                               std::size_t lanes, std::size_t size,
                                                               const std::map<std::string, Word>& env, int line) {
        if (r.indices.size() != var.dims.size())
            throw SourceError(ErrorKind::Annotation, line, 1,
                              "alloc rule for '" + var.name + "' needs " + std::to_string(var.dims.size()) +
                                  " subscript(s)");
        std::vector<std::vector<CellId>> result;
        for (std::size_t x = 0; x < lanes; ++x) {
            auto lenv = env;
            lenv[r.lane_var] = x;
            std::size_t flat = 0;
            std::size_t count = 1;
            for (std::size_t k = 0; k < r.indices.size(); ++k) {
                const auto& idx = r.indices[k];
                Word lo = eval_constant(prog_, *idx.lo, lenv);
                if (idx.hi) {
                    if (k + 1 != r.indices.size())
                        throw SourceError(ErrorKind::Annotation, line, 1, "a range is only allowed in the last subscript");
                    Word hi = eval_constant(prog_, *idx.hi, lenv);
                    if (hi < lo) throw SourceError(ErrorKind::Annotation, line, 1, "empty alloc range");
                    count = static_cast<std::size_t>(hi - lo);
                    if (lo >= var.dims[k] || hi > var.dims[k]) return std::nullopt;
                } else if (lo >= var.dims[k]) {
                    return std::nullopt;
                }
                flat = flat * var.dims[k] + static_cast<std::size_t>(lo);
            }
            if (count != size)
                throw SourceError(ErrorKind::Annotation, line, 1,
                                  "alloc rule covers " + std::to_string(count) + " cells per lane, expected " +
                                      std::to_string(size));
            std::vector<CellId> cells;
            for (std::size_t w = 0; w < count; ++w) cells.push_back(static_cast<CellId>(var.first_cell + flat + w));
            result.push_back(std::move(cells));
        }
        return result;
    }

    std::vector<std::vector<CellId>> resolve_rule(const BlockInfo& b, const AllocRule& r, const std::string& mem,
                                                  std::size_t lanes, std::size_t size,
                                                  std::map<std::string, Word>& env, BatchAnnotation& ann) {
        const VarDecl* var = prog_.find_var(mem);
        if (!var)
            throw SourceError(ErrorKind::Annotation, r.line, 1, "batch buffer '" + mem + "' is not declared");
        std::set<std::string> names;
        for (const auto& i : r.indices) {
            collect_names(*i.lo, names);
            if (i.hi) collect_names(*i.hi, names);
        }
        std::vector<std::string> free;
        for (const auto& n : names)
            if (n != r.lane_var && !env.count(n) && !prog_.constants.count(n)) free.push_back(n);
        if (free.size() > 1)
            throw SourceError(ErrorKind::Annotation, r.line, 1, "alloc rule has more than one free variable");
        std::optional<std::vector<std::vector<CellId>>> cells;
        if (free.empty()) {
            cells = rule_cells(r, *var, lanes, size, env, r.line);
        } else {
            const std::size_t limit = var->cell_count();
            for (Word v = 0; v <= limit && !cells; ++v) {
                auto benv = env;
                benv[free[0]] = v;
                cells = rule_cells(r, *var, lanes, size, benv, r.line);
                if (cells) {
                    ann.rule_bindings[free[0]] = v;
                    prog_.diagnostics.push_back("block " + b.name + ": free variable '" + free[0] +
                                                "' in alloc rule bound to " + std::to_string(v));
                }
            }
        }
        if (!cells)
            throw SourceError(ErrorKind::Annotation, r.line, 1,
                              "alloc rule for '" + mem + "' maps a lane outside the buffer");
        std::set<CellId> seen;
        for (const auto& lane : *cells)
            for (CellId c : lane)
                if (!seen.insert(c).second)
                    throw SourceError(ErrorKind::Annotation, r.line, 1,
                                      "alloc rule for '" + mem + "' maps two lanes to overlapping cells");
        return *cells;
    }

    void resolve_block(int index) {
        BlockInfo& b = prog_.blocks[index];
        if (!b.children.empty()) {
            if (!b.directives.empty())
                prog_.diagnostics.push_back("block " + b.name + " has nested blocks; its directives are ignored");
            return;
        }
        static const char* required[] = {"IN_SIZE",  "IN_BATCH_SIZE",  "BATCH_MEM_IN",  "IN_ALLOC_RULE",
                                         "OUT_SIZE", "OUT_BATCH_SIZE", "BATCH_MEM_OUT", "OUT_ALLOC_RULE"};
        std::vector<std::string> missing;
        for (const char* r : required)
            if (!find_directive(b, r)) missing.push_back(std::string("%") + r);
        if (!missing.empty()) {
            if (opts_.rb_mode) {
                prog_.diagnostics.push_back("block " + b.name + " is not annotated");
                return;
            }
            std::string list;
            for (auto& m : missing) list += (list.empty() ? "" : ", ") + m;
            throw SourceError(ErrorKind::Annotation, b.start_line, 1, "block " + b.name + " is missing " + list);
        }
        BatchAnnotation ann;
        std::map<std::string, Word> env;
        auto value = [&](const char* name) {
            Word v = directive_value(*find_directive(b, name), env);
            env[name] = v;
            return static_cast<std::size_t>(v);
        };
        ann.in_size = value("IN_SIZE");
        ann.out_size = value("OUT_SIZE");
        ann.in_batch_size = value("IN_BATCH_SIZE");
        ann.out_batch_size = value("OUT_BATCH_SIZE");
        if (ann.in_size == 0 || ann.out_size == 0 || ann.in_batch_size == 0)
            throw SourceError(ErrorKind::Annotation, b.start_line, 1, "block " + b.name + ": sizes must be positive");
        if (ann.in_batch_size != ann.out_batch_size)
            throw SourceError(ErrorKind::Annotation, b.start_line, 1,
                              "block " + b.name + ": input and output batch sizes differ");
        ann.batch_mem_in = directive_ident(*find_directive(b, "BATCH_MEM_IN"));
        ann.batch_mem_out = directive_ident(*find_directive(b, "BATCH_MEM_OUT"));
        ann.in_rule = parse_rule(*find_directive(b, "IN_ALLOC_RULE"), false);
        ann.out_rule = parse_rule(*find_directive(b, "OUT_ALLOC_RULE"), true);
        ann.in_lanes = resolve_rule(b, ann.in_rule, ann.batch_mem_in, ann.in_batch_size, ann.in_size, env, ann);
        ann.out_lanes = resolve_rule(b, ann.out_rule, ann.batch_mem_out, ann.out_batch_size, ann.out_size, env, ann);

        if (const Directive* d = find_directive(b, "ACTIONS")) {
            std::vector<Token> toks = lex_fragment(*d);
            if (toks.empty() || toks[0].kind != Tok::Number)
                throw SourceError(ErrorKind::Annotation, d->line, d->column, "%ACTIONS expects a count");
            ann.action_count = static_cast<unsigned>(toks[0].value);
            if (ann.action_count == 0 || ann.action_count > 256)
                throw SourceError(ErrorKind::Annotation, d->line, d->column, "%ACTIONS count out of range");
            if (ann.action_count > 1) {
                if (toks.size() < 3 || toks[1].kind != Tok::Ident)
                    throw SourceError(ErrorKind::Annotation, d->line, d->column,
                                      "%ACTIONS with more than one action needs an array name");
                ann.action_array = toks[1].text;
                const VarDecl* av = prog_.find_var(ann.action_array);
                if (!av || av->cell_count() < ann.in_batch_size)
                    throw SourceError(ErrorKind::Annotation, d->line, d->column,
                                      "action array must hold one cell per lane");
                for (std::size_t x = 0; x < ann.in_batch_size; ++x)
                    ann.action_cells.push_back(static_cast<CellId>(av->first_cell + x));
            }
        }

        if (const Directive* d = find_directive(b, "REL")) {
            std::vector<Token> toks = lex_fragment(*d);
            std::size_t pos = 0;
            ExprParser p(toks, pos);
            try {
                while (p.peek().kind != Tok::End) {
                    ExprPtr e = p.expr();
                    if (e->kind != ExprKind::Ref) p.fail("%REL expects variable references");
                    ann.rel_refs.push_back(e);
                    if (p.is(",")) p.take();
                }
            } catch (const SourceError& e) {
                if (e.kind() == ErrorKind::Annotation) throw;
                throw SourceError(ErrorKind::Annotation, d->line, d->column, std::string("%REL: ") + e.what());
            }
            std::set<CellId> rel;
            for (const auto& r : ann.rel_refs) {
                std::vector<CellId> cells;
                try {
                    cells = resolve_ref_cells(prog_, *r, {});
                } catch (const SourceError& e) {
                    throw SourceError(ErrorKind::Annotation, d->line, d->column, std::string("%REL: ") + e.what());
                }
                rel.insert(cells.begin(), cells.end());
            }
            std::set<CellId> io;
            for (auto& lane : ann.in_lanes) io.insert(lane.begin(), lane.end());
            for (auto& lane : ann.out_lanes) io.insert(lane.begin(), lane.end());
            io.insert(ann.action_cells.begin(), ann.action_cells.end());
            for (CellId c : rel)
                if (io.count(c))
                    throw SourceError(ErrorKind::Region, d->line, d->column,
                                      "relevant cell " + prog_.cells[c].name + " aliases the batch input or output");
            ann.rel_cells.assign(rel.begin(), rel.end());
        }
        b.annotation = std::move(ann);
    }
};

// --- interpreter ------------------------------------------------------

class Interp {
public:
    Interp(const AbkProgram& prog, std::vector<Word>& mem, const InterpretOptions& opts)
        : prog_(prog), mem_(mem), opts_(opts), ev_(prog, &mem, nullptr) {}

    void run(const std::vector<Stmt>& body, int only_block) {
        if (only_block >= 0) {
            const Stmt* s = find(body, only_block);
            if (!s) throw Error(ErrorKind::Config, "no such block");
            exec_list(s->body, {});
        } else {
            exec_list(body, {});
        }
    }

private:
    const AbkProgram& prog_;
    std::vector<Word>& mem_;
    const InterpretOptions& opts_;
    Evaluator ev_;
    std::size_t steps_ = 0;

    static const Stmt* find(const std::vector<Stmt>& body, int block) {
        for (const auto& s : body) {
            if (s.kind == StmtKind::Block && s.block == block) return &s;
            if (const Stmt* r = find(s.body, block)) return r;
        }
        return nullptr;
    }

    void tick() {
        if (++steps_ > opts_.step_budget) throw Error(ErrorKind::StepBudgetExceeded, "interpreter step budget exhausted");
    }

    void exec_list(const std::vector<Stmt>& list, const Evaluator::Env& env) {
        for (const auto& s : list) exec(s, env);
    }

    void exec(const Stmt& s, const Evaluator::Env& env) {
        switch (s.kind) {
        case StmtKind::Block:
            if (prog_.blocks[s.block].is_spec) return;
            exec_list(s.body, env);
            return;
        case StmtKind::Assign: {
            tick();
            Val v = ev_.eval(*s.value, env);
            const VarDecl* var = prog_.find_var(s.target->name);
            auto cell = ev_.locate(*s.target, env, *var);
            if (cell) mem_[*cell] = v.v & width_mask(var->width);
            return;
        }
        case StmtKind::For: {
            Val lo = ev_.eval(*s.lo, env);
            Val hi = ev_.eval(*s.hi, env);
            const bool konst = lo.konst && hi.konst;
            if (!konst) {
                lo.v &= width_mask(32);
                hi.v &= width_mask(32);
            }
            for (Word j = lo.v; j < hi.v; ++j) {
                tick();
                auto inner = env;
                inner[s.var] = konst ? Val{j, constant_width(j), true} : Val{j, 32, false};
                exec_list(s.body, inner);
            }
            return;
        }
        case StmtKind::While:
            for (;;) {
                tick();
                if (ev_.eval(*s.value, env).v == 0) break;
                exec_list(s.body, env);
            }
            return;
        }
    }
};

} // namespace

AbkProgram parse(const std::string& text, const ParseOptions& opts) {
    std::vector<Token> toks = Lexer(text).run();
    return Parser(std::move(toks), opts).run();
}

Word eval_constant(const AbkProgram& prog, const Expr& e, const std::map<std::string, Word>& env) {
    Evaluator ev(prog, nullptr, nullptr);
    Val v = ev.eval(e, to_env(env));
    if (!v.konst) throw SourceError(ErrorKind::Syntax, e.line, e.column, "expression is not constant");
    return v.v;
}

std::optional<CellId> resolve_ref(const AbkProgram& prog, const Expr& ref, const std::map<std::string, Word>& env) {
    const VarDecl* var = prog.find_var(ref.name);
    if (!var) throw SourceError(ErrorKind::Syntax, ref.line, ref.column, "unknown variable '" + ref.name + "'");
    Evaluator ev(prog, nullptr, nullptr);
    auto venv = to_env(env);
    if (!ev.subscripts_constant(ref, venv))
        throw SourceError(ErrorKind::Syntax, ref.line, ref.column, "subscript is not constant");
    return ev.locate(ref, venv, *var);
}

std::vector<CellId> resolve_ref_cells(const AbkProgram& prog, const Expr& ref,
                                      const std::map<std::string, Word>& env) {
    const VarDecl* var = prog.find_var(ref.name);
    if (!var) throw SourceError(ErrorKind::Syntax, ref.line, ref.column, "unknown variable '" + ref.name + "'");
    if (ref.index.size() > var->dims.size())
        throw SourceError(ErrorKind::Syntax, ref.line, ref.column, "too many subscripts for '" + ref.name + "'");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < ref.index.size(); ++k) {
        Word i = eval_constant(prog, *ref.index[k], env);
        if (i >= var->dims[k])
            throw SourceError(ErrorKind::Syntax, ref.line, ref.column, "subscript out of range for '" + ref.name + "'");
        flat = flat * var->dims[k] + static_cast<std::size_t>(i);
    }
    std::size_t span = 1;
    for (std::size_t k = ref.index.size(); k < var->dims.size(); ++k) {
        span *= var->dims[k];
        flat *= var->dims[k];
    }
    std::vector<CellId> cells;
    for (std::size_t i = 0; i < span; ++i) cells.push_back(static_cast<CellId>(var->first_cell + flat + i));
    return cells;
}

void interpret(const AbkProgram& prog, std::vector<Word>& memory, int block, const InterpretOptions& opts) {
    if (memory.size() != prog.cells.size()) throw Error(ErrorKind::Config, "storage size does not match program");
    Interp(prog, memory, opts).run(prog.body, block);
}

std::vector<Word> initial_storage(const AbkProgram& prog) {
    std::vector<Word> mem(prog.cells.size(), 0);
    for (const auto& v : prog.vars)
        if (v.init)
            for (std::size_t i = 0; i < v.cell_count(); ++i) mem[v.first_cell + i] = *v.init;
    return mem;
}

void store_batch(const AbkProgram& prog, int block, const InputBatch& batch, std::vector<Word>& memory) {
    const auto& ann = prog.blocks.at(block).annotation;
    if (!ann) throw Error(ErrorKind::Annotation, "block " + prog.blocks[block].name + " is not annotated");
    if (batch.lanes.size() != ann->in_batch_size) throw Error(ErrorKind::Config, "batch size mismatch");
    for (std::size_t x = 0; x < batch.lanes.size(); ++x) {
        if (!ann->action_cells.empty()) memory[ann->action_cells[x]] = batch.lanes[x].action;
        for (std::size_t w = 0; w < ann->in_size; ++w) {
            CellId c = ann->in_lanes[x][w];
            memory[c] = batch.lanes[x].data.at(w) & width_mask(prog.cells[c].width);
        }
    }
}

OutputBatch load_outputs(const AbkProgram& prog, int block, const std::vector<Word>& memory) {
    const auto& ann = prog.blocks.at(block).annotation;
    if (!ann) throw Error(ErrorKind::Annotation, "block " + prog.blocks[block].name + " is not annotated");
    OutputBatch out;
    for (const auto& lane : ann->out_lanes) {
        OutputLane o;
        for (CellId c : lane) o.push_back(memory[c]);
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace aqed
