#include "aqed/corpus.hpp"

#include "aqed/error.hpp"
#include "aqed/kernel.hpp"
#include "aqed/ssa.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace aqed {

std::string_view bug_class_name(BugClass c) {
    switch (c) {
    case BugClass::None: return "NONE";
    case BugClass::Indexing: return "INDEXING";
    case BugClass::Init: return "INIT";
    case BugClass::CrossLane: return "CROSS_LANE";
    case BugClass::RelMutation: return "REL_MUTATION";
    case BugClass::ConsistentWrong: return "CONSISTENT_WRONG";
    case BugClass::Unresponsive: return "UNRESPONSIVE";
    }
    return "?";
}

const std::vector<BugClass>& all_bug_classes() {
    static const std::vector<BugClass> all = {BugClass::None,        BugClass::Indexing,        BugClass::Init,
                                              BugClass::CrossLane,   BugClass::RelMutation,     BugClass::ConsistentWrong,
                                              BugClass::Unresponsive};
    return all;
}

std::optional<BugClass> parse_bug_class(std::string_view s) {
    for (BugClass c : all_bug_classes())
        if (bug_class_name(c) == s) return c;
    return std::nullopt;
}

const std::vector<std::string>& corpus_checks() {
    static const std::vector<std::string> checks = {"intra-fc", "fc2", "strong-fc", "fcd", "sac", "rb"};
    return checks;
}

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t at = 0; (at = s.find(from, at)) != std::string::npos; at += to.size()) s.replace(at, from.size(), to);
    return s;
}

// Lane function over X (the lane word) and K (the key), two or three steps.
std::string lane_function(std::mt19937_64& rng) {
    auto c = [&] { return std::to_string((rng() % 4) | 1); };
    static const char* keyed[] = {"(X ^ K)", "(X + K)", "(X - K)", "((X << 1) ^ K)"};
    std::string e = keyed[rng() % 4];
    const std::size_t steps = 1 + rng() % 2;
    for (std::size_t s = 0; s < steps; ++s) {
        std::string op;
        switch (rng() % 4) {
        case 0: op = "(X + " + c() + ")"; break;
        case 1: op = "(X ^ " + c() + ")"; break;
        case 2: op = "(X * " + c() + ")"; break;
        default: op = "(X ^ K)"; break;
        }
        e = replace_all(op, "X", e);
    }
    return e;
}

std::string instantiate(const std::string& f, const std::string& x) { return replace_all(replace_all(f, "X", x), "K", "key"); }

struct Stage {
    std::string in_buf, out_buf;
    std::string f;
};

} // namespace

CorpusCase generate(std::uint64_t seed, BugClass cls, const CorpusParams& params) {
    if (params.batch < 2) throw Error(ErrorKind::Config, "corpus kernels need at least two lanes");
    if (params.stages < 1 || params.stages > 2) throw Error(ErrorKind::Config, "corpus kernels have one or two stages");
    if (params.width < 1 || params.width > kMaxWidth) throw Error(ErrorKind::Config, "corpus width out of range");
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(cls) * 131 + params.stages);
    const std::size_t B = params.batch;
    const unsigned W = params.width;

    CorpusCase c;
    c.seed = seed;
    c.cls = cls;
    c.params = params;
    c.rb_mode = cls == BugClass::Unresponsive;
    c.name = std::string(bug_class_name(cls)) + "_s" + std::to_string(seed) + "_b" + std::to_string(B) + "_w" +
             std::to_string(W) + "_k" + std::to_string(params.stages);
    for (auto& ch : c.name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    c.oracle_widths = {W};

    std::vector<Stage> stages;
    if (params.stages == 1) {
        stages.push_back({"d", "o", lane_function(rng)});
    } else {
        stages.push_back({"d", "buf", lane_function(rng)});
        stages.push_back({"buf", "o", lane_function(rng)});
    }
    const std::size_t bug_stage = rng() % stages.size();
    // REL_MUTATION needs a later lane to observe the mutated key
    const std::size_t e = cls == BugClass::RelMutation ? rng() % (B - 1) : rng() % B;
    const std::size_t n = (e + 1) % B;
    const Word spin = rng() % 2;
    c.bug_lane = e;

    std::ostringstream os;
    os << "// corpus case " << c.name << " (seed " << seed << ", class " << bug_class_name(cls) << ")\n";
    os << "const W = " << W << ";\n";
    os << "var d[" << B << "]: W;\n";
    if (stages.size() == 2) os << "var buf[" << B << "]: W;\n";
    os << "var o[" << B << "]: W;\n";
    os << "var key: W;\n";
    if (cls == BugClass::Init) os << "var tmp[" << B << "]: W;\n";
    if (cls == BugClass::Unresponsive) os << "var f: W;\nvar g: W;\n";
    os << "var sd[1]: W;\nvar so[1]: W;\n";

    for (std::size_t s = 0; s < stages.size(); ++s) {
        const Stage& st = stages[s];
        const bool bugged = s == bug_stage && cls != BugClass::None;
        os << "\n%IN_SIZE 1\n%IN_BATCH_SIZE " << B << "\n%BATCH_MEM_IN " << st.in_buf
           << "\n%IN_ALLOC_RULE in(x) = [x : x + 1]\n%REL key\n";
        os << "// ===ACC" << s + 1 << " START===\n";
        auto src = [&](std::size_t j) { return st.in_buf + "[" + std::to_string(j) + "]"; };
        auto dst = [&](std::size_t j) { return st.out_buf + "[" + std::to_string(j) + "]"; };
        if (bugged && cls == BugClass::Init) {
            for (std::size_t j = 0; j < B; ++j)
                if (j != e) os << "tmp[" << j << "] := 0;\n";
            for (std::size_t j = 0; j < B; ++j) os << "tmp[" << j << "] := tmp[" << j << "] + " << src(j) << ";\n";
            c.edit = "tmp[" + std::to_string(e) + "] is never cleared";
        }
        for (std::size_t j = 0; j < B; ++j) {
            std::string x = src(j);
            std::string rhs;
            if (bugged && cls == BugClass::Init) x = "tmp[" + std::to_string(j) + "]";
            if (bugged && cls == BugClass::Indexing && j == e) {
                x = src(n);
                c.edit = dst(e) + " reads " + src(n) + " instead of " + src(e);
            }
            if (bugged && cls == BugClass::CrossLane && j == e) {
                x = "(" + src(e) + " ^ " + src(n) + ")";
                c.edit = dst(e) + " mixes in " + src(n);
            }
            rhs = instantiate(st.f, x);
            if (bugged && cls == BugClass::ConsistentWrong) {
                rhs = "(" + rhs + " + 1)";
                c.edit = "every lane adds 1";
            }
            os << dst(j) << " := " << rhs << ";\n";
            if (bugged && cls == BugClass::RelMutation && j == e) {
                os << "key := key + (" << src(e) << " & 1);\n";
                c.edit = "key advances by the low bit of " + src(e) + " after lane " + std::to_string(e);
            }
            if (bugged && cls == BugClass::Unresponsive && j == e) {
                os << "f := " << src(e) << ";\nwhile (f == " << spin << ") {\n  g := g + 1;\n}\n";
                c.edit = "lane " + std::to_string(e) + " spins while its input is " + std::to_string(spin);
            }
        }
        os << "// ===ACC" << s + 1 << " END===\n";
        os << "%OUT_SIZE 1\n%OUT_BATCH_SIZE " << B << "\n%BATCH_MEM_OUT " << st.out_buf
           << "\n%OUT_ALLOC_RULE out(x) = [x : x + 1]\n";
    }

    std::string spec = "sd[0]";
    for (const Stage& st : stages) spec = instantiate(st.f, spec);
    os << "\n%IN_SIZE 1\n%IN_BATCH_SIZE 1\n%BATCH_MEM_IN sd\n%IN_ALLOC_RULE in(x) = [x : x + 1]\n%REL key\n";
    os << "// ===SPEC START===\nso[0] := " << spec << ";\n// ===SPEC END===\n";
    os << "%OUT_SIZE 1\n%OUT_BATCH_SIZE 1\n%BATCH_MEM_OUT so\n%OUT_ALLOC_RULE out(x) = [x : x + 1]\n";
    c.source = os.str();
    return c;
}

CorpusCase with_width(const CorpusCase& c, unsigned width) {
    CorpusParams p = c.params;
    p.width = width;
    return generate(c.seed, c.cls, p);
}

std::optional<CheckObligation> corpus_obligation(const CorpusCase& c, const std::string& check) {
    ParseOptions po;
    po.rb_mode = c.rb_mode;
    LoadedKernel k = load_kernel(c.source, po);
    const InitPolicy pol = InitPolicy::Symbolic;
    if (check == "intra-fc") return build_intra_fc(k.model, pol);
    if (check == "fc2") return build_fc(k.model, 2, pol);
    if (check == "strong-fc") return build_strong_fc(k.model, pol, false);
    if (check == "fcd") return build_strong_fc(k.model, pol, true);
    if (check == "rb") return build_rb(k.model, k.model->program.code.size(), pol);
    if (check.rfind("sac:", 0) == 0) {
        if (!k.spec) return std::nullopt;
        return build_sac(k.model, *k.spec, std::stoul(check.substr(4)), std::nullopt, pol);
    }
    throw Error(ErrorKind::Config, "unknown corpus check " + check);
}

std::string run_corpus_check(const CorpusCase& c, const std::string& check, Backend backend, const Budget& budget) {
    std::vector<std::string> parts;
    if (check == "sac")
        for (std::size_t j = 0; j < c.params.batch; ++j) parts.push_back("sac:" + std::to_string(j));
    else
        parts.push_back(check);
    bool any_sat = false;
    for (const auto& p : parts) {
        try {
            auto obl = corpus_obligation(c, p);
            if (!obl) return "n/a";
            CheckResult r = aqed::check(*obl, backend, budget);
            if (r.verdict == Verdict::Unknown) return "unknown";
            any_sat |= r.verdict == Verdict::Sat;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::ExplosionCap) return "cap";
            if (e.kind() == ErrorKind::NotApplicable || e.kind() == ErrorKind::StepBudgetExceeded) return "n/a";
            throw;
        }
    }
    return any_sat ? "SAT" : "UNSAT";
}

void compute_expected(CorpusCase& c, const Budget& budget) {
    c.expected.clear();
    for (const auto& chk : corpus_checks()) c.expected[chk] = run_corpus_check(c, chk, Backend::Exhaustive, budget);
}

std::string drb_program(std::uint64_t seed, std::size_t ssa_lines, bool inject, double at_fraction) {
    std::mt19937_64 rng(seed);
    auto build = [&](std::size_t statements) {
        std::mt19937_64 r = rng;
        std::ostringstream os;
        os << "// synthetic straight-line program" << (inject ? " with a spin loop" : "") << "\n";
        os << "var in[4]: 8;\nvar v[8]: 8;\nvar f: 8;\nvar g: 8;\n\n";
        const std::size_t at = static_cast<std::size_t>(static_cast<double>(statements) * at_fraction);
        for (std::size_t s = 0; s < statements; ++s) {
            if (inject && s == at)
                os << "f := in[" << r() % 4 << "] ^ " << r() % 256 << ";\nwhile (f == 0) {\n  g := g + 1;\n}\n";
            const std::size_t a = r() % 8, b = r() % 8, i = r() % 4;
            static const char* ops[] = {"+", "^", "-", "&", "|"};
            os << "v[" << a << "] := (v[" << b << "] " << ops[r() % 5] << " in[" << i << "]) " << ops[r() % 5] << " "
               << r() % 256 << ";\n";
        }
        return os.str();
    };
    ParseOptions po;
    po.rb_mode = true;
    for (std::size_t statements = ssa_lines / 4 + 1;; statements += 8) {
        std::string text = build(statements);
        if (unroll_and_ssa(parse(text, po)).code.size() >= ssa_lines) return text;
    }
}

std::vector<CorpusCase> standard_corpus() {
    std::vector<CorpusCase> out;
    for (BugClass cls : all_bug_classes())
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CorpusParams p;
            p.batch = seed == 3 ? 3 : 4;
            p.width = 2;
            p.stages = seed == 2 ? 2 : 1;
            out.push_back(generate(seed, cls, p));
        }
    return out;
}

std::string manifest_json(const std::vector<CorpusCase>& cases, const std::string& source_dir) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["cases"] = nlohmann::ordered_json::array();
    for (const auto& c : cases) {
        nlohmann::ordered_json e;
        e["name"] = c.name;
        e["seed"] = c.seed;
        e["class"] = std::string(bug_class_name(c.cls));
        e["batch"] = c.params.batch;
        e["width"] = c.params.width;
        e["stages"] = c.params.stages;
        e["rb_mode"] = c.rb_mode;
        e["source"] = (std::filesystem::path(source_dir) / (c.name + ".abk")).string();
        e["edit"] = c.edit;
        e["bug_lane"] = c.bug_lane;
        e["oracle_widths"] = c.oracle_widths;
        e["expected"] = nlohmann::ordered_json(c.expected);
        j["cases"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

std::vector<CorpusCase> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "manifest " + path + ": " + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();
    std::vector<CorpusCase> cases;
    try {
        for (const auto& e : j.at("cases")) {
            CorpusCase c;
            c.name = e.at("name").get<std::string>();
            c.seed = e.at("seed").get<std::uint64_t>();
            auto cls = parse_bug_class(e.at("class").get<std::string>());
            if (!cls) throw Error(ErrorKind::Config, "manifest: unknown class in " + c.name);
            c.cls = *cls;
            c.params.batch = e.at("batch").get<std::size_t>();
            c.params.width = e.at("width").get<unsigned>();
            c.params.stages = e.at("stages").get<std::size_t>();
            c.rb_mode = e.at("rb_mode").get<bool>();
            c.edit = e.value("edit", "");
            c.bug_lane = e.value("bug_lane", std::size_t{0});
            c.oracle_widths = e.value("oracle_widths", std::vector<unsigned>{});
            c.expected = e.at("expected").get<std::map<std::string, std::string>>();
            std::filesystem::path src = e.at("source").get<std::string>();
            if (src.is_relative()) src = base / src.filename();
            std::ifstream f(src);
            if (!f) throw Error(ErrorKind::Config, "manifest: cannot open " + src.string());
            std::stringstream ss;
            ss << f.rdbuf();
            c.source = ss.str();
            cases.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, "manifest " + path + ": " + e.what());
    }
    return cases;
}

} // namespace aqed
