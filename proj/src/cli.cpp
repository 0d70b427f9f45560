#include "aqed/cli.hpp"

#include "aqed/corpus.hpp"
#include "aqed/error.hpp"
#include "aqed/kernel.hpp"
#include "aqed/monitor.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace aqed {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
    out << text;
}

std::map<std::string, Word> effective_overrides(const RunConfig& cfg) {
    auto o = cfg.overrides;
    if (cfg.width) o["W"] = *cfg.width;
    if (cfg.batch) o["B"] = *cfg.batch;
    return o;
}

ParseOptions parse_options(const RunConfig& cfg, bool rb_mode) {
    ParseOptions po;
    po.rb_mode = rb_mode;
    po.overrides = effective_overrides(cfg);
    return po;
}

// Parses and rejects overrides that name no constant of the kernel.
AbkProgram parse_checked(const std::string& text, const ParseOptions& po) {
    AbkProgram p = parse(text, po);
    for (const auto& [name, value] : po.overrides)
        if (!p.constants.count(name))
            throw Error(ErrorKind::Config, "kernel declares no constant " + name + " to override" +
                                               (name == "W" ? " (--width)" : name == "B" ? " (--batch)" : ""));
    return p;
}

LoadedKernel load_checked(const std::string& text, const ParseOptions& po) {
    parse_checked(text, po);
    return load_kernel(text, po);
}

Json error_json(const Error& e) { return Json{{"class", std::string(error_class_name(e.kind()))}, {"message", e.what()}}; }

CommandResult fail(CommandResult r, const Error& e) {
    r.exit_code = exit_code_for(e.kind());
    r.report["error"] = error_json(e);
    r.report["exit_code"] = r.exit_code;
    r.text += std::string("error: ") + e.what() + "\n";
    return r;
}

std::string safe_name(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s;
}

std::string trace_directory(const RunConfig& cfg) {
    if (!cfg.trace_dir.empty()) return cfg.trace_dir;
    if (!cfg.report_path.empty()) {
        fs::path p(cfg.report_path);
        return (p.has_parent_path() ? p.parent_path() : fs::path(".")).string();
    }
    return {};
}

struct Job {
    std::string target;
    bool sub_accelerator = false;
    CheckObligation obl;
};

std::string seconds(double s) {
    std::ostringstream os;
    os.precision(3);
    os << std::fixed << s << "s";
    return os.str();
}

} // namespace

CommandResult cmd_check(const RunConfig& cfg) {
    CommandResult r;
    r.report["tool"] = "aqed";
    r.report["kind"] = "check";
    try {
        if (cfg.inputs.size() != 1) throw Error(ErrorKind::Config, "check takes exactly one kernel file");
        if (cfg.modes.empty()) throw Error(ErrorKind::Config, "no check mode selected");
        const std::string path = cfg.inputs[0];
        r.report["input"] = path;
        r.report["backend"] = cfg.backend == Backend::Sat ? "sat" : "oracle";
        r.report["policy"] = std::string(policy_name(cfg.policy));
        r.report["modes"] = cfg.modes;
        r.report["overrides"] = effective_overrides(cfg);
        const std::string text = read_file(path);
        const ParseOptions po = parse_options(cfg, cfg.rb_mode);
        LoadedKernel k = load_checked(text, po);

        Json plan_j;
        plan_j["total"] = k.plan.total();
        plan_j["parallel"] = k.plan.parallel();
        plan_j["stages"] = k.plan.stages.size();
        plan_j["sub_accelerators"] = Json::array();
        for (const auto& m : k.plan.sub_models)
            plan_j["sub_accelerators"].push_back(Json{{"name", m->name},
                                                      {"batch_size", m->batch_size},
                                                      {"in_words", m->in_words},
                                                      {"out_words", m->out_words},
                                                      {"relevant_cells", m->layout.relevant.size()},
                                                      {"instructions", m->program.code.size()}});
        r.report["plan"] = plan_j;

        std::vector<Job> jobs;
        Json skipped = Json::array();
        for (const auto& mode_s : cfg.modes) {
            auto mode = parse_mode(mode_s);
            if (!mode) throw Error(ErrorKind::Config, "unknown mode " + mode_s);
            switch (*mode) {
            case CheckMode::IntraFC:
            case CheckMode::FC:
            case CheckMode::StrongFC:
            case CheckMode::StrongFCD:
                for (const auto& m : k.plan.sub_models) {
                    if (*mode == CheckMode::IntraFC && m->batch_size < 2) {
                        skipped.push_back(Json{{"target", m->name}, {"mode", mode_s}, {"reason", "batch size 1"}});
                        continue;
                    }
                    CheckObligation o = *mode == CheckMode::IntraFC ? build_intra_fc(m, cfg.policy)
                                        : *mode == CheckMode::FC    ? build_fc(m, cfg.fc_bound, cfg.policy)
                                                                    : build_strong_fc(m, cfg.policy, *mode == CheckMode::StrongFCD);
                    jobs.push_back(Job{m->name, true, std::move(o)});
                }
                break;
            case CheckMode::SAC: {
                if (!k.spec) throw Error(ErrorKind::Spec, "kernel has no SPEC block");
                std::vector<std::size_t> lanes;
                if (cfg.lane)
                    lanes.push_back(*cfg.lane);
                else
                    for (std::size_t j = 0; j < k.model->batch_size; ++j) lanes.push_back(j);
                for (std::size_t j : lanes) jobs.push_back(Job{"system", false, build_sac(k.model, *k.spec, j, std::nullopt, cfg.policy)});
                break;
            }
            case CheckMode::RB: {
                const std::size_t n = cfg.rb_bound ? *cfg.rb_bound : k.model->program.code.size();
                jobs.push_back(Job{"system", false, build_rb(k.model, n, cfg.policy)});
                break;
            }
            }
        }
        r.report["skipped"] = skipped;

        if (!cfg.dimacs_dir.empty())
            for (const auto& j : jobs) {
                std::string name = j.target + "_" + std::string(mode_name(j.obl.mode));
                if (j.obl.mode == CheckMode::SAC) name += "_lane" + std::to_string(j.obl.lane);
                std::ostringstream os;
                try {
                    export_dimacs(encode(j.obl, cfg.budget.unroll_cap), os);
                } catch (const Error& e) {
                    os.str("");
                    os << "c not exported: " << e.what() << "\n";
                }
                write_file(fs::path(cfg.dimacs_dir) / (safe_name(name) + ".cnf"), os.str());
            }

        std::vector<CheckObligation> obls;
        for (const auto& j : jobs) obls.push_back(j.obl);
        std::vector<CheckOutcome> outcomes = check_each(obls, cfg.backend, cfg.budget, cfg.threads);

        bool any_sat = false, any_unknown = false;
        std::optional<ErrorKind> first_error;
        std::map<std::string, std::pair<bool, bool>> per_target;  // name -> (completed, buggy)
        for (const auto& m : k.plan.sub_models) per_target[m->name] = {true, false};
        const std::string tdir = trace_directory(cfg);
        r.report["results"] = Json::array();
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            CheckOutcome& o = outcomes[i];
            const Job& job = jobs[i];
            std::string label = job.target + " " + std::string(mode_name(job.obl.mode));
            if (job.obl.mode == CheckMode::SAC) label += " lane " + std::to_string(job.obl.lane);
            const bool na = o.error && *o.error == ErrorKind::NotApplicable;
            if (o.result && o.result->trace && cfg.minimize && o.result->verdict == Verdict::Sat &&
                job.obl.mode != CheckMode::RB)
                o.result->trace = minimize(*o.result->trace, job.obl);
            Json jr = result_to_json(job.obl, o, job.target);
            if (na) jr["verdict"] = "NOT_APPLICABLE";
            if (o.error && !na) {
                first_error = first_error ? first_error : o.error;
                if (job.sub_accelerator) per_target[job.target].first = false;
                r.text += label + ": " + o.message + "\n";
            } else if (na) {
                r.text += label + ": not applicable (" + o.message + ")\n";
            } else {
                const CheckResult& res = *o.result;
                r.text += label + ": " + std::string(verdict_name(res.verdict)) + " " + seconds(res.stats.seconds);
                if (res.verdict == Verdict::Unknown) {
                    any_unknown = true;
                    r.text += " (" + res.unknown_cause + ")";
                    if (job.sub_accelerator) per_target[job.target].first = false;
                }
                r.text += "\n";
                if (res.verdict == Verdict::Sat) {
                    any_sat = true;
                    if (job.sub_accelerator) per_target[job.target].second = true;
                    if (res.trace) {
                        r.text += "  " + res.trace->description + "\n";
                        if (is_fc_family(job.obl.mode)) {
                            MonitorVerdict mv = replay_monitor(*res.trace, job.obl, true);
                            jr["monitor"] = Json{{"dup_done", mv.dup_done}, {"fc_check", mv.fc_check}};
                        }
                        if (!tdir.empty()) {
                            ReplayFile rf;
                            rf.kernel_source = text;
                            rf.rb_mode = cfg.rb_mode;
                            rf.overrides = effective_overrides(cfg);
                            rf.target = job.target;
                            rf.mode = std::string(mode_name(job.obl.mode));
                            rf.policy = std::string(policy_name(job.obl.policy));
                            rf.bound = job.obl.bound;
                            rf.lane = job.obl.lane;
                            rf.trace = *res.trace;
                            std::string name = safe_name(job.target) + "_" + rf.mode;
                            if (job.obl.mode == CheckMode::SAC) name += "_lane" + std::to_string(job.obl.lane);
                            const fs::path tp = fs::path(tdir) / (fs::path(path).stem().string() + "." + name + ".trace.json");
                            write_file(tp, replay_to_json(rf).dump(2) + "\n");
                            jr["trace_file"] = tp.string();
                            r.text += "  trace written to " + tp.string() + "\n";
                        }
                    }
                }
            }
            r.report["results"].push_back(std::move(jr));
        }
        std::size_t completed = 0, buggy = 0;
        for (const auto& [name, st] : per_target) {
            completed += st.first;
            buggy += st.second;
        }
        r.report["counts"] = Json{{"T", k.plan.total()}, {"P", k.plan.parallel()}, {"C", completed}, {"B", buggy}};
        r.text += "T=" + std::to_string(k.plan.total()) + " P=" + std::to_string(k.plan.parallel()) +
                  " C=" + std::to_string(completed) + " B=" + std::to_string(buggy) + "\n";
        r.exit_code = any_sat ? 1 : first_error ? exit_code_for(*first_error) : any_unknown ? 3 : 0;
        r.report["exit_code"] = r.exit_code;
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

CommandResult cmd_rb(const RunConfig& cfg) {
    CommandResult r;
    r.report["tool"] = "aqed";
    r.report["kind"] = "rb";
    try {
        if (cfg.inputs.size() != 1) throw Error(ErrorKind::Config, "rb takes exactly one kernel file");
        if (!cfg.rb_bound) throw Error(ErrorKind::Config, "rb needs --bound");
        const std::string path = cfg.inputs[0];
        r.report["input"] = path;
        r.report["window"] = cfg.window;
        const std::string text = read_file(path);
        const ParseOptions po = parse_options(cfg, true);
        SsaProgram ssa = unroll_and_ssa(parse_checked(text, po));
        DrbOptions opts;
        opts.bound = *cfg.rb_bound;
        opts.delta = cfg.delta;
        opts.window = cfg.window;
        opts.budget = cfg.budget;
        DrbCampaign c = slide(ssa, opts);
        r.report["campaign"] = campaign_to_json(c);
        for (const auto& w : c.state.history)
            r.text += "lines " + std::to_string(w.covered_top) + ".." + std::to_string(w.covered_bottom) + " " +
                      std::string(phase_name(w.phase)) + " " +
                      (w.verdict ? std::string(verdict_name(*w.verdict)) : std::string("no interface")) + " " +
                      seconds(w.seconds) + "\n";
        bool any_unknown = false;
        for (const auto& w : c.state.history) any_unknown |= w.verdict == Verdict::Unknown;
        if (c.failed) {
            r.text += "RB violation in " + c.failing->model->name + "\n";
            if (c.failing_result->trace) {
                r.text += "  " + c.failing_result->trace->description + "\n";
                const std::string tdir = trace_directory(cfg);
                if (!tdir.empty()) {
                    ReplayFile rf;
                    rf.kernel_source = text;
                    rf.rb_mode = true;
                    rf.overrides = effective_overrides(cfg);
                    rf.target = c.failing->model->name;
                    rf.mode = "rb";
                    rf.policy = std::string(policy_name(c.failing_obligation->policy));
                    rf.bound = c.failing_obligation->bound;
                    rf.window_top = c.failing->top;
                    rf.window_bottom = c.failing->bottom;
                    rf.trace = *c.failing_result->trace;
                    const fs::path tp = fs::path(tdir) / (fs::path(path).stem().string() + "." + rf.target + ".trace.json");
                    write_file(tp, replay_to_json(rf).dump(2) + "\n");
                    r.report["campaign"]["witness"]["trace_file"] = tp.string();
                    r.text += "  trace written to " + tp.string() + "\n";
                }
            }
        } else {
            r.text += c.reached_end ? "reached end of code, no RB violation found\n" : "campaign stopped\n";
        }
        r.exit_code = c.failed ? 1 : any_unknown ? 3 : 0;
        r.report["exit_code"] = r.exit_code;
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

CommandResult cmd_plan(const RunConfig& cfg) {
    CommandResult r;
    r.report["tool"] = "aqed";
    r.report["kind"] = "plan";
    try {
        if (cfg.inputs.size() != 1) throw Error(ErrorKind::Config, "plan takes exactly one kernel file");
        LoadedKernel k = load_checked(read_file(cfg.inputs[0]), parse_options(cfg, cfg.rb_mode));
        r.text = plan_report(k.plan);
        r.report["input"] = cfg.inputs[0];
        r.report["counts"] = Json{{"T", k.plan.total()}, {"P", k.plan.parallel()}};
        r.report["stages"] = k.plan.stages.size();
        r.report["exit_code"] = 0;
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

CommandResult cmd_ssa(const RunConfig& cfg) {
    CommandResult r;
    try {
        if (cfg.inputs.size() != 1) throw Error(ErrorKind::Config, "ssa takes exactly one kernel file");
        r.text = unroll_and_ssa(parse_checked(read_file(cfg.inputs[0]), parse_options(cfg, cfg.rb_mode))).dump();
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

CommandResult cmd_replay(const RunConfig& cfg) {
    CommandResult r;
    r.report["tool"] = "aqed";
    r.report["kind"] = "replay";
    try {
        if (cfg.inputs.size() != 1) throw Error(ErrorKind::Config, "replay takes exactly one trace file");
        Json j;
        try {
            j = Json::parse(read_file(cfg.inputs[0]));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Config, std::string("replay file: ") + e.what());
        }
        ReplayFile rf = replay_from_json(j);
        ParseOptions po;
        po.rb_mode = rf.rb_mode;
        po.overrides = rf.overrides;
        auto mode = parse_mode(rf.mode);
        auto policy = parse_policy(rf.policy);
        if (!mode || !policy) throw Error(ErrorKind::Config, "replay file names an unknown mode or policy");

        std::optional<CheckObligation> obl;
        if (rf.window_top) {
            SsaProgram ssa = unroll_and_ssa(parse(rf.kernel_source, po));
            WindowState w;
            w.top_line = rf.window_top;
            w.bottom_line = rf.window_bottom;
            obl = build_rb(window_to_submodel(ssa, w).model, rf.bound, *policy);
        } else {
            LoadedKernel k = load_kernel(rf.kernel_source, po);
            ModelPtr m;
            if (rf.target == "system") {
                m = k.model;
            } else {
                for (const auto& s : k.plan.sub_models)
                    if (s->name == rf.target) m = s;
            }
            if (!m) throw Error(ErrorKind::Config, "replay target " + rf.target + " not found in the kernel");
            switch (*mode) {
            case CheckMode::IntraFC: obl = build_intra_fc(m, *policy); break;
            case CheckMode::FC: obl = build_fc(m, rf.bound, *policy); break;
            case CheckMode::StrongFC: obl = build_strong_fc(m, *policy, false); break;
            case CheckMode::StrongFCD: obl = build_strong_fc(m, *policy, true); break;
            case CheckMode::SAC:
                if (!k.spec) throw Error(ErrorKind::Spec, "kernel has no SPEC block");
                obl = build_sac(m, *k.spec, rf.lane, std::nullopt, *policy);
                break;
            case CheckMode::RB: obl = build_rb(m, rf.bound, *policy); break;
            }
        }
        const bool confirmed = confirms(*obl, rf.trace);
        r.report["target"] = rf.target;
        r.report["mode"] = rf.mode;
        r.report["confirmed"] = confirmed;
        r.text += std::string("replay ") + (confirmed ? "reproduces" : "does not reproduce") + " the " + rf.mode +
                  " violation on " + rf.target + "\n";
        if (is_fc_family(*mode)) {
            MonitorVerdict mv = replay_monitor(rf.trace, *obl, false);
            r.report["monitor"] = Json{{"dup_done", mv.dup_done}, {"fc_check", mv.fc_check}, {"log", mv.log}};
            for (const auto& line : mv.log) r.text += "  " + line + "\n";
            r.text += std::string("monitor: dup_done=") + (mv.dup_done ? "1" : "0") +
                      " fc_check=" + (mv.fc_check ? "1" : "0") + "\n";
            if (!mv.fc_check) throw Error(ErrorKind::ReplayMismatch, "monitor did not raise fc_check");
        }
        if (!confirmed) throw Error(ErrorKind::ReplayMismatch, "trace does not replay as a violation");
        r.report["exit_code"] = 0;
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

CommandResult cmd_corpus_run(const RunConfig& cfg) {
    CommandResult r;
    r.report["tool"] = "aqed";
    r.report["kind"] = "corpus";
    try {
        if (cfg.inputs.size() != 1) throw Error(ErrorKind::Config, "corpus run needs --manifest");
        r.report["manifest"] = cfg.inputs[0];
        r.report["backend"] = cfg.backend == Backend::Sat ? "sat" : "oracle";
        std::vector<CorpusCase> cases = read_manifest(cfg.inputs[0]);
        std::size_t agree = 0, disagree = 0, unchecked = 0;
        r.report["cases"] = Json::array();
        for (CorpusCase c : cases) {
            const unsigned base_width = c.params.width;
            if (cfg.width) {
                auto expected = c.expected;
                c = with_width(c, *cfg.width);
                c.expected = std::move(expected);
            }
            Json jc;
            jc["name"] = c.name;
            jc["class"] = std::string(bug_class_name(c.cls));
            jc["width"] = c.params.width;
            jc["expected_width"] = base_width;
            jc["checks"] = Json::object();
            r.text += c.name + ":";
            for (const auto& chk : corpus_checks()) {
                if (!cfg.modes.empty() && std::find(cfg.modes.begin(), cfg.modes.end(), chk) == cfg.modes.end())
                    continue;
                auto it = c.expected.find(chk);
                const std::string want = it == c.expected.end() ? "" : it->second;
                if (want != "SAT" && want != "UNSAT") {
                    ++unchecked;
                    continue;
                }
                const std::string got = run_corpus_check(c, chk, cfg.backend, cfg.budget);
                const bool ok = got == want;
                (ok ? agree : disagree) += 1;
                jc["checks"][chk] = Json{{"expected", want}, {"got", got}, {"agree", ok}};
                r.text += " " + chk + "=" + got + (ok ? "" : "(expected " + want + ")");
            }
            r.text += "\n";
            r.report["cases"].push_back(std::move(jc));
        }
        r.report["agree"] = agree;
        r.report["disagree"] = disagree;
        r.report["not_checked"] = unchecked;
        r.text += std::to_string(agree) + " agree, " + std::to_string(disagree) + " disagree\n";
        r.exit_code = disagree ? 1 : 0;
        r.report["exit_code"] = r.exit_code;
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

CommandResult cmd_corpus_generate(const RunConfig& cfg) {
    CommandResult r;
    try {
        if (cfg.out_dir.empty()) throw Error(ErrorKind::Config, "corpus generate needs --out");
        std::vector<CorpusCase> cases = standard_corpus();
        for (auto& c : cases) {
            compute_expected(c, cfg.budget);
            write_file(fs::path(cfg.out_dir) / (c.name + ".abk"), c.source);
            r.text += c.name + "\n";
        }
        write_file(fs::path(cfg.out_dir) / "manifest.json", manifest_json(cases, "."));
        r.text += std::to_string(cases.size()) + " cases written to " + cfg.out_dir + "\n";
        return r;
    } catch (const Error& e) {
        return fail(std::move(r), e);
    }
}

void write_report(const RunConfig& cfg, const CommandResult& r) {
    if (cfg.report_path.empty() || r.report.is_null()) return;
    write_file(cfg.report_path, r.report.dump(2) + "\n");
}

} // namespace aqed
