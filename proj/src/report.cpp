#include "aqed/report.hpp"

#include "aqed/error.hpp"

namespace aqed {

namespace {

Json state_to_json(const MachineState& s) { return Json{{"control", s.control}, {"memory", s.memory}}; }

MachineState state_from_json(const Json& j) {
    MachineState s;
    s.control = j.at("control").get<ControlId>();
    s.memory = j.at("memory").get<std::vector<Word>>();
    return s;
}

} // namespace

Json trace_to_json(const CounterexampleTrace& t) {
    Json j;
    j["mode"] = std::string(mode_name(t.mode));
    j["batch_index"] = t.batch_index;
    j["lane"] = t.lane;
    j["lane_prime"] = t.lane_prime;
    j["steps"] = t.steps ? Json(*t.steps) : Json(nullptr);
    j["description"] = t.description;
    j["initial_states"] = Json::array();
    for (const auto& s : t.initial_states) j["initial_states"].push_back(state_to_json(s));
    j["batches"] = Json::array();
    for (const auto& copy : t.batches) {
        Json jc = Json::array();
        for (const auto& b : copy) {
            Json jb = Json::array();
            for (const auto& l : b.lanes) jb.push_back(Json{{"action", l.action}, {"data", l.data}});
            jc.push_back(std::move(jb));
        }
        j["batches"].push_back(std::move(jc));
    }
    j["outputs"] = Json::array();
    for (const auto& run : t.runs) j["outputs"].push_back(run.outputs);
    j["monitor_log"] = t.monitor_log;
    return j;
}

CounterexampleTrace trace_from_json(const Json& j) {
    CounterexampleTrace t;
    try {
        auto mode = parse_mode(j.at("mode").get<std::string>());
        if (!mode) throw Error(ErrorKind::Config, "trace: unknown mode");
        t.mode = *mode;
        t.batch_index = j.at("batch_index").get<std::size_t>();
        t.lane = j.at("lane").get<std::size_t>();
        t.lane_prime = j.at("lane_prime").get<std::size_t>();
        if (j.contains("steps") && !j["steps"].is_null()) t.steps = j["steps"].get<std::size_t>();
        t.description = j.value("description", "");
        for (const auto& s : j.at("initial_states")) t.initial_states.push_back(state_from_json(s));
        for (const auto& jc : j.at("batches")) {
            std::vector<InputBatch> copy;
            for (const auto& jb : jc) {
                InputBatch b;
                for (const auto& jl : jb) b.lanes.push_back(Lane{jl.at("action").get<Word>(), jl.at("data").get<std::vector<Word>>()});
                copy.push_back(std::move(b));
            }
            t.batches.push_back(std::move(copy));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("trace: ") + e.what());
    }
    return t;
}

Json stats_to_json(const CheckStats& s) {
    return Json{{"terms", s.terms},         {"vars", s.vars},           {"clauses", s.clauses},
                {"decisions", s.decisions}, {"conflicts", s.conflicts}, {"propagations", s.propagations},
                {"restarts", s.restarts},   {"cases", s.cases},         {"seconds", s.seconds}};
}

Json result_to_json(const CheckObligation& obl, const CheckOutcome& o, const std::string& target) {
    Json j;
    j["target"] = target;
    j["mode"] = std::string(mode_name(obl.mode));
    j["policy"] = std::string(policy_name(obl.policy));
    if (obl.mode == CheckMode::SAC) j["lane"] = obl.lane;
    if (obl.mode == CheckMode::FC || obl.mode == CheckMode::RB) j["bound"] = obl.bound;
    if (o.error) {
        j["verdict"] = "ERROR";
        j["error"] = std::string(error_class_name(*o.error));
        j["message"] = o.message;
        return j;
    }
    const CheckResult& r = *o.result;
    j["verdict"] = std::string(verdict_name(r.verdict));
    j["backend"] = r.backend == Backend::Sat ? "sat" : "oracle";
    if (r.verdict == Verdict::Unknown) j["unknown_cause"] = r.unknown_cause;
    j["stats"] = stats_to_json(r.stats);
    if (r.trace) j["trace"] = trace_to_json(*r.trace);
    return j;
}

Json campaign_to_json(const DrbCampaign& c) {
    Json j;
    j["lines"] = c.lines;
    j["bound"] = c.bound;
    j["delta"] = c.state.delta;
    j["outcome"] = c.failed ? "RB violation" : c.reached_end ? "end of code" : "stopped";
    j["seconds"] = c.seconds;
    j["windows"] = Json::array();
    for (const auto& r : c.state.history) {
        Json w;
        w["top"] = r.top;
        w["bottom"] = r.bottom;
        w["covered_top"] = r.covered_top;
        w["covered_bottom"] = r.covered_bottom;
        w["phase"] = std::string(phase_name(r.phase));
        w["verdict"] = r.verdict ? Json(std::string(verdict_name(*r.verdict))) : Json("NO_INTERFACE");
        if (r.verdict == Verdict::Unknown) w["unknown_cause"] = r.unknown_cause;
        w["inputs"] = r.inputs;
        w["outputs"] = r.outputs;
        w["seconds"] = r.seconds;
        j["windows"].push_back(std::move(w));
    }
    std::size_t covered = 0;
    for (bool b : c.coverage()) covered += b;
    j["covered_lines"] = covered;
    if (c.failing && c.failing_result && c.failing_result->trace) {
        Json f;
        f["window"] = c.failing->model->name;
        f["inputs"] = c.failing->input_names;
        f["outputs"] = c.failing->output_names;
        f["trace"] = trace_to_json(*c.failing_result->trace);
        j["witness"] = std::move(f);
    }
    return j;
}

Json replay_to_json(const ReplayFile& r) {
    Json j;
    j["kind"] = "replay";
    j["target"] = r.target;
    j["mode"] = r.mode;
    j["policy"] = r.policy;
    j["bound"] = r.bound;
    j["lane"] = r.lane;
    if (r.window_top) j["window"] = {r.window_top, r.window_bottom};
    j["rb_mode"] = r.rb_mode;
    j["overrides"] = r.overrides;
    j["kernel_source"] = r.kernel_source;
    j["trace"] = trace_to_json(r.trace);
    return j;
}

ReplayFile replay_from_json(const Json& j) {
    ReplayFile r;
    try {
        if (j.value("kind", "") != "replay") throw Error(ErrorKind::Config, "not a replay file");
        r.target = j.at("target").get<std::string>();
        r.mode = j.at("mode").get<std::string>();
        r.policy = j.at("policy").get<std::string>();
        r.bound = j.at("bound").get<std::size_t>();
        r.lane = j.at("lane").get<std::size_t>();
        if (j.contains("window")) {
            r.window_top = j["window"].at(0).get<std::size_t>();
            r.window_bottom = j["window"].at(1).get<std::size_t>();
        }
        r.rb_mode = j.at("rb_mode").get<bool>();
        r.overrides = j.at("overrides").get<std::map<std::string, Word>>();
        r.kernel_source = j.at("kernel_source").get<std::string>();
        r.trace = trace_from_json(j.at("trace"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("replay file: ") + e.what());
    }
    return r;
}

int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::Syntax:
    case ErrorKind::Annotation:
    case ErrorKind::Bound:
    case ErrorKind::Region:
    case ErrorKind::UnrollCap:
    case ErrorKind::Config: return 2;
    case ErrorKind::Wiring:
    case ErrorKind::Composability: return 4;
    case ErrorKind::StepBudgetExceeded:
    case ErrorKind::ExplosionCap:
    case ErrorKind::NotApplicable:
    case ErrorKind::Spec:
    case ErrorKind::ReplayMismatch:
    case ErrorKind::EmptyInterface: return 5;
    case ErrorKind::Internal: return 6;
    }
    return 6;
}

} // namespace aqed
