#pragma once

// JSON reports for checks and dRB campaigns, and standalone replay files.

#include "aqed/drb.hpp"
#include "aqed/engine.hpp"

#include <json.hpp>

#include <string>

namespace aqed {

using Json = nlohmann::ordered_json;

Json trace_to_json(const CounterexampleTrace& t);
CounterexampleTrace trace_from_json(const Json& j);

Json stats_to_json(const CheckStats& s);
Json result_to_json(const CheckObligation& obl, const CheckOutcome& outcome, const std::string& target);
Json campaign_to_json(const DrbCampaign& c);

/// Everything needed to rebuild the obligation and replay its witness.
struct ReplayFile {
    std::string kernel_source;
    bool rb_mode = false;
    std::map<std::string, Word> overrides;
    std::string target;  // sub-accelerator name, "system" or a dRB window "W<top>-<bottom>"
    std::string mode;
    std::string policy;
    std::size_t bound = 1;
    std::size_t lane = 0;
    std::size_t window_top = 0, window_bottom = 0;
    CounterexampleTrace trace;
};

Json replay_to_json(const ReplayFile& r);
ReplayFile replay_from_json(const Json& j);

/// Process exit code for an error class: 2 frontend and usage, 4 decomposition,
/// 5 engine, 6 internal.
int exit_code_for(ErrorKind k);

} // namespace aqed
