#pragma once

#include "ouctrl/diagnostics.hpp"
#include "ouctrl/hum.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ouctrl {

struct RunOptions {
    std::string output_dir; // overrides the scenario's output_dir when set
    std::optional<std::uint64_t> seed_override;
    int threads = 1;
    bool emit_fields = false;
};

struct RunResult {
    int exit_code = 0; // 0 pass, 2 negative-result verdict (crashes exit 1 upstream)
    std::string verdict;
    std::string output_dir;
    std::vector<std::string> artifacts;
};

// Parse, validate, and execute one scenario file; writes summary.json, CSV
// tables, optional binary fields, and run_ledger.json into the output dir.
RunResult run_scenario_file(const std::string& path, const RunOptions& opts);

struct ScenarioInfo {
    std::string file;
    std::string name;
    std::string description;
    std::string experiment;
};

std::vector<ScenarioInfo> list_scenarios(const std::string& dir);

} // namespace ouctrl
