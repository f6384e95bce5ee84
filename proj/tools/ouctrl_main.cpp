#include "ouctrl/scenario.hpp"
#include "ouctrl/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"ouctrl: spectral simulation and control synthesis for diffusive and "
                 "hypoelliptic evolution equations with moving control supports"};
    app.set_version_flag("--version", ouctrl::kToolVersion);
    app.require_subcommand(1);

    // run ------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "execute a scenario file");
    std::string scenario_file;
    ouctrl::RunOptions opts;
    std::uint64_t seed_value = 0;
    bool seed_set = false;
    run->add_option("scenario", scenario_file, "scenario JSON file")->required();
    run->add_option("--output-dir", opts.output_dir, "override the scenario output directory");
    run->add_option("--seed", seed_value, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--threads", opts.threads, "worker threads for parallel sections")
        ->default_val(1);
    run->add_flag("--emit-fields", opts.emit_fields, "write binary field dumps");

    // list -----------------------------------------------------------------
    auto* list = app.add_subcommand("list", "list shipped scenarios");
    std::string scenario_dir = "scenarios";
    bool as_json = false;
    list->add_option("--dir", scenario_dir, "scenario directory")->capture_default_str();
    list->add_flag("--json", as_json, "machine-readable listing");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (seed_set) opts.seed_override = seed_value;
            auto result = ouctrl::run_scenario_file(scenario_file, opts);
            std::printf("verdict: %s\n", result.verdict.c_str());
            std::printf("outputs: %s\n", result.output_dir.c_str());
            for (const auto& artifact : result.artifacts)
                std::printf("  %s\n", artifact.c_str());
            return result.exit_code;
        }
        if (list->parsed()) {
            auto infos = ouctrl::list_scenarios(scenario_dir);
            if (as_json) {
                nlohmann::ordered_json j = nlohmann::ordered_json::array();
                for (const auto& info : infos)
                    j.push_back({{"file", info.file},
                                 {"name", info.name},
                                 {"experiment", info.experiment},
                                 {"description", info.description}});
                std::cout << j.dump(2) << "\n";
            } else {
                for (const auto& info : infos)
                    std::printf("%-36s %-11s %s\n", info.name.c_str(),
                                info.experiment.c_str(), info.description.c_str());
            }
            return 0;
        }
    } catch (const ouctrl::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
