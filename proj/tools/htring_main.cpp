#include "htring/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

using namespace htring;

int main(int argc, char** argv) {
    CLI::App app{"htring: ring-consensus protocol core with a deterministic simulation harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    bool emit_plots = false;
    bool check_only = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "scenario config file (JSON)");
        if (needs_config) opt->required();
        cmd->add_option("--seed", seed_override, "override the scenario seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--out-dir", out_dir, "output directory");
        cmd->add_flag("--emit-plots", emit_plots, "write SVG plots next to the CSV");
        cmd->add_flag("--check-only", check_only, "validate the config and exit");
    };

    auto* run_cmd = app.add_subcommand("run", "run one scenario and write trace + metrics");
    add_common(run_cmd, true);

    auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario across an axis of values");
    add_common(sweep_cmd, true);
    std::string axis_name = "requests";
    std::vector<std::uint64_t> axis_values;
    sweep_cmd->add_option("--axis", axis_name, "requests | payload | ring");
    sweep_cmd->add_option("--values", axis_values, "axis values")->delimiter(',');

    auto* replay_cmd = app.add_subcommand("replay", "re-verify a recorded trace offline");
    std::string trace_path;
    replay_cmd->add_option("--trace", trace_path, "trace file")->required();

    CLI11_PARSE(app, argc, argv);

    if (replay_cmd->parsed()) {
        auto r = replay_file(trace_path);
        std::printf("%s\n", r.detail.c_str());
        return r.exit_code;
    }

    auto parsed = load_scenario_file(config_path);
    if (!parsed.value) {
        std::fprintf(stderr, "config error: %s\n", parsed.error.c_str());
        return 1;
    }
    scenario s = *parsed.value;
    if (seed_set) s.seed = seed_override;
    if (check_only) {
        std::printf("config ok: %s\n", s.name.c_str());
        return 0;
    }

    if (run_cmd->parsed()) {
        auto r = run_scenario(s);
        write_run_outputs(r, out_dir);
        std::printf("%s", r.summary_text().c_str());
        return r.exit_code;
    }

    // sweep
    sweep_axis axis;
    if (axis_name == "requests") {
        axis = sweep_axis::requests;
    } else if (axis_name == "payload") {
        axis = sweep_axis::payload;
    } else if (axis_name == "ring") {
        axis = sweep_axis::ring;
    } else {
        std::fprintf(stderr, "usage error: unknown axis \"%s\"\n", axis_name.c_str());
        return 1;
    }
    if (axis_values.empty()) {
        std::fprintf(stderr, "usage error: --values must list at least one axis value\n");
        return 1;
    }
    auto r = run_sweep(s, axis, axis_values);
    if (r.exit_code != 0) {
        std::fprintf(stderr, "%s\n", r.error.c_str());
        return r.exit_code;
    }
    write_sweep_outputs(r, axis, out_dir, emit_plots);
    std::printf("sweep ok: %zu points written to %s/sweep.csv\n", r.points.size(),
                out_dir.c_str());
    return 0;
}
