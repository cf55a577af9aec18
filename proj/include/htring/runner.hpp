#pragma once

#include "htring/checks.hpp"
#include "htring/metrics.hpp"
#include "htring/scenario.hpp"
#include "htring/simnet.hpp"

#include <map>
#include <optional>
#include <string>

namespace htring {

struct run_result {
    scenario scn;
    trace tr;
    check_report checks;
    progress_report progress;
    std::map<node_id, node_load> loads;
    busiest busy;
    std::optional<std::uint32_t> latency_hops;    // instance 1 at the measured learner
    std::optional<std::uint32_t> response_hops1;  // first submitted request
    std::uint64_t learned_instances = 0;
    std::set<request_id> submitted;
    std::optional<std::string> fault;
    bool drained = false;
    std::uint64_t events = 0;
    int exit_code = 0;  // 0 ok, 2 safety violation, 3 progress failure

    std::string summary_text() const;
};

/// Deterministic full run of one scenario plus all offline checks.
run_result run_scenario(const scenario& s);

/// Writes trace.txt, metrics.csv, breakdown.csv, summary.csv and
/// summary.txt under out_dir (atomically, via rename).
void write_run_outputs(const run_result& r, const std::string& out_dir);

enum class sweep_axis { requests, payload, ring };

struct sweep_point {
    std::uint64_t axis_value = 0;
    std::uint64_t leader_msgs = 0;
    std::uint64_t leader_bytes = 0;
    baseline_cost classical;
    baseline_cost ring;
    int exit_code = 0;
};

struct sweep_result {
    std::vector<sweep_point> points;
    int exit_code = 0;
    std::string error;

    std::string csv() const;
};

/// One run per axis value with a deterministically derived seed; any
/// safety failure aborts the sweep.
sweep_result run_sweep(const scenario& base, sweep_axis axis,
                       const std::vector<std::uint64_t>& values);

void write_sweep_outputs(const sweep_result& r, sweep_axis axis, const std::string& out_dir,
                         bool emit_plots);

struct replay_result {
    int exit_code = 0;  // 0 ok, 1 parse error, 2 check failure
    std::string detail;
};

/// Re-checks all trace invariants offline, without re-simulating.
replay_result replay_file(const std::string& path);

struct crash_sweep_result {
    std::uint64_t points = 0;
    bool all_safe = true;
    bool all_learned = true;
    std::vector<std::string> failures;
};

/// Runs the scenario once per event index, crashing (and later
/// restarting) the victim immediately before that event fires.
crash_sweep_result run_crash_sweep(const scenario& base, node_id victim, tick_t restart_delay);

}  // namespace htring
