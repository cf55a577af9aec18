#pragma once

#include "htring/protocol.hpp"
#include "htring/simnet.hpp"

#include <optional>
#include <string>
#include <vector>

namespace htring {

// Scenario configuration: a JSON file with a fixed schema (documented in
// the README). Unknown keys are rejected so an experiment never silently
// runs with a misspelled knob.

struct client_schedule {
    std::uint32_t count = 1;           // number of clients
    std::uint64_t requests = 1;        // total requests, round-robin over clients
    std::uint64_t payload_bytes = 0;
    tick_t arrival_start = 1;
    tick_t arrival_interval = 1;
    target_policy policy = target_policy::random_coordinator;
    node_id specific = 0;
};

struct scenario {
    std::string name = "scenario";
    std::uint32_t n_acceptors = 3;
    std::uint32_t lans = 1;
    std::vector<node_id> colocated_learners;  // acceptor sites that also host a learner
    std::uint32_t standalone_learners = 1;
    client_schedule clients;
    fault_profile faults;
    protocol_knobs knobs;
    tick_t client_retry = 150;
    std::uint64_t seed = 1;
    tick_t run_length = 10000;

    /// World layout derived from the scenario: acceptors are 1..n,
    /// learner-only sites follow, then clients.
    world_config to_world_config() const;
    std::vector<submit_spec> submissions() const;
    std::vector<node_id> client_ids() const;
};

/// Parses and validates; returns the violated constraint on error.
struct scenario_parse_result {
    std::optional<scenario> value;
    std::string error;
};

scenario_parse_result parse_scenario_json(const std::string& text);
scenario_parse_result load_scenario_file(const std::string& path);
std::string scenario_to_json(const scenario& s);

/// Validation shared by the parser and programmatic construction.
std::optional<std::string> validate_scenario(const scenario& s);

}  // namespace htring
