#pragma once

#include "htring/trace.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace htring {

// Offline verification over a run trace. Every check reports the index
// of the first violating record so failures point at evidence.

struct check_failure {
    std::string check;
    std::size_t record_index = 0;
    std::string detail;
};

struct check_report {
    std::vector<check_failure> failures;

    bool ok() const { return failures.empty(); }
    bool ok_for(const std::string& check) const;
    std::string summary() const;
};

// Safety checks:
//  nontriviality     every learned non-null value was submitted by a client
//                    or formed as a batch by a broadcaster
//  agreement         no instance is ever learned with two different values
//  consistency       any two delivery logs agree on their common prefix
//                    (logs reset with the process on a crash)
//  in-order          each learner incarnation executes instances 1,2,3,...
//  at-most-once      no request id is applied twice within one incarnation
//  persist-order     every PHASE 2A / 2A&2B / 2B emission is preceded by the
//                    write of the state it carries
//  conservation      each scheduled delivery is delivered, lost, or dropped
//                    at a crashed node, exactly once (duplicates flagged)
//  sizes             every emitted size equals 128 + payload bytes
//  causality         every delivery references its emission; cause chains
//                    are acyclic back to a spontaneous event
check_report run_checks(const trace& tr);

struct progress_report {
    bool applicable = false;      // a quiescence point and a surviving majority exist
    bool ok = true;
    std::vector<request_id> missing;        // submitted but not executed everywhere
    std::vector<node_id> checked_learners;  // never-crashed learner sites
};

/// Progress: once faults cease, every submitted request must execute at
/// every learner that was never crashed during the run.
progress_report check_progress(const trace& tr, const std::set<request_id>& submitted,
                               std::uint32_t n_acceptors);

}  // namespace htring
