#pragma once

#include "htring/core.hpp"
#include "htring/trace.hpp"

#include <map>
#include <string>
#include <vector>

namespace htring {

struct kind_load {
    std::uint64_t msgs_in = 0;
    std::uint64_t msgs_out = 0;
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
};

/// Per-node message and byte accounting. A multicast is charged once at
/// egress and once per ingress delivery; duplicate deliveries count.
struct node_load {
    node_id node = 0;
    std::uint64_t msgs_in = 0;
    std::uint64_t msgs_out = 0;
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
    std::map<msg_kind, kind_load> by_kind;

    std::uint64_t msgs_total() const { return msgs_in + msgs_out; }
    std::uint64_t bytes_total() const { return bytes_in + bytes_out; }
    /// Bytes excluding request/batch dissemination (REQUEST-kind traffic):
    /// the consensus-and-control share, which is payload-size invariant.
    std::uint64_t control_bytes() const;
    std::uint64_t control_msgs() const;
};

std::map<node_id, node_load> aggregate(const trace& tr);

struct busiest {
    node_id node = 0;
    std::uint64_t msgs = 0;
    std::uint64_t bytes = 0;
};

/// Node maximizing in+out messages; ties break on bytes, then on id.
busiest busiest_node(const std::map<node_id, node_load>& loads);

enum class baseline_variant { classical, ring };

struct baseline_cost {
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
};

// Analytic leader cost for R client requests, ring/quorum size m, and
// request payload B, without batching, counting leader in+out traffic at
// 128 bytes of overhead per message.
//
// classical: the leader takes every client request and answers it, and
// runs Phase 2 against m acceptors per decision with the full payload in
// each PHASE 2A (consensus is on requests, not ids):
//   messages = R*(2 + 2m)
//   bytes    = R*[(128+B) + 128 + m*(128+B) + m*128]
//
// ring: the leader still takes every client request and answers it, and
// per decision disseminates the request once by multicast (payload B),
// sends one id-only ring message, receives one, and multicasts LEARNED:
//   messages = 6R
//   bytes    = R*[(128+B) + 128 + (128+B) + 3*128]
baseline_cost baseline_leader_cost(baseline_variant variant, std::uint64_t requests,
                                   std::uint32_t ring_size, std::uint64_t payload_bytes);

/// metrics.csv body: one row per node. Columns:
/// run,node,msgs_in,msgs_out,bytes_in,bytes_out
std::string metrics_csv(const std::string& run_id, const std::map<node_id, node_load>& loads);

/// breakdown.csv body: one row per node per message kind.
std::string breakdown_csv(const std::string& run_id, const std::map<node_id, node_load>& loads);

}  // namespace htring
