#pragma once

#include "htring/core.hpp"
#include "htring/storage.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace htring {

// Newline-delimited run trace. One record per line, stable field order,
// fully deterministic for a given (scenario, seed): golden-file and
// byte-identity tests rely on this.

enum class node_role : std::uint8_t { acceptor, learner, client };

struct tr_node {  // emitted once per node before tick 0
    node_id node = 0;
    node_role role = node_role::acceptor;
    bool colocated_learner = false;
};
struct tr_emit {
    tick_t tick = 0;
    std::uint64_t uid = 0;
    std::uint64_t cause = 0;  // uid of the delivery being processed, 0 for spontaneous
    std::uint64_t size = 0;
    message msg;
};
struct tr_deliver {
    tick_t tick = 0;
    std::uint64_t uid = 0;
    std::uint64_t emit_uid = 0;
    node_id node = 0;
    bool duplicate = false;
    std::uint64_t size = 0;
    message msg;
};
struct tr_lose {  // dropped by the fault profile
    tick_t tick = 0;
    std::uint64_t emit_uid = 0;
    node_id node = 0;
};
struct tr_crashdrop {  // arrived while the target was down
    tick_t tick = 0;
    std::uint64_t emit_uid = 0;
    node_id node = 0;
    bool duplicate = false;
};
struct tr_persist {
    tick_t tick = 0;
    node_id node = 0;
    stable_record rec;
};
struct tr_learn {
    tick_t tick = 0;
    node_id node = 0;
    instance_id instance = 0;
    value val;
};
struct tr_exec {  // learner consumed an instance
    tick_t tick = 0;
    node_id node = 0;
    instance_id instance = 0;
    value val;
};
struct tr_apply {  // one request appended to a delivery log
    tick_t tick = 0;
    node_id node = 0;
    instance_id instance = 0;
    request_id req;
};
struct tr_crash {
    tick_t tick = 0;
    node_id node = 0;
};
struct tr_restart {
    tick_t tick = 0;
    node_id node = 0;
};
struct tr_view {
    tick_t tick = 0;
    std::uint64_t view = 0;
    node_id leader = 0;
    ballot lsn;
    instance_id known_max = 0;
    std::vector<node_id> ring;
};
struct tr_timer {
    tick_t tick = 0;
    node_id node = 0;
    std::string kind;
    std::uint64_t key = 0;
};
struct tr_dyn {  // dynamic-ring successor skip
    tick_t tick = 0;
    node_id node = 0;
    std::uint32_t d = 0;
};

using trace_record =
    std::variant<tr_node, tr_emit, tr_deliver, tr_lose, tr_crashdrop, tr_persist, tr_learn,
                 tr_exec, tr_apply, tr_crash, tr_restart, tr_view, tr_timer, tr_dyn>;

std::string format_trace_record(const trace_record& r);
std::optional<trace_record> parse_trace_record(const std::string& line);

struct trace {
    std::string header;  // "# ..." line
    std::vector<trace_record> records;

    std::string to_text() const;
};

/// Parses a full trace file; returns nullopt with the failing line
/// number in *error_line on malformed input.
std::optional<trace> parse_trace_text(const std::string& text, std::size_t* error_line = nullptr);

}  // namespace htring
