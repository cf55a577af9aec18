#pragma once

#include "htring/core.hpp"
#include "htring/membership.hpp"
#include "htring/protocol.hpp"
#include "htring/storage.hpp"
#include "htring/trace.hpp"

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace htring {

// Seeded deterministic discrete-event simulator. Events fire in
// (tick, seq) order; identical (scenario, seed) pairs produce
// byte-identical traces. All randomness is integer-only so runs agree
// across platforms.

struct crash_entry {
    node_id node = 0;
    tick_t at = 0;
    std::optional<tick_t> restart_at;
};

struct fault_profile {
    std::uint32_t loss_ppm = 0;         // per scheduled delivery
    std::uint32_t duplication_ppm = 0;  // extra delivery with an independent delay
    tick_t delay_min = 1;
    tick_t delay_max = 1;
    bool reorder = true;
    tick_t quiesce_at = 0;  // 0 = never; loss/duplication stop at this tick
    std::vector<crash_entry> crashes;
    tick_t detection_delay = 25;
    tick_t lan_busy_penalty = 0;  // optional per-LAN egress serialization, 0 = off
};

enum class target_policy : std::uint8_t {
    leader,              // the initial leader
    random_broadcaster,  // among the initial broadcasters
    random_coordinator,
    specific,
};

struct submit_spec {
    tick_t at = 0;
    node_id client = 0;
    std::uint64_t payload_bytes = 0;
    target_policy policy = target_policy::random_coordinator;
    node_id specific = 0;
};

struct site_spec {
    node_id id = 0;
    bool acceptor = false;
    bool learner = false;
};

struct world_config {
    std::uint32_t n_acceptors = 0;
    std::uint32_t lans = 1;
    std::vector<site_spec> sites;   // acceptor sites first, then learner-only sites
    std::vector<node_id> clients;
    protocol_knobs knobs;
    tick_t client_retry = 150;
    fault_profile faults;
    std::uint64_t seed = 1;
    tick_t max_ticks = 10000;
};

class world {
public:
    explicit world(world_config cfg);

    /// Constructs every entity, runs the initial election, and schedules
    /// the crash plan and submissions.
    void boot(const std::vector<submit_spec>& submissions);

    /// Crash `node` immediately before the global event with this index
    /// is processed, restarting it `restart_delay` ticks later. Used by
    /// the crash-point sweep.
    void set_crash_point(node_id node, std::uint64_t event_index, tick_t restart_delay);

    bool step();  // one event; false when drained, past max_ticks, or faulted
    void run();

    const trace& get_trace() const { return trace_; }
    const std::optional<std::string>& fault() const { return fault_; }
    std::uint64_t events_processed() const { return events_processed_; }
    const std::set<request_id>& submitted() const { return submitted_; }
    const replica* site(node_id n) const;
    const memory_store& store(node_id n) const { return stores_.at(n); }
    std::uint64_t view_count() const { return view_no_; }
    const ring_view& current_view() const { return view_; }
    bool crashed(node_id n) const { return crashed_.count(n) != 0; }
    std::size_t outstanding_client_requests() const;

private:
    struct ev_deliver {
        std::uint64_t emit_uid = 0;
        node_id target = 0;
        message msg;
        bool duplicate = false;
    };
    struct ev_timer {
        node_id node = 0;
        timer_kind kind = timer_kind::resend;
        std::uint64_t key = 0;
        std::uint64_t generation = 0;
    };
    struct ev_submit {
        node_id client = 0;
        std::uint64_t payload_bytes = 0;
        target_policy policy = target_policy::random_coordinator;
        node_id specific = 0;
    };
    struct ev_crash {
        node_id node = 0;
    };
    struct ev_restart {
        node_id node = 0;
    };
    struct ev_detect {
        node_id node = 0;
    };
    struct ev_membership {
        node_id requester = 0;  // 0: re-evaluate after a restart / pending election
    };
    using event = std::variant<ev_deliver, ev_timer, ev_submit, ev_crash, ev_restart, ev_detect,
                               ev_membership>;

    void schedule(tick_t at, event e);
    void dispatch(tick_t now, const event& e);
    void apply_actions(node_id node, actions&& acts, tick_t now);
    void emit_message(node_id sender, const message& m, tick_t now);
    void arm_timer(node_id node, timer_kind kind, std::uint64_t key, tick_t delay, tick_t now);
    void disarm_timer(node_id node, timer_kind kind, std::uint64_t key);
    void do_crash(node_id node, tick_t now);
    void do_restart(node_id node, tick_t now);
    void run_election(tick_t now);
    void refresh_view(node_id node, tick_t now);
    bool is_subscriber(node_id n) const;
    std::uint64_t net_draw_();
    tick_t draw_delay_(tick_t now);

    world_config cfg_;
    std::map<std::pair<tick_t, std::uint64_t>, event> queue_;
    std::uint64_t seq_ = 0;
    std::uint64_t uid_ = 0;
    std::uint64_t current_cause_ = 0;
    tick_t last_tick_ = 0;
    std::uint64_t events_processed_ = 0;

    std::map<node_id, std::unique_ptr<replica>> replicas_;
    std::map<node_id, std::unique_ptr<client>> clients_;
    std::map<node_id, memory_store> stores_;
    std::set<node_id> crashed_;
    std::map<std::tuple<node_id, std::uint8_t, std::uint64_t>, std::uint64_t> armed_;
    std::uint64_t generation_ = 0;
    std::map<std::pair<node_id, node_id>, tick_t> link_next_;  // FIFO links when reorder is off
    std::map<std::uint32_t, tick_t> lan_free_;

    std::mt19937_64 net_rng_;
    ring_view view_;
    lan_assignment lans_;
    std::uint64_t view_no_ = 0;
    ballot max_issued_lsn_;
    bool election_pending_ = false;
    node_id initial_leader_ = 0;
    std::vector<node_id> initial_broadcasters_;
    std::uint64_t restart_count_ = 0;

    trace trace_;
    std::optional<std::string> fault_;
    std::set<request_id> submitted_;

    // crash-point sweep
    std::optional<std::uint64_t> crash_point_index_;
    node_id crash_point_node_ = 0;
    tick_t crash_point_restart_delay_ = 0;
    bool crash_point_done_ = false;
};

/// Length of the causal wire chain from a client submission to the first
/// LEARNED delivery of `instance` at `node`; nullopt if never delivered.
std::optional<std::uint32_t> commit_latency_hops(const trace& tr, instance_id instance,
                                                 node_id node);

/// Same, to the ID_REPLY for `req` at its client.
std::optional<std::uint32_t> response_hops(const trace& tr, request_id req);

}  // namespace htring
