#pragma once

#include "htring/core.hpp"
#include "htring/membership.hpp"
#include "htring/storage.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace htring {

// Pure event-driven state machines. A replica consumes one input at a
// time (message, timer, startup, view install) and returns the actions
// it wants performed: sends, stable-storage writes, timer arm/cancel,
// execution-log appends. It never performs I/O itself, so the same code
// runs under the simulator, the exhaustive-interleaving tests, and unit
// tests that drive single handlers.

enum class timer_kind : std::uint8_t {
    resend,        // leader: per open instance, re-drive after TIMEOUT
    fetch,         // learner: per missing value, ID_QUERY every delta
    batch_flush,   // broadcaster: open batch age limit
    ring_ack,      // dynamic ring: per un-acked ring message
    client_retry,  // proposer: per outstanding request
    learner_sync,  // learner: probe for the next undelivered decision
};

const char* to_string(timer_kind k);

struct act_send {
    message msg;
};
struct act_persist {
    stable_record rec;
};
struct act_set_timer {
    timer_kind kind;
    std::uint64_t key = 0;
    tick_t delay = 0;
};
struct act_cancel_timer {
    timer_kind kind;
    std::uint64_t key = 0;
};
struct act_learned {  // this node now knows (value, instance)
    instance_id instance = 0;
    value val;
};
struct act_execute {  // learner consumed an instance in order
    instance_id instance = 0;
    value val;
};
struct act_apply {  // one request appended to the delivery log
    instance_id instance = 0;
    request_id req;
    std::uint64_t payload_bytes = 0;
};
struct act_request_view {
    std::string reason;
};
struct act_dyn_step {  // dynamic ring skipped to a new successor
    std::uint32_t d = 0;
};
struct act_fault {  // protocol-violation assertion; aborts the run
    std::string what;
};

using action = std::variant<act_send, act_persist, act_set_timer, act_cancel_timer, act_learned,
                            act_execute, act_apply, act_request_view, act_dyn_step, act_fault>;
using actions = std::vector<action>;

/// Protocol knobs; defaults match the scenario-config defaults.
struct protocol_knobs {
    tick_t timeout = 50;          // TIMEOUT: leader re-drive period
    tick_t delta = 10;            // learner fetch retry period
    bool batching = false;
    std::uint32_t max_batch_size = 8;
    tick_t max_batch_delay = 5;
    std::uint32_t pipeline_depth = 16;
    bool dynamic_ring = false;
    tick_t ack_timeout = 30;      // dynamic ring ACK wait
    std::uint32_t resend_cap = 8; // re-drives per view before requesting a view change
};

struct replica_config {
    node_id id = 0;
    std::uint32_t n_acceptors = 0;
    bool is_acceptor = false;  // acceptor sites carry the coordinator role too
    bool has_learner = false;
    protocol_knobs knobs;
    std::uint64_t rng_seed = 0;
};

struct stored_request {
    request req;
    bool disseminated = false;  // this broadcaster already multicast it (alone or in a batch)
};

struct coord_slot {
    ballot crnd;
    std::optional<value> cval;
    bool phase1 = false;  // collecting PHASE 1B promises
    std::map<node_id, std::pair<ballot, std::optional<value>>> promises;  // vrnd, vval
    std::uint32_t resends = 0;
    bool open = false;    // proposed by this node and not yet closed
    bool closed = false;
};

struct acceptor_slot {
    ballot rnd;
    ballot vrnd;
    std::optional<value> vval;
    std::uint32_t sn = 0;
};

struct pending_ack {
    message msg;        // re-sent verbatim (modulo the new target) on timeout
    std::uint32_t d_used = 1;
};

class replica {
public:
    replica(replica_config cfg, std::vector<node_id> coordinators);

    // -- inputs ------------------------------------------------------------
    actions on_start(const std::vector<stable_record>& recovered);
    actions on_view(const ring_view& view, const lan_assignment& lans, tick_t now);
    actions on_message(const message& m, tick_t now);
    actions on_timer(timer_kind kind, std::uint64_t key, tick_t now);

    // -- introspection (tests, checks, harness) -----------------------------
    const replica_config& config() const { return cfg_; }
    node_id id() const { return cfg_.id; }
    bool is_leader() const { return leader_; }
    bool is_broadcaster() const { return lans_.is_broadcaster(cfg_.id); }
    const ring_view& view() const { return view_; }
    const std::map<instance_id, value>& learned() const { return learned_; }
    instance_id executed_upto() const { return executed_upto_; }
    const std::vector<request_id>& delivery_log() const { return delivery_log_; }
    std::size_t open_instance_count() const { return open_count_(); }
    std::size_t req_set_size() const { return req_set_.size(); }
    bool knows_request(request_id id) const { return req_set_.count(id) != 0; }
    std::uint32_t dynamic_distance() const { return dyn_d_; }
    const std::map<instance_id, coord_slot>& coordinator_slots() const { return coord_; }
    const std::map<instance_id, acceptor_slot>& acceptor_slots() const { return acc_; }

    /// FIFO-oldest known value not yet proposed by this node and not yet
    /// learned; nullopt when none. Does not mark anything proposed.
    std::optional<value> next_proposable() const;

    /// Compact canonical dump of all protocol-relevant state, used by the
    /// exhaustive-interleaving tests to deduplicate explored states.
    std::string fingerprint() const;

private:
    // message handlers
    actions handle_request(const message& m, tick_t now);
    actions handle_batch(const message& m, tick_t now);
    actions handle_phase1a(const message& m);
    actions handle_phase1b(const message& m, tick_t now);
    actions handle_phase2(const message& m, tick_t now);
    actions handle_phase2b(const message& m, tick_t now);
    actions handle_learned(const message& m, tick_t now);
    actions handle_denial();
    actions handle_id_query(const message& m);
    actions handle_ack(const message& m);

    // helpers
    void note_instance(instance_id i);
    std::size_t open_count_() const;
    node_id ring_successor_() const;  // for this node, honoring dynamic mode
    std::uint32_t quorum_() const { return majority_of(cfg_.n_acceptors); }
    bool insert_request_(const request& r, bool from_proposer);
    void enqueue_proposable_(const value& v);
    void expand_learned_reqs_(const value& v);
    bool accept_locally_(instance_id i, ballot rnd, const std::optional<value>& v, actions& out);
    void open_instance_(instance_id i, const value& v, actions& out, tick_t now);
    void maybe_open_instances_(actions& out, tick_t now);
    void send_phase1a_(instance_id i, actions& out, tick_t now);
    void learn_value_(instance_id i, const value& v, actions& out, tick_t now);
    void try_execute_(actions& out, tick_t now);
    void reply_if_origin_(const value& v, actions& out);
    void arm_fetch_(const value& v, actions& out);
    void cancel_fetch_(const value& v, actions& out);
    void seal_batch_(actions& out, tick_t now);
    void announce_learned_(instance_id i, actions& out, tick_t now);
    void send_ring_(message m, actions& out, tick_t now);
    void multicast_(message m, actions& out);
    std::uint32_t pick_lan_();
    node_id pick_broadcaster_();
    node_id pick_coordinator_();
    std::uint64_t rng_below_(std::uint64_t n);

    replica_config cfg_;
    std::vector<node_id> coordinators_;  // acceptor site ids, ascending
    std::mt19937_64 rng_;
    std::uint64_t rng_uses_ = 0;

    // membership snapshot
    ring_view view_;
    lan_assignment lans_;
    bool leader_ = false;
    ballot lsn_;
    ballot floor_;               // promise floor: lowest round this node will touch
    instance_id known_max_ = 0;  // I from the installed view
    instance_id highest_seen_ = 0;
    // Instances this leader issues are dense: the counter restarts from I
    // at election and ignores instance numbers seen in foreign messages,
    // so a stale leader's rejected proposals cannot punch holes into the
    // live numbering.
    instance_id next_instance_ = 0;

    // request knowledge
    std::map<request_id, stored_request> req_set_;
    std::map<batch_id, std::shared_ptr<const batch>> batches_;
    std::deque<value> proposal_queue_;
    std::set<value> queued_;
    std::set<value> proposed_;                    // sent in some PHASE 2A by this node
    std::map<value, instance_id> proposed_at_;

    // decisions known here
    std::map<instance_id, value> learned_;
    std::map<value, instance_id> learned_at_;
    std::set<request_id> learned_reqs_;

    // coordinator / acceptor per-instance state
    std::map<instance_id, coord_slot> coord_;
    std::map<instance_id, acceptor_slot> acc_;
    std::set<instance_id> open_instances_;

    // learner execution
    instance_id executed_upto_ = 0;
    std::map<instance_id, value> exec_pending_;
    std::set<request_id> executed_ids_;
    std::vector<request_id> delivery_log_;
    std::map<std::uint64_t, value> fetch_tokens_;
    std::map<value, std::uint64_t> fetch_by_value_;
    std::uint64_t next_fetch_token_ = 0;

    // batching
    std::vector<request_id> open_batch_;
    std::uint64_t batch_seq_ = 0;
    bool batch_timer_armed_ = false;

    // duplicate-decision announcements, rate limited per instance
    std::map<instance_id, tick_t> announced_at_;

    // dynamic ring
    std::uint32_t dyn_d_ = 1;
    std::map<std::uint64_t, pending_ack> pending_acks_;
    std::uint64_t next_ack_token_ = 0;
};

/// Client-side proposer: submits requests to coordinators, retries to a
/// fresh random coordinator until the id is acknowledged.
class client {
public:
    client(node_id id, std::vector<node_id> coordinators, std::uint64_t rng_seed,
           tick_t retry_period);

    actions submit(const request& r, node_id target);
    actions on_message(const message& m);
    actions on_timer(std::uint64_t key);

    node_id id() const { return id_; }
    std::size_t outstanding() const { return outstanding_.size(); }
    request_id_allocator& ids() { return ids_; }
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
    node_id pick_coordinator() { return coordinators_[rng_() % coordinators_.size()]; }

private:
    node_id id_;
    std::vector<node_id> coordinators_;
    std::mt19937_64 rng_;
    tick_t retry_period_;
    request_id_allocator ids_;
    std::map<request_id, request> outstanding_;
};

}  // namespace htring
