#include "htring/simnet.hpp"

#include <algorithm>
#include <cassert>

namespace htring {

world::world(world_config cfg) : cfg_(std::move(cfg)), net_rng_(cfg_.seed) {
    trace_.header = "# htring-trace v1 seed=" + std::to_string(cfg_.seed) +
                    " n=" + std::to_string(cfg_.n_acceptors) +
                    " lans=" + std::to_string(cfg_.lans);
}

const replica* world::site(node_id n) const {
    auto it = replicas_.find(n);
    return it == replicas_.end() ? nullptr : it->second.get();
}

std::size_t world::outstanding_client_requests() const {
    std::size_t total = 0;
    for (const auto& [id, c] : clients_) total += c->outstanding();
    return total;
}

std::uint64_t world::net_draw_() { return net_rng_(); }

tick_t world::draw_delay_(tick_t now) {
    if (cfg_.faults.delay_max <= cfg_.faults.delay_min) return cfg_.faults.delay_min;
    (void)now;
    auto span = cfg_.faults.delay_max - cfg_.faults.delay_min + 1;
    return cfg_.faults.delay_min + static_cast<tick_t>(net_draw_() % span);
}

bool world::is_subscriber(node_id n) const { return replicas_.count(n) != 0; }

void world::schedule(tick_t at, event e) { queue_.emplace(std::make_pair(at, ++seq_), std::move(e)); }

void world::boot(const std::vector<submit_spec>& submissions) {
    std::vector<node_id> coordinators;
    for (const auto& s : cfg_.sites) {
        if (s.acceptor) coordinators.push_back(s.id);
    }
    for (const auto& s : cfg_.sites) {
        trace_.records.push_back(
            tr_node{s.id, s.acceptor ? node_role::acceptor : node_role::learner,
                    s.acceptor && s.learner});
        replica_config rc;
        rc.id = s.id;
        rc.n_acceptors = cfg_.n_acceptors;
        rc.is_acceptor = s.acceptor;
        rc.has_learner = s.learner;
        rc.knobs = cfg_.knobs;
        rc.rng_seed = cfg_.seed * 0x9e3779b97f4a7c15ULL + s.id;
        replicas_.emplace(s.id, std::make_unique<replica>(rc, coordinators));
        stores_.emplace(s.id, memory_store{});
    }
    for (auto c : cfg_.clients) {
        trace_.records.push_back(tr_node{c, node_role::client, false});
        clients_.emplace(c, std::make_unique<client>(c, coordinators,
                                                     cfg_.seed * 0x2545f4914f6cdd1dULL + c,
                                                     cfg_.client_retry));
    }
    for (auto& [id, r] : replicas_) apply_actions(id, r->on_start({}), 0);
    run_election(0);

    for (const auto& ce : cfg_.faults.crashes) {
        schedule(ce.at, ev_crash{ce.node});
        if (ce.restart_at) schedule(*ce.restart_at, ev_restart{ce.node});
    }
    for (const auto& s : submissions) {
        schedule(s.at, ev_submit{s.client, s.payload_bytes, s.policy, s.specific});
    }
}

void world::set_crash_point(node_id node, std::uint64_t event_index, tick_t restart_delay) {
    crash_point_index_ = event_index;
    crash_point_node_ = node;
    crash_point_restart_delay_ = restart_delay;
}

bool world::step() {
    if (fault_ || queue_.empty()) return false;
    auto it = queue_.begin();
    const tick_t now = it->first.first;
    if (now > cfg_.max_ticks) return false;
    if (crash_point_index_ && !crash_point_done_ && events_processed_ == *crash_point_index_) {
        crash_point_done_ = true;
        if (!crashed_.count(crash_point_node_)) {
            do_crash(crash_point_node_, now);
            schedule(now + crash_point_restart_delay_, ev_restart{crash_point_node_});
        }
    }
    event e = std::move(it->second);
    queue_.erase(it);
    last_tick_ = now;
    ++events_processed_;
    dispatch(now, e);
    return true;
}

void world::run() {
    while (step()) {
    }
}

void world::dispatch(tick_t now, const event& e) {
    if (const auto* d = std::get_if<ev_deliver>(&e)) {
        if (crashed_.count(d->target)) {
            trace_.records.push_back(tr_crashdrop{now, d->emit_uid, d->target, d->duplicate});
            return;
        }
        const auto uid = ++uid_;
        trace_.records.push_back(
            tr_deliver{now, uid, d->emit_uid, d->target, d->duplicate, wire_size(d->msg), d->msg});
        current_cause_ = uid;
        if (auto rit = replicas_.find(d->target); rit != replicas_.end()) {
            apply_actions(d->target, rit->second->on_message(d->msg, now), now);
        } else if (auto cit = clients_.find(d->target); cit != clients_.end()) {
            apply_actions(d->target, cit->second->on_message(d->msg), now);
        }
        current_cause_ = 0;
        return;
    }
    if (const auto* t = std::get_if<ev_timer>(&e)) {
        if (crashed_.count(t->node)) return;
        auto key = std::make_tuple(t->node, static_cast<std::uint8_t>(t->kind), t->key);
        auto ait = armed_.find(key);
        if (ait == armed_.end() || ait->second != t->generation) return;  // cancelled or re-armed
        armed_.erase(ait);
        trace_.records.push_back(tr_timer{now, t->node, to_string(t->kind), t->key});
        if (auto rit = replicas_.find(t->node); rit != replicas_.end()) {
            apply_actions(t->node, rit->second->on_timer(t->kind, t->key, now), now);
        } else if (auto cit = clients_.find(t->node); cit != clients_.end()) {
            apply_actions(t->node, cit->second->on_timer(t->key), now);
        }
        return;
    }
    if (const auto* s = std::get_if<ev_submit>(&e)) {
        auto cit = clients_.find(s->client);
        if (cit == clients_.end()) return;
        auto& cl = *cit->second;
        request r = make_request(cl.ids().next(), s->payload_bytes);
        submitted_.insert(r.id);
        node_id target = s->specific;
        if (s->policy == target_policy::leader) {
            target = initial_leader_;
        } else if (s->policy == target_policy::random_broadcaster) {
            target = initial_broadcasters_[cl.pick(initial_broadcasters_.size())];
        } else if (s->policy == target_policy::random_coordinator) {
            target = cl.pick_coordinator();
        }
        apply_actions(s->client, cl.submit(r, target), now);
        return;
    }
    if (const auto* c = std::get_if<ev_crash>(&e)) {
        do_crash(c->node, now);
        return;
    }
    if (const auto* r = std::get_if<ev_restart>(&e)) {
        do_restart(r->node, now);
        return;
    }
    if (const auto* d = std::get_if<ev_detect>(&e)) {
        if (!crashed_.count(d->node)) return;
        const bool leader_down = view_.leader == d->node;
        const bool ring_down = view_.contains(d->node);
        if (cfg_.knobs.dynamic_ring ? leader_down : (leader_down || ring_down)) {
            run_election(now);
        }
        return;
    }
    if (const auto* m = std::get_if<ev_membership>(&e)) {
        if (crashed_.count(view_.leader) || election_pending_) {
            run_election(now);
            return;
        }
        if (m->requester != 0 && !crashed_.count(m->requester)) {
            auto rit = replicas_.find(m->requester);
            if (rit != replicas_.end() && rit->second->view().view != view_.view) {
                refresh_view(m->requester, now);
            } else if (m->requester == view_.leader) {
                // the current leader is stuck: rebuild the ring over the
                // alive set under a fresh round
                run_election(now);
            }
        }
        return;
    }
}

void world::apply_actions(node_id node, actions&& acts, tick_t now) {
    for (auto& a : acts) {
        if (auto* s = std::get_if<act_send>(&a)) {
            emit_message(node, s->msg, now);
        } else if (auto* p = std::get_if<act_persist>(&a)) {
            stores_[node].persist(p->rec);
            trace_.records.push_back(tr_persist{now, node, p->rec});
        } else if (auto* t = std::get_if<act_set_timer>(&a)) {
            arm_timer(node, t->kind, t->key, t->delay, now);
        } else if (auto* c = std::get_if<act_cancel_timer>(&a)) {
            disarm_timer(node, c->kind, c->key);
        } else if (auto* l = std::get_if<act_learned>(&a)) {
            trace_.records.push_back(tr_learn{now, node, l->instance, l->val});
        } else if (auto* x = std::get_if<act_execute>(&a)) {
            trace_.records.push_back(tr_exec{now, node, x->instance, x->val});
        } else if (auto* ap = std::get_if<act_apply>(&a)) {
            trace_.records.push_back(tr_apply{now, node, ap->instance, ap->req});
        } else if (std::get_if<act_request_view>(&a)) {
            schedule(now, ev_membership{node});
        } else if (auto* d = std::get_if<act_dyn_step>(&a)) {
            trace_.records.push_back(tr_dyn{now, node, d->d});
        } else if (auto* f = std::get_if<act_fault>(&a)) {
            fault_ = "node " + std::to_string(node) + ": " + f->what;
        }
    }
}

void world::emit_message(node_id sender, const message& m, tick_t now) {
    const auto uid = ++uid_;
    tick_t etick = now;
    if (m.via.mode == transport::mode_t::multicast && cfg_.faults.lan_busy_penalty > 0) {
        auto& free_at = lan_free_[m.via.lan];
        etick = std::max(now, free_at);
        free_at = etick + cfg_.faults.lan_busy_penalty;
    }
    trace_.records.push_back(tr_emit{etick, uid, current_cause_, wire_size(m), m});

    std::vector<node_id> targets;
    if (m.via.mode == transport::mode_t::unicast) {
        targets.push_back(m.via.target);
    } else {
        for (const auto& [id, r] : replicas_) {
            if (id != sender) targets.push_back(id);
        }
    }
    const bool faults_active = cfg_.faults.quiesce_at == 0 || etick < cfg_.faults.quiesce_at;
    for (auto target : targets) {
        if (faults_active && cfg_.faults.loss_ppm > 0 &&
            net_draw_() % 1000000 < cfg_.faults.loss_ppm) {
            trace_.records.push_back(tr_lose{etick, uid, target});
            continue;
        }
        auto deliver_once = [&](bool dup) {
            tick_t dtick = etick + draw_delay_(etick);
            if (!cfg_.faults.reorder) {
                auto& next = link_next_[{sender, target}];
                dtick = std::max(dtick, next);
                next = dtick;
            }
            schedule(dtick, ev_deliver{uid, target, m, dup});
        };
        deliver_once(false);
        if (faults_active && cfg_.faults.duplication_ppm > 0 &&
            net_draw_() % 1000000 < cfg_.faults.duplication_ppm) {
            deliver_once(true);
        }
    }
}

void world::arm_timer(node_id node, timer_kind kind, std::uint64_t key, tick_t delay,
                      tick_t now) {
    auto k = std::make_tuple(node, static_cast<std::uint8_t>(kind), key);
    armed_[k] = ++generation_;
    schedule(now + delay, ev_timer{node, kind, key, generation_});
}

void world::disarm_timer(node_id node, timer_kind kind, std::uint64_t key) {
    armed_.erase(std::make_tuple(node, static_cast<std::uint8_t>(kind), key));
}

void world::do_crash(node_id node, tick_t now) {
    if (crashed_.count(node) || !replicas_.count(node)) return;
    crashed_.insert(node);
    replicas_[node].reset();  // volatile state dies with the process
    for (auto it = armed_.begin(); it != armed_.end();) {
        if (std::get<0>(it->first) == node) {
            it = armed_.erase(it);
        } else {
            ++it;
        }
    }
    trace_.records.push_back(tr_crash{now, node});
    schedule(now + cfg_.faults.detection_delay, ev_detect{node});
}

void world::do_restart(node_id node, tick_t now) {
    if (!crashed_.count(node)) return;  // restart of a running node is a no-op
    crashed_.erase(node);
    std::vector<node_id> coordinators;
    for (const auto& s : cfg_.sites) {
        if (s.acceptor) coordinators.push_back(s.id);
    }
    const site_spec* spec = nullptr;
    for (const auto& s : cfg_.sites) {
        if (s.id == node) spec = &s;
    }
    if (!spec) return;
    replica_config rc;
    rc.id = node;
    rc.n_acceptors = cfg_.n_acceptors;
    rc.is_acceptor = spec->acceptor;
    rc.has_learner = spec->learner;
    rc.knobs = cfg_.knobs;
    rc.rng_seed = cfg_.seed * 0x9e3779b97f4a7c15ULL + node + 0x100000 * (++restart_count_);
    replicas_[node] = std::make_unique<replica>(rc, coordinators);
    trace_.records.push_back(tr_restart{now, node});
    apply_actions(node, replicas_[node]->on_start(stores_[node].recover()), now);
    schedule(now, ev_membership{0});
}

void world::run_election(tick_t now) {
    std::vector<node_id> alive;
    for (const auto& s : cfg_.sites) {
        if (s.acceptor && !crashed_.count(s.id)) alive.push_back(s.id);
    }
    ballot max_lsn = max_issued_lsn_;
    instance_id max_i = 0;
    for (auto n : alive) {
        auto [l, i] = scan_records(stores_[n].recover());
        max_lsn = std::max(max_lsn, l);
        max_i = std::max(max_i, i);
    }
    auto lans = assign_broadcasters(alive.empty() ? std::vector<node_id>{1} : alive, cfg_.lans);
    auto elected = elect_leader(alive, cfg_.n_acceptors, lans, max_lsn, max_i);
    if (!elected) {
        election_pending_ = true;
        return;
    }
    auto ring = build_ring(alive, cfg_.n_acceptors, elected->leader, view_no_ + 1, elected->lsn,
                           elected->known_max);
    if (!ring) {
        election_pending_ = true;
        return;
    }
    ++view_no_;
    view_ = *ring;
    lans_ = lans;
    max_issued_lsn_ = elected->lsn;
    election_pending_ = false;
    if (view_no_ == 1) {
        initial_leader_ = view_.leader;
        initial_broadcasters_ = lans_.broadcasters();
    }
    trace_.records.push_back(
        tr_view{now, view_.view, view_.leader, view_.lsn, view_.known_max, view_.members});
    for (auto n : alive) {
        apply_actions(n, replicas_[n]->on_view(view_, lans_, now), now);
    }
}

void world::refresh_view(node_id node, tick_t now) {
    apply_actions(node, replicas_[node]->on_view(view_, lans_, now), now);
}

// --- hop measurement --------------------------------------------------------

namespace {

std::optional<std::uint32_t> chain_length(const trace& tr, const tr_deliver& last) {
    std::map<std::uint64_t, const tr_emit*> emits;
    std::map<std::uint64_t, const tr_deliver*> delivers;
    for (const auto& r : tr.records) {
        if (const auto* e = std::get_if<tr_emit>(&r)) emits[e->uid] = e;
        else if (const auto* d = std::get_if<tr_deliver>(&r)) delivers[d->uid] = d;
    }
    std::uint32_t hops = 0;
    const tr_deliver* cur = &last;
    while (true) {
        auto eit = emits.find(cur->emit_uid);
        if (eit == emits.end()) return std::nullopt;
        ++hops;
        if (eit->second->cause == 0) return hops;
        auto dit = delivers.find(eit->second->cause);
        if (dit == delivers.end()) return std::nullopt;
        cur = dit->second;
        if (hops > 1000000) return std::nullopt;  // corrupt chain
    }
}

}  // namespace

std::optional<std::uint32_t> commit_latency_hops(const trace& tr, instance_id instance,
                                                 node_id node) {
    for (const auto& r : tr.records) {
        const auto* d = std::get_if<tr_deliver>(&r);
        if (!d || d->node != node || d->msg.kind != msg_kind::learned) continue;
        if (!d->msg.instance || *d->msg.instance != instance) continue;
        return chain_length(tr, *d);
    }
    return std::nullopt;
}

std::optional<std::uint32_t> response_hops(const trace& tr, request_id req) {
    for (const auto& r : tr.records) {
        const auto* d = std::get_if<tr_deliver>(&r);
        if (!d || d->node != req.client || d->msg.kind != msg_kind::id_reply) continue;
        if (!d->msg.val || d->msg.val->kind != value::kind_t::request || d->msg.val->req != req)
            continue;
        return chain_length(tr, *d);
    }
    return std::nullopt;
}

}  // namespace htring
