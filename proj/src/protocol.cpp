#include "htring/protocol.hpp"

#include <algorithm>
#include <cassert>

namespace htring {

const char* to_string(timer_kind k) {
    switch (k) {
        case timer_kind::resend: return "resend";
        case timer_kind::fetch: return "fetch";
        case timer_kind::batch_flush: return "batch_flush";
        case timer_kind::ring_ack: return "ring_ack";
        case timer_kind::client_retry: return "client_retry";
        case timer_kind::learner_sync: return "learner_sync";
    }
    return "?";
}

replica::replica(replica_config cfg, std::vector<node_id> coordinators)
    : cfg_(cfg), coordinators_(std::move(coordinators)), rng_(cfg.rng_seed) {
    std::sort(coordinators_.begin(), coordinators_.end());
}

std::uint64_t replica::rng_below_(std::uint64_t n) {
    // Engine output used directly so draws are identical on every
    // platform; modulo bias is irrelevant at these ranges.
    ++rng_uses_;
    return rng_() % n;
}

std::uint32_t replica::pick_lan_() {
    auto mine = lans_.lans_of(cfg_.id);
    if (mine.empty()) return 1;
    return mine[rng_below_(mine.size())];
}

node_id replica::pick_broadcaster_() {
    auto bs = lans_.broadcasters();
    if (bs.empty()) return view_.leader;
    return bs[rng_below_(bs.size())];
}

node_id replica::pick_coordinator_() {
    if (coordinators_.empty()) return 0;
    if (cfg_.is_acceptor && coordinators_.size() > 1) {
        // querying ourselves cannot produce anything we do not have
        node_id n;
        do {
            n = coordinators_[rng_below_(coordinators_.size())];
        } while (n == cfg_.id);
        return n;
    }
    return coordinators_[rng_below_(coordinators_.size())];
}

void replica::note_instance(instance_id i) { highest_seen_ = std::max(highest_seen_, i); }

void replica::release_proposals_(instance_id i, const value* winner) {
    // A value this node proposed into instance i is freed for a fresh
    // proposal once i resolves to something else (or the proposal dies
    // with our leadership). The slot's cval may have been overwritten by
    // a Phase 1 adoption, so the reverse index is authoritative.
    for (auto it = proposed_at_.begin(); it != proposed_at_.end();) {
        if (it->second == i && (!winner || it->first != *winner)) {
            const value v = it->first;
            proposed_.erase(v);
            it = proposed_at_.erase(it);
            if (!learned_at_.count(v)) enqueue_proposable_(v);
        } else {
            ++it;
        }
    }
}

std::size_t replica::open_count_() const { return open_instances_.size(); }

node_id replica::ring_successor_() const {
    if (cfg_.knobs.dynamic_ring) return dynamic_successor(cfg_.id, dyn_d_, cfg_.n_acceptors);
    return view_.successor(cfg_.id);
}

// --- request knowledge -----------------------------------------------------

bool replica::insert_request_(const request& r, bool from_proposer) {
    auto it = req_set_.find(r.id);
    if (it != req_set_.end()) {
        if (from_proposer) it->second.req.origin = cfg_.id;  // the reply path runs through us now
        return false;
    }
    stored_request s;
    s.req = r;
    if (from_proposer) s.req.origin = cfg_.id;
    req_set_.emplace(r.id, std::move(s));
    return true;
}

void replica::enqueue_proposable_(const value& v) {
    if (queued_.count(v) || proposed_.count(v) || learned_at_.count(v)) return;
    queued_.insert(v);
    proposal_queue_.push_back(v);
}

void replica::expand_learned_reqs_(const value& v) {
    if (v.kind == value::kind_t::request) {
        learned_reqs_.insert(v.req);
    } else if (v.kind == value::kind_t::batch) {
        auto it = batches_.find(v.batch);
        if (it == batches_.end()) return;  // expanded later, when the batch arrives
        for (const auto& r : it->second->members) learned_reqs_.insert(r.id);
    }
}

std::optional<value> replica::next_proposable() const {
    for (const auto& v : proposal_queue_) {
        if (!proposed_.count(v) && !learned_at_.count(v)) return v;
    }
    return std::nullopt;
}

// --- send helpers ----------------------------------------------------------

void replica::multicast_(message m, actions& out) {
    m.sender = cfg_.id;
    m.via = transport::on_lan(pick_lan_());
    out.push_back(act_send{std::move(m)});
}

void replica::send_ring_(message m, actions& out, tick_t now) {
    m.sender = cfg_.id;
    if (cfg_.knobs.dynamic_ring) {
        // one pending entry per logical ring message; resends replace it
        for (auto it = pending_acks_.begin(); it != pending_acks_.end();) {
            const auto& p = it->second.msg;
            if (p.kind == m.kind && p.instance == m.instance && p.round == m.round &&
                p.sn == m.sn) {
                out.push_back(act_cancel_timer{timer_kind::ring_ack, it->first});
                it = pending_acks_.erase(it);
            } else {
                ++it;
            }
        }
        auto token = ++next_ack_token_;
        pending_acks_[token] = pending_ack{m, dyn_d_};
        out.push_back(act_set_timer{timer_kind::ring_ack, token, cfg_.knobs.ack_timeout});
    }
    if (m.via.mode == transport::mode_t::unicast && m.via.target == cfg_.id) {
        auto inline_acts = on_message(m, now);
        out.insert(out.end(), inline_acts.begin(), inline_acts.end());
    } else {
        out.push_back(act_send{std::move(m)});
    }
}

// --- proposal side ----------------------------------------------------------

bool replica::accept_locally_(instance_id i, ballot r, const std::optional<value>& v,
                              actions& out) {
    auto& slot = acc_[i];
    note_instance(i);
    if (slot.vrnd == r) return true;  // already accepted this round
    if (r < std::max(slot.rnd, floor_)) return false;
    slot.rnd = r;
    slot.vrnd = r;
    slot.vval = v;
    slot.sn = 0;  // the proposing leader is ring position 0
    out.push_back(act_persist{acceptor_instance_record{i, slot.rnd, slot.vrnd, slot.vval, slot.sn}});
    return true;
}

void replica::open_instance_(instance_id i, const value& v, actions& out, tick_t now) {
    auto& cs = coord_[i];
    note_instance(i);
    cs.crnd = lsn_;
    cs.cval = v;
    cs.phase1 = false;
    cs.promises.clear();
    cs.open = true;
    cs.closed = false;
    cs.resends = 0;
    open_instances_.insert(i);
    out.push_back(act_persist{coordinator_instance_record{i, cs.crnd, cs.cval}});
    if (!v.is_null()) {
        proposed_.insert(v);
        proposed_at_[v] = i;
    }
    if (!accept_locally_(i, lsn_, cs.cval, out)) {
        // our own acceptor has promised a higher round: we are stale
        leader_ = false;
        out.push_back(act_request_view{"own acceptor promised a higher round"});
        return;
    }
    message m;
    m.kind = msg_kind::phase2a;
    m.instance = i;
    m.round = cs.crnd;
    m.val = cs.cval;
    m.via = transport::to(ring_successor_());
    send_ring_(std::move(m), out, now);
    out.push_back(act_set_timer{timer_kind::resend, i, cfg_.knobs.timeout});
}

void replica::maybe_open_instances_(actions& out, tick_t now) {
    if (!leader_) return;
    while (open_count_() < cfg_.knobs.pipeline_depth) {
        while (!proposal_queue_.empty() &&
               (proposed_.count(proposal_queue_.front()) ||
                learned_at_.count(proposal_queue_.front()))) {
            proposal_queue_.pop_front();
        }
        if (proposal_queue_.empty()) break;
        value v = proposal_queue_.front();
        proposal_queue_.pop_front();
        open_instance_(++next_instance_, v, out, now);
        if (!leader_) break;
    }
}

void replica::send_phase1a_(instance_id i, actions& out, tick_t /*now*/) {
    auto& cs = coord_[i];
    note_instance(i);
    cs.crnd = lsn_;  // Phase 1 state is rebuilt from lsn after a crash, so no write here
    cs.cval.reset();
    cs.phase1 = true;
    cs.promises.clear();
    cs.open = true;
    cs.closed = false;
    cs.resends = 0;
    open_instances_.insert(i);
    for (auto member : view_.members) {
        message m;
        m.kind = msg_kind::phase1a;
        m.sender = cfg_.id;
        m.instance = i;
        m.round = cs.crnd;
        m.via = transport::to(member);
        if (member == cfg_.id) {
            auto inline_acts = on_message(m, 0);
            out.insert(out.end(), inline_acts.begin(), inline_acts.end());
        } else {
            out.push_back(act_send{std::move(m)});
        }
    }
    out.push_back(act_set_timer{timer_kind::resend, i, cfg_.knobs.timeout});
}

// --- learning & execution ---------------------------------------------------

void replica::reply_if_origin_(const value& v, actions& out) {
    std::vector<request_id> ids;
    if (v.kind == value::kind_t::request) {
        ids.push_back(v.req);
    } else if (v.kind == value::kind_t::batch) {
        auto it = batches_.find(v.batch);
        if (it == batches_.end()) return;
        for (const auto& r : it->second->members) ids.push_back(r.id);
    }
    for (auto id : ids) {
        auto it = req_set_.find(id);
        if (it == req_set_.end() || it->second.req.origin != cfg_.id) continue;
        message m;
        m.kind = msg_kind::id_reply;
        m.sender = cfg_.id;
        m.val = value::of(id);
        m.via = transport::to(id.client);
        out.push_back(act_send{std::move(m)});
    }
}

void replica::arm_fetch_(const value& v, actions& out) {
    if (fetch_by_value_.count(v)) return;
    auto token = ++next_fetch_token_;
    fetch_tokens_[token] = v;
    fetch_by_value_[v] = token;
    message m;
    m.kind = msg_kind::id_query;
    m.sender = cfg_.id;
    m.val = v;
    m.via = transport::to(pick_coordinator_());
    out.push_back(act_send{std::move(m)});
    out.push_back(act_set_timer{timer_kind::fetch, token, cfg_.knobs.delta});
}

void replica::cancel_fetch_(const value& v, actions& out) {
    auto it = fetch_by_value_.find(v);
    if (it == fetch_by_value_.end()) return;
    out.push_back(act_cancel_timer{timer_kind::fetch, it->second});
    fetch_tokens_.erase(it->second);
    fetch_by_value_.erase(it);
}

void replica::try_execute_(actions& out, tick_t /*now*/) {
    while (true) {
        auto it = exec_pending_.find(executed_upto_ + 1);
        if (it == exec_pending_.end()) break;
        const instance_id i = it->first;
        const value v = it->second;
        std::vector<const request*> members;
        if (v.kind == value::kind_t::request) {
            auto rit = req_set_.find(v.req);
            if (rit == req_set_.end()) {
                arm_fetch_(v, out);
                break;  // execution is strictly in instance order
            }
            members.push_back(&rit->second.req);
        } else if (v.kind == value::kind_t::batch) {
            auto bit = batches_.find(v.batch);
            if (bit == batches_.end()) {
                arm_fetch_(v, out);
                break;
            }
            for (const auto& r : bit->second->members) members.push_back(&r);
        }
        cancel_fetch_(v, out);
        out.push_back(act_execute{i, v});
        for (const auto* r : members) {
            if (!executed_ids_.insert(r->id).second) continue;  // duplicate decision of the same id
            delivery_log_.push_back(r->id);
            out.push_back(act_apply{i, r->id, r->payload_size()});
        }
        if (cfg_.is_acceptor) reply_if_origin_(v, out);
        executed_upto_ = i;
        exec_pending_.erase(i);
    }
}

void replica::announce_learned_(instance_id i, actions& out, tick_t now) {
    if (!is_broadcaster()) return;
    auto it = learned_.find(i);
    if (it == learned_.end()) return;
    auto last = announced_at_.find(i);
    if (last != announced_at_.end() && now < last->second + cfg_.knobs.timeout) return;
    announced_at_[i] = now;
    message m;
    m.kind = msg_kind::learned;
    m.instance = i;
    m.val = it->second;
    multicast_(std::move(m), out);
}

void replica::learn_value_(instance_id i, const value& v, actions& out, tick_t now) {
    note_instance(i);
    auto it = learned_.find(i);
    if (it != learned_.end()) {
        if (it->second != v) {
            out.push_back(act_fault{"two values learned for instance " + std::to_string(i) +
                                    ": " + format_value(it->second) + " vs " + format_value(v)});
        }
        return;
    }
    learned_.emplace(i, v);
    if (!v.is_null()) learned_at_.emplace(v, i);
    expand_learned_reqs_(v);
    out.push_back(act_learned{i, v});

    if (cfg_.is_acceptor) {
        auto cit = coord_.find(i);
        if (cit != coord_.end()) {
            auto& cs = cit->second;
            if (cs.open) {
                out.push_back(act_cancel_timer{timer_kind::resend, i});
                open_instances_.erase(i);
                cs.open = false;
            }
            cs.closed = true;
            cs.phase1 = false;
        }
        release_proposals_(i, &v);  // a losing proposal of ours may still need an instance
    }

    if (cfg_.has_learner) {
        exec_pending_.emplace(i, v);
        try_execute_(out, now);
    } else if (cfg_.is_acceptor) {
        reply_if_origin_(v, out);
    }
    maybe_open_instances_(out, now);
}

// --- batching ----------------------------------------------------------------

void replica::seal_batch_(actions& out, tick_t now) {
    if (open_batch_.empty()) return;
    batch b;
    b.id = batch_id{cfg_.id, ++batch_seq_};
    for (auto rid : open_batch_) {
        auto it = req_set_.find(rid);
        if (it == req_set_.end()) continue;
        it->second.disseminated = true;
        b.members.push_back(it->second.req);
    }
    open_batch_.clear();
    if (batch_timer_armed_) {
        out.push_back(act_cancel_timer{timer_kind::batch_flush, 0});
        batch_timer_armed_ = false;
    }
    if (b.members.empty()) return;
    auto shared = std::make_shared<const batch>(std::move(b));
    batches_[shared->id] = shared;
    message m;
    m.kind = msg_kind::request;
    m.val = value::of(shared->id);
    m.batch_payload = shared;
    multicast_(std::move(m), out);
    enqueue_proposable_(value::of(shared->id));
    maybe_open_instances_(out, now);
}

// --- inputs -------------------------------------------------------------------

actions replica::on_start(const std::vector<stable_record>& recovered) {
    actions out;
    // A LEARNED multicast is fire-and-forget, so a learner that missed one
    // pulls it back: it periodically asks a random coordinator for the
    // decision of the lowest instance it has not executed yet. The probe
    // runs slowly while caught up and at the fetch pace while it has
    // evidence of a gap.
    if (cfg_.has_learner) {
        out.push_back(act_set_timer{timer_kind::learner_sync, 0, cfg_.knobs.timeout});
    }
    for (const auto& rec : recovered) {
        if (const auto* e = std::get_if<election_record>(&rec)) {
            view_.view = e->view;
            view_.leader = e->leader;
            view_.lsn = e->lsn;
            view_.known_max = e->known_max;
            view_.members = e->ring;
            lans_.lan_count = static_cast<std::uint32_t>(e->lan_broadcasters.size());
            lans_.broadcaster_of_lan = e->lan_broadcasters;
            leader_ = cfg_.is_acceptor && e->leader == cfg_.id;
            lsn_ = e->lsn;
            floor_ = e->lsn;
            known_max_ = e->known_max;
        } else if (const auto* c = std::get_if<coordinator_instance_record>(&rec)) {
            auto& cs = coord_[c->instance];
            cs.crnd = c->crnd;
            cs.cval = c->cval;
            note_instance(c->instance);
            if (c->cval && !c->cval->is_null()) {
                proposed_.insert(*c->cval);  // sent in some PHASE 2A before the crash
                proposed_at_[*c->cval] = c->instance;
            }
        } else {
            const auto& a = std::get<acceptor_instance_record>(rec);
            acc_[a.instance] = acceptor_slot{a.rnd, a.vrnd, a.vval, a.sn};
            note_instance(a.instance);
        }
    }
    if (!cfg_.is_acceptor) return out;

    // Coordinator task: a recovering leader re-drives everything it may
    // have left in flight, including its own proposals beyond the
    // election-time I. Nothing is learned here after a restart.
    if (leader_) {
        next_instance_ = std::max(known_max_, highest_seen_);
        for (instance_id i = 1; i <= next_instance_; ++i) {
            auto it = coord_.find(i);
            if (it != coord_.end() && it->second.crnd == lsn_ && it->second.cval) {
                auto& cs = it->second;
                cs.open = true;
                cs.closed = false;
                open_instances_.insert(i);
                accept_locally_(i, cs.crnd, cs.cval, out);
                message m;
                m.kind = msg_kind::phase2a;
                m.instance = i;
                m.round = cs.crnd;
                m.val = cs.cval;
                m.via = transport::to(ring_successor_());
                send_ring_(std::move(m), out, 0);
                out.push_back(act_set_timer{timer_kind::resend, i, cfg_.knobs.timeout});
            } else if (i <= known_max_) {
                send_phase1a_(i, out, 0);
            }
            // beyond I with no proposal of ours: not this node's to re-drive
        }
    }

    // Acceptor task: resume ring duty for instances accepted in the
    // current round, unless the coordinator path above already re-sent
    // this instance (the leader's own acceptance has sn = 0).
    for (const auto& [i, slot] : acc_) {
        if (slot.vrnd.is_null() || slot.vrnd != lsn_) continue;
        if (leader_) {
            auto cit = coord_.find(i);
            if (cit != coord_.end() && cit->second.crnd == lsn_ && cit->second.cval) continue;
        }
        if (slot.sn < quorum_() - 1) {
            message m;
            m.kind = msg_kind::phase2a2b;
            m.instance = i;
            m.round = slot.vrnd;
            m.val = slot.vval;
            m.sn = slot.sn;
            m.via = transport::to(ring_successor_());
            send_ring_(std::move(m), out, 0);
        } else {
            message m;
            m.kind = msg_kind::phase2b;
            m.sender = cfg_.id;
            m.instance = i;
            m.round = slot.vrnd;
            m.val = slot.vval;
            m.via = transport::to(view_.leader);
            if (view_.leader == cfg_.id) {
                auto inline_acts = on_message(m, 0);
                out.insert(out.end(), inline_acts.begin(), inline_acts.end());
            } else if (view_.leader != 0) {
                out.push_back(act_send{std::move(m)});
            }
        }
    }
    return out;
}

actions replica::on_view(const ring_view& view, const lan_assignment& lans, tick_t now) {
    actions out;
    const bool was_leader = leader_;
    view_ = view;
    lans_ = lans;
    lsn_ = view.lsn;
    floor_ = std::max(floor_, view.lsn);
    known_max_ = std::max(known_max_, view.known_max);
    note_instance(view.known_max);
    leader_ = cfg_.is_acceptor && view.leader == cfg_.id;

    election_record rec;
    rec.view = view.view;
    rec.leader = view.leader;
    rec.lsn = view.lsn;
    rec.known_max = view.known_max;
    rec.ring = view.members;
    rec.lan_broadcasters = lans.broadcaster_of_lan;
    out.push_back(act_persist{std::move(rec)});

    if (leader_) {
        // re-run Phase 1 with the new round for every instance that may
        // already carry a value; fresh proposals continue densely from I
        next_instance_ = view.known_max;
        for (instance_id i = 1; i <= view.known_max; ++i) {
            if (!learned_.count(i)) send_phase1a_(i, out, now);
        }
        maybe_open_instances_(out, now);
    } else if (was_leader) {
        for (auto it = open_instances_.begin(); it != open_instances_.end();) {
            auto& cs = coord_[*it];
            out.push_back(act_cancel_timer{timer_kind::resend, *it});
            cs.open = false;
            cs.phase1 = false;
            release_proposals_(*it, nullptr);
            it = open_instances_.erase(it);
        }
    }
    return out;
}

actions replica::on_message(const message& m, tick_t now) {
    switch (m.kind) {
        case msg_kind::request:
            return m.batch_payload ? handle_batch(m, now) : handle_request(m, now);
        case msg_kind::phase1a: return handle_phase1a(m);
        case msg_kind::phase1b: return handle_phase1b(m, now);
        case msg_kind::phase2a:
        case msg_kind::phase2a2b: return handle_phase2(m, now);
        case msg_kind::phase2b: return handle_phase2b(m, now);
        case msg_kind::learned: return handle_learned(m, now);
        case msg_kind::denial: return handle_denial();
        case msg_kind::id_query: return handle_id_query(m);
        case msg_kind::ack: return handle_ack(m);
        case msg_kind::id_reply: return {};  // client-side message
    }
    return {};
}

actions replica::handle_request(const message& m, tick_t now) {
    actions out;
    if (!m.req_payload) return out;
    const request& wire = *m.req_payload;
    const bool from_proposer = m.sender == wire.id.client;
    const bool via_multicast = m.via.mode == transport::mode_t::multicast;
    const bool one_to_one = !from_proposer && !via_multicast;
    const value vr = value::of(wire.id);

    if (!cfg_.is_acceptor) {  // learner-only site
        insert_request_(wire, false);
        cancel_fetch_(vr, out);
        try_execute_(out, now);
        return out;
    }

    if (from_proposer && learned_reqs_.count(wire.id)) {
        message reply;
        reply.kind = msg_kind::id_reply;
        reply.sender = cfg_.id;
        reply.val = vr;
        reply.via = transport::to(wire.id.client);
        out.push_back(act_send{std::move(reply)});
        return out;
    }

    insert_request_(wire, from_proposer);
    if (cfg_.has_learner) {
        cancel_fetch_(vr, out);
        try_execute_(out, now);
    }

    const bool already_learned = learned_reqs_.count(wire.id) != 0;
    auto& stored = req_set_.at(wire.id);

    if (is_broadcaster() && (from_proposer || one_to_one)) {
        if (cfg_.knobs.batching) {
            const bool queued_in_open =
                std::find(open_batch_.begin(), open_batch_.end(), wire.id) != open_batch_.end();
            if (!stored.disseminated && !queued_in_open && !already_learned) {
                open_batch_.push_back(wire.id);
                if (open_batch_.size() >= cfg_.knobs.max_batch_size) {
                    seal_batch_(out, now);
                } else if (!batch_timer_armed_) {
                    out.push_back(
                        act_set_timer{timer_kind::batch_flush, 0, cfg_.knobs.max_batch_delay});
                    batch_timer_armed_ = true;
                }
            }
        } else if (!already_learned) {
            message fwd;
            fwd.kind = msg_kind::request;
            fwd.val = vr;
            fwd.req_payload = stored.req;
            multicast_(std::move(fwd), out);
            stored.disseminated = true;
        }
    } else if (!is_broadcaster() && from_proposer) {
        message fwd;
        fwd.kind = msg_kind::request;
        fwd.sender = cfg_.id;
        fwd.val = vr;
        fwd.req_payload = stored.req;
        fwd.via = transport::to(pick_broadcaster_());
        out.push_back(act_send{std::move(fwd)});
    }

    if (!cfg_.knobs.batching) enqueue_proposable_(vr);
    if (leader_) {
        if (already_learned) {
            announce_learned_(learned_at_.at(vr), out, now);
        } else {
            maybe_open_instances_(out, now);
        }
    }
    return out;
}

actions replica::handle_batch(const message& m, tick_t now) {
    actions out;
    const auto& b = m.batch_payload;
    for (const auto& r : b->members) insert_request_(r, false);
    const bool known = batches_.count(b->id) != 0;
    if (!known) {
        batches_[b->id] = b;
        const value vb = value::of(b->id);
        if (learned_at_.count(vb)) expand_learned_reqs_(vb);  // deferred expansion
    }
    if (cfg_.is_acceptor && cfg_.knobs.batching) enqueue_proposable_(value::of(b->id));
    if (cfg_.has_learner) {
        cancel_fetch_(value::of(b->id), out);
        for (const auto& r : b->members) cancel_fetch_(value::of(r.id), out);
        try_execute_(out, now);
    }
    if (leader_) {
        const value vb = value::of(b->id);
        if (learned_at_.count(vb)) {
            announce_learned_(learned_at_.at(vb), out, now);
        } else {
            maybe_open_instances_(out, now);
        }
    }
    return out;
}

actions replica::handle_phase1a(const message& m) {
    actions out;
    if (!cfg_.is_acceptor || !m.instance || !m.round) return out;
    const instance_id i = *m.instance;
    const ballot crnd = *m.round;
    auto& slot = acc_[i];
    note_instance(i);
    const ballot eff = std::max(slot.rnd, floor_);
    if (crnd < eff) {
        message deny;
        deny.kind = msg_kind::denial;
        deny.sender = cfg_.id;
        deny.instance = i;
        deny.round = crnd;
        deny.via = transport::to(m.sender);
        out.push_back(act_send{std::move(deny)});
        return out;
    }
    if (crnd > slot.rnd) {
        slot.rnd = crnd;
        out.push_back(
            act_persist{acceptor_instance_record{i, slot.rnd, slot.vrnd, slot.vval, slot.sn}});
    }
    message reply;
    reply.kind = msg_kind::phase1b;
    reply.sender = cfg_.id;
    reply.instance = i;
    reply.round = slot.rnd;
    reply.accepted_round = slot.vrnd;
    reply.val = slot.vval;
    reply.via = transport::to(m.sender);
    if (m.sender == cfg_.id) {
        auto inline_acts = on_message(reply, 0);
        out.insert(out.end(), inline_acts.begin(), inline_acts.end());
    } else {
        out.push_back(act_send{std::move(reply)});
    }
    return out;
}

actions replica::handle_phase1b(const message& m, tick_t now) {
    actions out;
    if (!leader_ || !m.instance || !m.round) return out;
    const instance_id i = *m.instance;
    auto cit = coord_.find(i);
    if (cit == coord_.end() || !cit->second.phase1) return out;
    auto& cs = cit->second;
    if (*m.round != cs.crnd) return out;  // stale or foreign round: keep waiting
    cs.promises[m.sender] = {m.accepted_round.value_or(null_ballot()), m.val};

    for (auto member : view_.members) {
        if (!cs.promises.count(member)) return out;  // quorum is every ring member
    }

    ballot k;
    for (const auto& [node, p] : cs.promises) k = std::max(k, p.first);
    value chosen;
    if (k.is_null()) {
        chosen = next_proposable().value_or(value{});  // null decides the instance as a no-op
    } else {
        std::optional<value> u;
        for (const auto& [node, p] : cs.promises) {
            if (p.first != k) continue;
            const value pv = p.second.value_or(value{});
            if (u && *u != pv) {
                out.push_back(act_fault{"conflicting accepted values at round " +
                                        format_ballot(k) + " in instance " + std::to_string(i)});
                return out;
            }
            u = pv;
        }
        chosen = *u;
    }
    cs.phase1 = false;
    cs.cval = chosen;
    if (!chosen.is_null()) {
        proposed_.insert(chosen);
        proposed_at_[chosen] = i;
    }
    out.push_back(act_persist{coordinator_instance_record{i, cs.crnd, cs.cval}});
    if (!accept_locally_(i, cs.crnd, cs.cval, out)) {
        leader_ = false;
        out.push_back(act_request_view{"own acceptor promised a higher round"});
        return out;
    }
    message p2a;
    p2a.kind = msg_kind::phase2a;
    p2a.instance = i;
    p2a.round = cs.crnd;
    p2a.val = cs.cval;
    p2a.via = transport::to(ring_successor_());
    send_ring_(std::move(p2a), out, now);
    return out;
}

actions replica::handle_denial() {
    actions out;
    if (!leader_) return out;
    leader_ = false;
    for (auto it = open_instances_.begin(); it != open_instances_.end();) {
        auto& cs = coord_[*it];
        out.push_back(act_cancel_timer{timer_kind::resend, *it});
        cs.open = false;
        cs.phase1 = false;
        release_proposals_(*it, nullptr);
        it = open_instances_.erase(it);
    }
    out.push_back(act_request_view{"denied"});
    return out;
}

actions replica::handle_phase2(const message& m, tick_t now) {
    actions out;
    if (!cfg_.is_acceptor || !m.instance || !m.round) return out;
    if (cfg_.knobs.dynamic_ring && m.sender != cfg_.id) {
        message ack;
        ack.kind = msg_kind::ack;
        ack.sender = cfg_.id;
        ack.instance = m.instance;
        ack.round = m.round;
        ack.sn = m.sn;
        ack.via = transport::to(m.sender);
        out.push_back(act_send{std::move(ack)});
    }
    const instance_id i = *m.instance;
    const ballot crnd = *m.round;
    auto& slot = acc_[i];
    note_instance(i);
    const std::uint32_t sn_new = (m.sn ? *m.sn : 0) + 1;

    const bool pass_through = !slot.vrnd.is_null() && slot.vrnd == crnd;
    if (!pass_through) {
        if (crnd < std::max(slot.rnd, floor_)) return out;  // stale round
        slot.rnd = crnd;
        slot.vrnd = crnd;
        slot.vval = m.val;
        slot.sn = sn_new;
        out.push_back(
            act_persist{acceptor_instance_record{i, slot.rnd, slot.vrnd, slot.vval, slot.sn}});
    }
    // Forward with the hop count recomputed from the incoming message, so a
    // retransmitted pass renumbers cleanly even across ring changes.
    if (sn_new < quorum_() - 1) {
        message fwd;
        fwd.kind = msg_kind::phase2a2b;
        fwd.instance = i;
        fwd.round = crnd;
        fwd.val = pass_through ? slot.vval : m.val;
        fwd.sn = sn_new;
        node_id succ = ring_successor_();
        if (succ == 0) return out;  // not a member of the current ring: the pass ends here
        fwd.via = transport::to(succ);
        send_ring_(std::move(fwd), out, now);
    } else {
        if (view_.leader == 0) return out;
        message p2b;
        p2b.kind = msg_kind::phase2b;
        p2b.instance = i;
        p2b.round = crnd;
        p2b.val = pass_through ? slot.vval : m.val;
        p2b.via = transport::to(view_.leader);
        send_ring_(std::move(p2b), out, now);
    }
    return out;
}

actions replica::handle_phase2b(const message& m, tick_t now) {
    actions out;
    if (!cfg_.is_acceptor || !m.instance || !m.round) return out;
    if (cfg_.knobs.dynamic_ring && m.sender != cfg_.id) {
        message ack;
        ack.kind = msg_kind::ack;
        ack.sender = cfg_.id;
        ack.instance = m.instance;
        ack.round = m.round;
        ack.sn = m.sn;
        ack.via = transport::to(m.sender);
        out.push_back(act_send{std::move(ack)});
    }
    const instance_id i = *m.instance;
    auto cit = coord_.find(i);
    if (cit == coord_.end()) return out;
    auto& cs = cit->second;
    if (*m.round != cs.crnd) return out;  // round guard
    if (cs.closed) {
        announce_learned_(i, out, now);  // duplicate 2B: bounded re-announce
        return out;
    }
    if (!leader_ || cs.phase1 || !cs.cval) return out;
    learn_value_(i, *cs.cval, out, now);
    message lrn;
    lrn.kind = msg_kind::learned;
    lrn.instance = i;
    lrn.val = *cs.cval;
    multicast_(std::move(lrn), out);
    announced_at_[i] = now;
    return out;
}

actions replica::handle_learned(const message& m, tick_t now) {
    actions out;
    if (!m.instance || !m.val) return out;
    learn_value_(*m.instance, *m.val, out, now);
    return out;
}

actions replica::handle_id_query(const message& m) {
    actions out;
    if (!cfg_.is_acceptor) return out;
    if (!m.val) {
        // decision probe: answer with the decision for that instance, if known
        if (!m.instance) return out;
        auto it = learned_.find(*m.instance);
        if (it == learned_.end()) return out;
        message reply;
        reply.kind = msg_kind::learned;
        reply.sender = cfg_.id;
        reply.instance = it->first;
        reply.val = it->second;
        reply.via = transport::to(m.sender);
        out.push_back(act_send{std::move(reply)});
        return out;
    }
    if (m.val->kind == value::kind_t::request) {
        auto it = req_set_.find(m.val->req);
        if (it == req_set_.end()) return out;  // nothing to offer; the learner keeps retrying
        message reply;
        reply.kind = msg_kind::request;
        reply.sender = cfg_.id;
        reply.val = *m.val;
        reply.req_payload = it->second.req;
        reply.via = transport::to(m.sender);
        out.push_back(act_send{std::move(reply)});
    } else if (m.val->kind == value::kind_t::batch) {
        auto it = batches_.find(m.val->batch);
        if (it == batches_.end()) return out;
        message reply;
        reply.kind = msg_kind::request;
        reply.sender = cfg_.id;
        reply.val = *m.val;
        reply.batch_payload = it->second;
        reply.via = transport::to(m.sender);
        out.push_back(act_send{std::move(reply)});
    }
    return out;
}

actions replica::handle_ack(const message& m) {
    actions out;
    for (auto it = pending_acks_.begin(); it != pending_acks_.end();) {
        const auto& p = it->second.msg;
        if (p.instance == m.instance && p.round == m.round && p.sn == m.sn) {
            out.push_back(act_cancel_timer{timer_kind::ring_ack, it->first});
            it = pending_acks_.erase(it);
        } else {
            ++it;
        }
    }
    return out;
}

actions replica::on_timer(timer_kind kind, std::uint64_t key, tick_t now) {
    actions out;
    switch (kind) {
        case timer_kind::resend: {
            const instance_id i = key;
            auto cit = coord_.find(i);
            if (!leader_ || cit == coord_.end() || !cit->second.open || cit->second.closed)
                return out;
            auto& cs = cit->second;
            if (++cs.resends > cfg_.knobs.resend_cap) {
                out.push_back(act_request_view{"resend cap reached for instance " +
                                               std::to_string(i)});
                return out;
            }
            if (cs.phase1) {
                for (auto member : view_.members) {
                    if (cs.promises.count(member)) continue;
                    message m;
                    m.kind = msg_kind::phase1a;
                    m.sender = cfg_.id;
                    m.instance = i;
                    m.round = cs.crnd;
                    m.via = transport::to(member);
                    if (member == cfg_.id) {
                        auto inline_acts = on_message(m, now);
                        out.insert(out.end(), inline_acts.begin(), inline_acts.end());
                    } else {
                        out.push_back(act_send{std::move(m)});
                    }
                }
            } else if (cs.cval) {
                message m;
                m.kind = msg_kind::phase2a;
                m.instance = i;
                m.round = cs.crnd;
                m.val = cs.cval;
                m.via = transport::to(ring_successor_());
                send_ring_(std::move(m), out, now);
            }
            out.push_back(act_set_timer{timer_kind::resend, i, cfg_.knobs.timeout});
            return out;
        }
        case timer_kind::fetch: {
            auto it = fetch_tokens_.find(key);
            if (it == fetch_tokens_.end()) return out;
            const value v = it->second;
            const bool have = v.kind == value::kind_t::request ? req_set_.count(v.req) != 0
                                                               : batches_.count(v.batch) != 0;
            bool needed = false;
            for (const auto& [i, pv] : exec_pending_) {
                if (pv == v) {
                    needed = true;
                    break;
                }
            }
            if (have || !needed) {
                fetch_by_value_.erase(v);
                fetch_tokens_.erase(it);
                return out;
            }
            message q;
            q.kind = msg_kind::id_query;
            q.sender = cfg_.id;
            q.val = v;
            q.via = transport::to(pick_coordinator_());
            out.push_back(act_send{std::move(q)});
            out.push_back(act_set_timer{timer_kind::fetch, key, cfg_.knobs.delta});
            return out;
        }
        case timer_kind::batch_flush: {
            batch_timer_armed_ = false;
            seal_batch_(out, now);
            return out;
        }
        case timer_kind::ring_ack: {
            auto it = pending_acks_.find(key);
            if (it == pending_acks_.end()) return out;
            auto& p = it->second;
            if (p.d_used == dyn_d_) {
                ++dyn_d_;
                if (dyn_d_ > cfg_.n_acceptors) {
                    out.push_back(act_fault{"dynamic ring exhausted: d exceeds n"});
                    return out;
                }
                out.push_back(act_dyn_step{dyn_d_});
            }
            p.d_used = dyn_d_;
            message m = p.msg;
            m.via = transport::to(dynamic_successor(cfg_.id, dyn_d_, cfg_.n_acceptors));
            p.msg = m;
            if (m.via.target == cfg_.id) {
                auto inline_acts = on_message(m, now);
                out.insert(out.end(), inline_acts.begin(), inline_acts.end());
            } else {
                out.push_back(act_send{std::move(m)});
            }
            out.push_back(act_set_timer{timer_kind::ring_ack, key, cfg_.knobs.ack_timeout});
            return out;
        }
        case timer_kind::client_retry: return out;  // client-side timer
        case timer_kind::learner_sync: {
            if (!cfg_.has_learner) return out;
            message q;
            q.kind = msg_kind::id_query;
            q.sender = cfg_.id;
            q.instance = executed_upto_ + 1;
            q.via = transport::to(pick_coordinator_());
            out.push_back(act_send{std::move(q)});
            const tick_t period =
                exec_pending_.empty() ? cfg_.knobs.timeout : cfg_.knobs.delta;
            out.push_back(act_set_timer{timer_kind::learner_sync, 0, period});
            return out;
        }
    }
    return out;
}

std::string replica::fingerprint() const {
    std::string s;
    auto add = [&s](const std::string& part) {
        s += part;
        s += '|';
    };
    add(std::to_string(cfg_.id));
    add(leader_ ? "L" : "-");
    add(format_ballot(lsn_));
    add(format_ballot(floor_));
    add(std::to_string(view_.view) + ":" + std::to_string(view_.leader));
    add(std::to_string(known_max_) + "/" + std::to_string(highest_seen_));
    for (const auto& [i, cs] : coord_) {
        add("c" + std::to_string(i) + "=" + format_ballot(cs.crnd) + "," +
            (cs.cval ? format_value(*cs.cval) : "-") + "," + (cs.phase1 ? "p1" : "") +
            (cs.open ? "o" : "") + (cs.closed ? "x" : "") + "#" +
            std::to_string(cs.promises.size()));
    }
    for (const auto& [i, sl] : acc_) {
        add("a" + std::to_string(i) + "=" + format_ballot(sl.rnd) + "," + format_ballot(sl.vrnd) +
            "," + (sl.vval ? format_value(*sl.vval) : "-") + "," + std::to_string(sl.sn));
    }
    for (const auto& [i, v] : learned_) add("l" + std::to_string(i) + "=" + format_value(v));
    for (const auto& [id, sr] : req_set_) {
        add("r" + format_value(value::of(id)) + (sr.disseminated ? "d" : "") + "@" +
            std::to_string(sr.req.origin));
    }
    for (const auto& v : proposal_queue_) add("q" + format_value(v));
    for (const auto& v : proposed_) add("p" + format_value(v));
    add("e" + std::to_string(executed_upto_));
    for (auto id : delivery_log_) add(format_value(value::of(id)));
    add("rng" + std::to_string(rng_uses_));
    return s;
}

// --- client -------------------------------------------------------------------

client::client(node_id id, std::vector<node_id> coordinators, std::uint64_t rng_seed,
               tick_t retry_period)
    : id_(id), coordinators_(std::move(coordinators)), rng_(rng_seed),
      retry_period_(retry_period) {
    std::sort(coordinators_.begin(), coordinators_.end());
    ids_.client = id;
}

actions client::submit(const request& r, node_id target) {
    actions out;
    outstanding_[r.id] = r;
    message m;
    m.kind = msg_kind::request;
    m.sender = id_;
    m.val = value::of(r.id);
    m.req_payload = r;
    m.via = transport::to(target);
    out.push_back(act_send{std::move(m)});
    out.push_back(act_set_timer{timer_kind::client_retry, r.id.seq, retry_period_});
    return out;
}

actions client::on_message(const message& m) {
    actions out;
    if (m.kind != msg_kind::id_reply || !m.val || m.val->kind != value::kind_t::request)
        return out;
    auto it = outstanding_.find(m.val->req);
    if (it == outstanding_.end()) return out;  // duplicate acknowledgment
    out.push_back(act_cancel_timer{timer_kind::client_retry, it->first.seq});
    outstanding_.erase(it);
    return out;
}

actions client::on_timer(std::uint64_t key) {
    actions out;
    auto it = outstanding_.find(request_id{id_, key});
    if (it == outstanding_.end()) return out;
    message m;
    m.kind = msg_kind::request;
    m.sender = id_;
    m.val = value::of(it->first);
    m.req_payload = it->second;
    m.via = transport::to(coordinators_[rng_() % coordinators_.size()]);
    out.push_back(act_send{std::move(m)});
    out.push_back(act_set_timer{timer_kind::client_retry, key, retry_period_});
    return out;
}

}  // namespace htring
