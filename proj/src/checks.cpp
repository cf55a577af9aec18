#include "htring/checks.hpp"

#include "htring/membership.hpp"

#include <algorithm>
#include <map>

namespace htring {

bool check_report::ok_for(const std::string& check) const {
    for (const auto& f : failures) {
        if (f.check == check) return false;
    }
    return true;
}

std::string check_report::summary() const {
    if (failures.empty()) return "all checks passed";
    std::string out;
    for (const auto& f : failures) {
        out += f.check + " violated at record " + std::to_string(f.record_index) + ": " +
               f.detail + "\n";
    }
    return out;
}

namespace {

struct log_key {
    node_id node;
    std::uint64_t incarnation;
    bool operator<(const log_key& o) const {
        return std::tie(node, incarnation) < std::tie(o.node, o.incarnation);
    }
};

}  // namespace

check_report run_checks(const trace& tr) {
    check_report report;
    auto fail = [&](const std::string& check, std::size_t idx, const std::string& detail) {
        report.failures.push_back(check_failure{check, idx, detail});
    };

    // roles
    std::set<node_id> clients, learners, subscribers;
    for (const auto& r : tr.records) {
        const auto* n = std::get_if<tr_node>(&r);
        if (!n) continue;
        if (n->role == node_role::client) {
            clients.insert(n->node);
        } else {
            subscribers.insert(n->node);
            if (n->role == node_role::learner || n->colocated_learner) learners.insert(n->node);
        }
    }

    std::set<value> allowed;                      // client submissions and formed batches
    std::map<instance_id, value> decided;         // agreement
    std::map<log_key, std::vector<request_id>> logs;
    std::map<log_key, std::vector<instance_id>> exec_order;
    std::map<log_key, std::set<request_id>> applied_once;
    std::map<node_id, std::uint64_t> incarnation;
    std::set<node_id> down;
    struct persisted_state {
        std::set<std::pair<std::string, std::string>> coord;  // (crnd, cval)
        std::set<std::pair<std::string, std::string>> acc;    // (vrnd, vval)
    };
    std::map<std::pair<node_id, instance_id>, persisted_state> persisted;
    struct emit_info {
        std::size_t fanout = 0;
        tick_t tick = 0;
        std::uint64_t size = 0;
    };
    std::map<std::uint64_t, emit_info> emits;
    std::map<std::uint64_t, std::uint64_t> deliver_uids;  // deliver uid -> emit uid
    std::map<std::pair<std::uint64_t, node_id>, int> outcomes;

    for (std::size_t idx = 0; idx < tr.records.size(); ++idx) {
        const auto& rec = tr.records[idx];
        if (const auto* e = std::get_if<tr_emit>(&rec)) {
            const message& m = e->msg;
            if (e->size != wire_size(m)) {
                fail("sizes", idx, "emit size " + std::to_string(e->size) + " != 128+payload");
            }
            if (e->cause != 0) {
                if (e->cause >= e->uid) {
                    fail("causality", idx, "cause does not precede emit");
                } else if (!deliver_uids.count(e->cause)) {
                    fail("causality", idx, "cause is not a delivery uid");
                }
            }
            std::size_t fanout = 1;
            if (m.via.mode == transport::mode_t::multicast) {
                fanout = subscribers.size() - (subscribers.count(m.sender) ? 1 : 0);
            }
            emits[e->uid] = emit_info{fanout, e->tick, e->size};
            if (m.kind == msg_kind::request) {
                if (clients.count(m.sender) && m.val &&
                    m.val->kind == value::kind_t::request) {
                    allowed.insert(*m.val);
                } else if (m.val && m.val->kind == value::kind_t::batch &&
                           m.val->batch.broadcaster == m.sender) {
                    allowed.insert(*m.val);
                }
            }
            // persist-before-send
            if (m.kind == msg_kind::phase2a && m.instance && m.round) {
                auto& ps = persisted[{m.sender, *m.instance}];
                auto key = std::make_pair(format_ballot(*m.round),
                                          m.val ? format_value(*m.val) : "-");
                if (!ps.coord.count(key)) {
                    fail("persist-order", idx,
                         "PHASE2A before coordinator write at node " + std::to_string(m.sender) +
                             " instance " + std::to_string(*m.instance));
                }
            }
            if ((m.kind == msg_kind::phase2a2b || m.kind == msg_kind::phase2b) && m.instance &&
                m.round) {
                auto& ps = persisted[{m.sender, *m.instance}];
                auto key = std::make_pair(format_ballot(*m.round),
                                          m.val ? format_value(*m.val) : "-");
                if (!ps.acc.count(key)) {
                    fail("persist-order", idx,
                         "ring forward before acceptor write at node " +
                             std::to_string(m.sender) + " instance " +
                             std::to_string(*m.instance));
                }
            }
        } else if (const auto* d = std::get_if<tr_deliver>(&rec)) {
            auto eit = emits.find(d->emit_uid);
            if (eit == emits.end()) {
                fail("causality", idx, "delivery without emission");
            } else {
                if (d->tick <= eit->second.tick) fail("causality", idx, "zero-hop delivery");
                if (d->size != eit->second.size) fail("sizes", idx, "delivery size mismatch");
            }
            if (down.count(d->node)) fail("conservation", idx, "delivery to a crashed node");
            deliver_uids[d->uid] = d->emit_uid;
            if (!d->duplicate) outcomes[{d->emit_uid, d->node}] += 1;
        } else if (const auto* l = std::get_if<tr_lose>(&rec)) {
            if (!emits.count(l->emit_uid)) fail("conservation", idx, "loss without emission");
            outcomes[{l->emit_uid, l->node}] += 1;
        } else if (const auto* c = std::get_if<tr_crashdrop>(&rec)) {
            if (!emits.count(c->emit_uid)) fail("conservation", idx, "drop without emission");
            if (!c->duplicate) outcomes[{c->emit_uid, c->node}] += 1;
        } else if (const auto* p = std::get_if<tr_persist>(&rec)) {
            if (const auto* cr = std::get_if<coordinator_instance_record>(&p->rec)) {
                persisted[{p->node, cr->instance}].coord.insert(
                    {format_ballot(cr->crnd), cr->cval ? format_value(*cr->cval) : "-"});
            } else if (const auto* ar = std::get_if<acceptor_instance_record>(&p->rec)) {
                persisted[{p->node, ar->instance}].acc.insert(
                    {format_ballot(ar->vrnd), ar->vval ? format_value(*ar->vval) : "-"});
            }
        } else if (const auto* l = std::get_if<tr_learn>(&rec)) {
            auto [it, inserted] = decided.emplace(l->instance, l->val);
            if (!inserted && it->second != l->val) {
                fail("agreement", idx,
                     "instance " + std::to_string(l->instance) + " learned as " +
                         format_value(it->second) + " and " + format_value(l->val));
            }
            if (!l->val.is_null() && !allowed.count(l->val)) {
                fail("nontriviality", idx, "learned value " + format_value(l->val) +
                                               " was never proposed by a client or broadcaster");
            }
        } else if (const auto* x = std::get_if<tr_exec>(&rec)) {
            auto [it, inserted] = decided.emplace(x->instance, x->val);
            if (!inserted && it->second != x->val) {
                fail("agreement", idx,
                     "instance " + std::to_string(x->instance) + " executed as " +
                         format_value(x->val) + " but learned as " + format_value(it->second));
            }
            exec_order[{x->node, incarnation[x->node]}].push_back(x->instance);
        } else if (const auto* a = std::get_if<tr_apply>(&rec)) {
            log_key k{a->node, incarnation[a->node]};
            logs[k].push_back(a->req);
            if (!applied_once[k].insert(a->req).second) {
                fail("at-most-once", idx,
                     "request " + format_value(value::of(a->req)) + " applied twice at node " +
                         std::to_string(a->node));
            }
        } else if (const auto* c = std::get_if<tr_crash>(&rec)) {
            down.insert(c->node);
        } else if (const auto* s = std::get_if<tr_restart>(&rec)) {
            down.erase(s->node);
            incarnation[s->node] += 1;
        }
    }

    // in-order execution: 1,2,3,... per incarnation
    for (const auto& [k, order] : exec_order) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i] != i + 1) {
                fail("in-order", tr.records.size(),
                     "node " + std::to_string(k.node) + " executed instance " +
                         std::to_string(order[i]) + " at position " + std::to_string(i + 1));
                break;
            }
        }
    }

    // cross-log consistency: every delivery log is a prefix of a maximal one
    const std::vector<request_id>* longest = nullptr;
    log_key longest_key{0, 0};
    for (const auto& [k, log] : logs) {
        if (!longest || log.size() > longest->size()) {
            longest = &log;
            longest_key = k;
        }
    }
    if (longest) {
        for (const auto& [k, log] : logs) {
            for (std::size_t i = 0; i < log.size(); ++i) {
                if (log[i] != (*longest)[i]) {
                    fail("consistency", tr.records.size(),
                         "logs of node " + std::to_string(k.node) + " and node " +
                             std::to_string(longest_key.node) + " diverge at position " +
                             std::to_string(i + 1));
                    break;
                }
            }
        }
    }

    // conservation: at most one terminal outcome per (emission, target)
    for (const auto& [key, count] : outcomes) {
        if (count > 1) {
            fail("conservation", tr.records.size(),
                 "emission " + std::to_string(key.first) + " resolved " + std::to_string(count) +
                     " times at node " + std::to_string(key.second));
        }
    }
    return report;
}

progress_report check_progress(const trace& tr, const std::set<request_id>& submitted,
                               std::uint32_t n_acceptors) {
    progress_report pr;
    std::set<node_id> acceptors, learners, ever_crashed;
    for (const auto& r : tr.records) {
        if (const auto* n = std::get_if<tr_node>(&r)) {
            if (n->role == node_role::acceptor) acceptors.insert(n->node);
            if (n->role == node_role::learner || n->colocated_learner) learners.insert(n->node);
        } else if (const auto* c = std::get_if<tr_crash>(&r)) {
            ever_crashed.insert(c->node);
        }
    }
    std::uint32_t steady_acceptors = 0;
    for (auto a : acceptors) {
        if (!ever_crashed.count(a)) ++steady_acceptors;
    }
    for (auto l : learners) {
        if (!ever_crashed.count(l)) pr.checked_learners.push_back(l);
    }
    pr.applicable =
        steady_acceptors >= majority_of(n_acceptors) && !pr.checked_learners.empty();
    if (!pr.applicable) return pr;

    std::map<node_id, std::set<request_id>> applied;
    for (const auto& r : tr.records) {
        if (const auto* a = std::get_if<tr_apply>(&r)) applied[a->node].insert(a->req);
    }
    for (auto req : submitted) {
        for (auto l : pr.checked_learners) {
            if (!applied[l].count(req)) {
                pr.ok = false;
                pr.missing.push_back(req);
                break;
            }
        }
    }
    return pr;
}

}  // namespace htring
