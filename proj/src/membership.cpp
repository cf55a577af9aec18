#include "htring/membership.hpp"

#include <algorithm>
#include <set>

namespace htring {

bool ring_view::contains(node_id n) const {
    return std::find(members.begin(), members.end(), n) != members.end();
}

node_id ring_view::successor(node_id n) const {
    for (size_t i = 0; i < members.size(); ++i) {
        if (members[i] == n) return members[(i + 1) % members.size()];
    }
    return 0;
}

bool lan_assignment::is_broadcaster(node_id n) const {
    return std::find(broadcaster_of_lan.begin(), broadcaster_of_lan.end(), n) !=
           broadcaster_of_lan.end();
}

std::vector<std::uint32_t> lan_assignment::lans_of(node_id n) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < broadcaster_of_lan.size(); ++i) {
        if (broadcaster_of_lan[i] == n) out.push_back(i + 1);
    }
    return out;
}

std::vector<node_id> lan_assignment::broadcasters() const {
    std::set<node_id> s(broadcaster_of_lan.begin(), broadcaster_of_lan.end());
    return {s.begin(), s.end()};
}

std::uint32_t majority_of(std::uint32_t n_acceptors) { return n_acceptors / 2 + 1; }

lan_assignment assign_broadcasters(const std::vector<node_id>& acceptors, std::uint32_t lans) {
    std::vector<node_id> sorted = acceptors;
    std::sort(sorted.begin(), sorted.end());
    lan_assignment out;
    out.lan_count = lans;
    out.broadcaster_of_lan.resize(lans);
    for (std::uint32_t lan = 0; lan < lans; ++lan) {
        out.broadcaster_of_lan[lan] = sorted[lan % sorted.size()];
    }
    return out;
}

std::optional<election_result> elect_leader(const std::vector<node_id>& alive,
                                            std::uint32_t n_acceptors,
                                            const lan_assignment& lans,
                                            ballot max_known_lsn,
                                            instance_id max_known_instance) {
    if (alive.size() < majority_of(n_acceptors)) return std::nullopt;
    std::vector<node_id> sorted = alive;
    std::sort(sorted.begin(), sorted.end());
    node_id leader = 0;
    for (auto n : sorted) {
        if (lans.is_broadcaster(n)) {
            leader = n;
            break;
        }
    }
    if (leader == 0) return std::nullopt;
    election_result r;
    r.leader = leader;
    r.lsn = ballot{max_known_lsn.seq + 1, leader};
    r.known_max = max_known_instance;
    return r;
}

std::pair<ballot, instance_id> scan_records(const std::vector<stable_record>& records) {
    ballot max_lsn;
    instance_id max_i = 0;
    for (const auto& rec : records) {
        if (const auto* c = std::get_if<coordinator_instance_record>(&rec)) {
            max_i = std::max(max_i, c->instance);
            max_lsn = std::max(max_lsn, c->crnd);
        } else if (const auto* a = std::get_if<acceptor_instance_record>(&rec)) {
            max_i = std::max(max_i, a->instance);
            max_lsn = std::max(max_lsn, a->rnd);
        } else {
            const auto& e = std::get<election_record>(rec);
            max_lsn = std::max(max_lsn, e.lsn);
            max_i = std::max(max_i, e.known_max);
        }
    }
    return {max_lsn, max_i};
}

std::optional<ring_view> build_ring(const std::vector<node_id>& alive,
                                    std::uint32_t n_acceptors, node_id leader,
                                    std::uint64_t view, ballot lsn, instance_id known_max) {
    auto m = majority_of(n_acceptors);
    if (alive.size() < m) return std::nullopt;
    std::vector<node_id> sorted = alive;
    std::sort(sorted.begin(), sorted.end());
    if (std::find(sorted.begin(), sorted.end(), leader) == sorted.end()) return std::nullopt;

    ring_view rv;
    rv.view = view;
    rv.leader = leader;
    rv.lsn = lsn;
    rv.known_max = known_max;
    rv.members.push_back(leader);
    for (auto n : sorted) {
        if (rv.members.size() == m) break;
        if (n != leader) rv.members.push_back(n);
    }
    if (rv.members.size() != m) return std::nullopt;
    return rv;
}

node_id dynamic_successor(node_id j, std::uint32_t d, std::uint32_t n_acceptors) {
    return ((j - 1 + d) % n_acceptors) + 1;
}

}  // namespace htring
