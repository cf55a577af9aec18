#pragma once

#include "htring/core.hpp"
#include "htring/storage.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace htring {

/// Majority ring of acceptors for one view. Members are ordered with
/// the leader at position 0; the ring size is always floor(n/2)+1 of
/// the configured acceptors.
struct ring_view {
    std::uint64_t view = 0;
    node_id leader = 0;
    ballot lsn;
    instance_id known_max = 0;  // I: highest instance known at election time
    std::vector<node_id> members;

    bool contains(node_id n) const;
    /// Ring successor of a member (cyclic; the last member's successor
    /// is the leader). Returns 0 for non-members.
    node_id successor(node_id n) const;
    std::uint32_t size() const { return static_cast<std::uint32_t>(members.size()); }
};

/// LAN-to-broadcaster assignment: exactly one broadcaster per LAN and
/// per-acceptor LAN counts differing by at most one.
struct lan_assignment {
    std::uint32_t lan_count = 0;
    std::vector<node_id> broadcaster_of_lan;  // index = lan - 1

    bool is_broadcaster(node_id n) const;
    std::vector<std::uint32_t> lans_of(node_id n) const;
    std::vector<node_id> broadcasters() const;  // deduplicated, ascending
};

std::uint32_t majority_of(std::uint32_t n_acceptors);

/// Round-robin assignment of L LANs over the given acceptors in id order.
lan_assignment assign_broadcasters(const std::vector<node_id>& acceptors, std::uint32_t lans);

struct election_result {
    node_id leader = 0;
    ballot lsn;
    instance_id known_max = 0;
};

/// Deterministic election over the alive acceptors: the lowest-numbered
/// alive broadcaster leads; lsn is one past the highest round any alive
/// member has seen, tagged with the leader id; I is the highest instance
/// number persisted by any alive member. Returns nullopt without an
/// alive majority.
std::optional<election_result> elect_leader(const std::vector<node_id>& alive,
                                            std::uint32_t n_acceptors,
                                            const lan_assignment& lans,
                                            ballot max_known_lsn,
                                            instance_id max_known_instance);

/// Highest round and instance visible in a set of recovered records
/// (election lsn counts toward the round; both record kinds count
/// toward the instance).
std::pair<ballot, instance_id> scan_records(const std::vector<stable_record>& records);

/// Ring for a view: exactly floor(n/2)+1 members, leader first, the
/// rest the lowest-id alive acceptors in ascending order. Returns
/// nullopt when fewer than a majority are alive or the leader is not.
std::optional<ring_view> build_ring(const std::vector<node_id>& alive,
                                    std::uint32_t n_acceptors, node_id leader,
                                    std::uint64_t view, ballot lsn, instance_id known_max);

/// Successor under the dynamic scheme: node j skips d-1 positions,
/// i.e. ((j - 1 + d) mod n) + 1 over acceptor ids 1..n.
node_id dynamic_successor(node_id j, std::uint32_t d, std::uint32_t n_acceptors);

}  // namespace htring
