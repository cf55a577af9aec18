#pragma once

#include "htring/core.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace htring {

// Stable-storage records. Writes are atomic per record and keyed:
// a later write for the same key replaces the earlier one, and a
// recovering node reads back exactly the completed writes.

struct coordinator_instance_record {
    instance_id instance = 0;
    ballot crnd;
    std::optional<value> cval;
};

struct acceptor_instance_record {
    instance_id instance = 0;
    ballot rnd;
    ballot vrnd;
    std::optional<value> vval;
    std::uint32_t sn = 0;
};

struct election_record {
    std::uint64_t view = 0;
    node_id leader = 0;
    ballot lsn;
    instance_id known_max = 0;               // I
    std::vector<node_id> ring;               // leader first
    std::vector<node_id> lan_broadcasters;   // index = lan - 1
};

using stable_record =
    std::variant<coordinator_instance_record, acceptor_instance_record, election_record>;

std::string format_record(const stable_record& r);

/// In-memory stable store for one node. The simulator keeps stores
/// outside the replicas so their contents survive crash/restart.
class memory_store {
public:
    void persist(const stable_record& r);
    std::vector<stable_record> recover() const;

    std::uint64_t write_count() const { return writes_; }

private:
    std::map<instance_id, coordinator_instance_record> coord_;
    std::map<instance_id, acceptor_instance_record> acc_;
    std::optional<election_record> election_;
    std::uint64_t writes_ = 0;
};

/// Append-only file backend with the same record schema and semantics.
/// Layout (little-endian), documented in the README: each entry is a
/// 4-byte payload length followed by the payload; payloads start with a
/// 1-byte record tag (0 coordinator, 1 acceptor, 2 election). recover()
/// replays the log in order, so later writes win as with memory_store.
class file_store {
public:
    explicit file_store(std::string path) : path_(std::move(path)) {}

    void persist(const stable_record& r);
    std::vector<stable_record> recover() const;

private:
    std::string path_;
};

std::vector<std::uint8_t> encode_record(const stable_record& r);
std::optional<stable_record> decode_record(const std::vector<std::uint8_t>& bytes);

}  // namespace htring
