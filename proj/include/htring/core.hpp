#pragma once

#include <cstdint>
#include <compare>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace htring {

using node_id = std::uint32_t;      // 0 is reserved as "no node"
using instance_id = std::uint64_t;  // consensus instances are numbered from 1
using tick_t = std::uint64_t;

/// Round identifier (the leader sequence number). Rounds are totally
/// ordered by (seq, node); seq == 0 is the null round, which compares
/// below every concrete round.
struct ballot {
    std::uint64_t seq = 0;
    node_id node = 0;

    bool is_null() const { return seq == 0; }
    auto operator<=>(const ballot&) const = default;
};

inline ballot null_ballot() { return {}; }

/// Globally unique request identifier: the submitting client plus a
/// per-client monotone sequence number. Lexicographic order gives a
/// strict total order for deterministic tie-breaking.
struct request_id {
    node_id client = 0;
    std::uint64_t seq = 0;

    auto operator<=>(const request_id&) const = default;
};

struct batch_id {
    node_id broadcaster = 0;
    std::uint64_t seq = 0;

    auto operator<=>(const batch_id&) const = default;
};

/// The unit consensus is reached on: a request id, a batch id, or the
/// explicit null (no-op) value used when a recovered instance has no
/// proposal to carry. Payload bytes never enter consensus.
struct value {
    enum class kind_t : std::uint8_t { none, request, batch };

    kind_t kind = kind_t::none;
    request_id req;
    batch_id batch;

    bool is_null() const { return kind == kind_t::none; }
    auto operator<=>(const value&) const = default;

    static value of(request_id r) { return {kind_t::request, r, {}}; }
    static value of(batch_id b) { return {kind_t::batch, {}, b}; }
};

/// Client request: immutable after construction. The payload is opaque;
/// it is shared, never mutated. origin is the coordinator that first
/// received the request from its proposer and owes the reply.
struct request {
    request_id id;
    std::shared_ptr<const std::vector<std::uint8_t>> payload;  // may be null (empty)
    node_id origin = 0;

    std::uint64_t payload_size() const { return payload ? payload->size() : 0; }
};

request make_request(request_id id, std::uint64_t payload_bytes, node_id origin = 0);

/// Sealed batch: an ordered group of requests disseminated and decided
/// as one unit under a single batch id.
struct batch {
    batch_id id;
    std::vector<request> members;  // order is the execution order within the batch

    std::uint64_t payload_size() const;
};

/// Allocates fresh request ids for one client; seq is monotone.
struct request_id_allocator {
    node_id client = 0;
    std::uint64_t last_seq = 0;

    request_id next() { return {client, ++last_seq}; }
};

enum class msg_kind : std::uint8_t {
    request,
    phase1a,
    phase1b,
    phase2a,
    phase2a2b,
    phase2b,
    learned,
    denial,
    id_query,
    id_reply,
    ack,
};

const char* to_string(msg_kind k);

struct transport {
    enum class mode_t : std::uint8_t { unicast, multicast };
    mode_t mode = mode_t::unicast;
    node_id target = 0;  // unicast
    std::uint32_t lan = 0;  // multicast

    static transport to(node_id n) { return {mode_t::unicast, n, 0}; }
    static transport on_lan(std::uint32_t lan) { return {mode_t::multicast, 0, lan}; }
};

/// One protocol message. Only the fields a kind needs are populated:
/// PHASE 2A&2B carries sn, PHASE 2A does not (sn is implicitly 0);
/// LEARNED carries (value, instance) and never a payload; PHASE 1B
/// additionally reports the accepted round in accepted_round.
struct message {
    msg_kind kind = msg_kind::request;
    node_id sender = 0;
    transport via;
    std::optional<instance_id> instance;
    std::optional<ballot> round;
    std::optional<std::uint32_t> sn;
    std::optional<value> val;
    std::optional<ballot> accepted_round;  // PHASE1B only (vrnd)
    std::optional<request> req_payload;
    std::shared_ptr<const batch> batch_payload;

    std::uint64_t payload_bytes() const;
};

/// Flat per-message wire overhead; covers every control field.
inline constexpr std::uint64_t wire_overhead = 128;

/// Wire size of one message: overhead plus payload bytes if any.
std::uint64_t wire_size(const message& m);

/// Wire size of several messages clubbed into one multicast: paid
/// overhead once, payloads summed.
std::uint64_t clubbed_wire_size(const std::vector<message>& msgs);

// --- canonical text forms (trace format) ---------------------------------
// Message record fields, in fixed order:
//   kind sender transport instance round sn value payload_size
// Absent optional fields print as "-"; the null round/value print as "null".

std::string format_ballot(const ballot& b);
std::string format_value(const value& v);
std::string format_message(const message& m);

std::optional<ballot> parse_ballot(const std::string& s);
std::optional<value> parse_value(const std::string& s);

}  // namespace htring
