#include "htring/core.hpp"

#include <cstdio>
#include <numeric>

namespace htring {

request make_request(request_id id, std::uint64_t payload_bytes, node_id origin) {
    request r;
    r.id = id;
    if (payload_bytes > 0) {
        r.payload = std::make_shared<const std::vector<std::uint8_t>>(payload_bytes, 0);
    }
    r.origin = origin;
    return r;
}

std::uint64_t batch::payload_size() const {
    std::uint64_t total = 0;
    for (const auto& r : members) total += r.payload_size();
    return total;
}

const char* to_string(msg_kind k) {
    switch (k) {
        case msg_kind::request: return "REQUEST";
        case msg_kind::phase1a: return "PHASE1A";
        case msg_kind::phase1b: return "PHASE1B";
        case msg_kind::phase2a: return "PHASE2A";
        case msg_kind::phase2a2b: return "PHASE2A2B";
        case msg_kind::phase2b: return "PHASE2B";
        case msg_kind::learned: return "LEARNED";
        case msg_kind::denial: return "DENIAL";
        case msg_kind::id_query: return "ID_QUERY";
        case msg_kind::id_reply: return "ID_REPLY";
        case msg_kind::ack: return "ACK";
    }
    return "?";
}

std::uint64_t message::payload_bytes() const {
    if (req_payload) return req_payload->payload_size();
    if (batch_payload) return batch_payload->payload_size();
    return 0;
}

std::uint64_t wire_size(const message& m) { return wire_overhead + m.payload_bytes(); }

std::uint64_t clubbed_wire_size(const std::vector<message>& msgs) {
    std::uint64_t total = wire_overhead;
    for (const auto& m : msgs) total += m.payload_bytes();
    return total;
}

std::string format_ballot(const ballot& b) {
    if (b.is_null()) return "null";
    return std::to_string(b.seq) + "." + std::to_string(b.node);
}

std::string format_value(const value& v) {
    switch (v.kind) {
        case value::kind_t::none: return "null";
        case value::kind_t::request:
            return "r" + std::to_string(v.req.client) + "." + std::to_string(v.req.seq);
        case value::kind_t::batch:
            return "b" + std::to_string(v.batch.broadcaster) + "." + std::to_string(v.batch.seq);
    }
    return "?";
}

std::string format_message(const message& m) {
    std::string out = to_string(m.kind);
    out += ' ';
    out += std::to_string(m.sender);
    out += ' ';
    if (m.via.mode == transport::mode_t::unicast) {
        out += 'u' + std::to_string(m.via.target);
    } else {
        out += 'm' + std::to_string(m.via.lan);
    }
    out += ' ';
    out += m.instance ? std::to_string(*m.instance) : "-";
    out += ' ';
    out += m.round ? format_ballot(*m.round) : "-";
    out += ' ';
    out += m.sn ? std::to_string(*m.sn) : "-";
    out += ' ';
    if (m.val) {
        // PHASE1B compounds the accepted round with the accepted value.
        if (m.kind == msg_kind::phase1b) {
            out += format_ballot(m.accepted_round ? *m.accepted_round : null_ballot());
            out += '~';
        }
        out += format_value(*m.val);
    } else {
        out += '-';
    }
    out += ' ';
    out += std::to_string(m.payload_bytes());
    return out;
}

std::optional<ballot> parse_ballot(const std::string& s) {
    if (s == "null") return ballot{};
    auto dot = s.find('.');
    if (dot == std::string::npos) return std::nullopt;
    ballot b;
    try {
        b.seq = std::stoull(s.substr(0, dot));
        b.node = static_cast<node_id>(std::stoul(s.substr(dot + 1)));
    } catch (...) {
        return std::nullopt;
    }
    return b;
}

std::optional<value> parse_value(const std::string& s) {
    if (s == "null") return value{};
    if (s.size() < 4 || (s[0] != 'r' && s[0] != 'b')) return std::nullopt;
    auto dot = s.find('.');
    if (dot == std::string::npos) return std::nullopt;
    try {
        auto a = static_cast<node_id>(std::stoul(s.substr(1, dot - 1)));
        auto b = std::stoull(s.substr(dot + 1));
        if (s[0] == 'r') return value::of(request_id{a, b});
        return value::of(batch_id{a, b});
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace htring
