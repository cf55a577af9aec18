#include "htring/metrics.hpp"

namespace htring {

std::uint64_t node_load::control_bytes() const {
    std::uint64_t total = 0;
    for (const auto& [k, l] : by_kind) {
        if (k == msg_kind::request) continue;
        total += l.bytes_in + l.bytes_out;
    }
    return total;
}

std::uint64_t node_load::control_msgs() const {
    std::uint64_t total = 0;
    for (const auto& [k, l] : by_kind) {
        if (k == msg_kind::request) continue;
        total += l.msgs_in + l.msgs_out;
    }
    return total;
}

std::map<node_id, node_load> aggregate(const trace& tr) {
    std::map<node_id, node_load> loads;
    auto get = [](std::map<node_id, node_load>& m, node_id n) -> node_load& {
        auto& l = m[n];
        l.node = n;
        return l;
    };
    for (const auto& r : tr.records) {
        if (const auto* e = std::get_if<tr_emit>(&r)) {
            auto& l = get(loads, e->msg.sender);
            l.msgs_out += 1;
            l.bytes_out += e->size;
            auto& kl = l.by_kind[e->msg.kind];
            kl.msgs_out += 1;
            kl.bytes_out += e->size;
        } else if (const auto* d = std::get_if<tr_deliver>(&r)) {
            auto& l = get(loads, d->node);
            l.msgs_in += 1;
            l.bytes_in += d->size;
            auto& kl = l.by_kind[d->msg.kind];
            kl.msgs_in += 1;
            kl.bytes_in += d->size;
        }
    }
    return loads;
}

busiest busiest_node(const std::map<node_id, node_load>& loads) {
    busiest best;
    bool first = true;
    for (const auto& [n, l] : loads) {
        const auto msgs = l.msgs_total();
        const auto bytes = l.bytes_total();
        if (first || msgs > best.msgs || (msgs == best.msgs && bytes > best.bytes)) {
            best = busiest{n, msgs, bytes};
            first = false;
        }
    }
    return best;
}

baseline_cost baseline_leader_cost(baseline_variant variant, std::uint64_t requests,
                                   std::uint32_t ring_size, std::uint64_t payload_bytes) {
    const std::uint64_t R = requests;
    const std::uint64_t m = ring_size;
    const std::uint64_t B = payload_bytes;
    const std::uint64_t oh = wire_overhead;
    baseline_cost c;
    if (variant == baseline_variant::classical) {
        c.messages = R * (2 + 2 * m);
        c.bytes = R * ((oh + B) + oh + m * (oh + B) + m * oh);
    } else {
        c.messages = 6 * R;
        c.bytes = R * ((oh + B) + oh + (oh + B) + 3 * oh);
    }
    return c;
}

std::string metrics_csv(const std::string& run_id, const std::map<node_id, node_load>& loads) {
    std::string out = "run,node,msgs_in,msgs_out,bytes_in,bytes_out\n";
    for (const auto& [n, l] : loads) {
        out += run_id + "," + std::to_string(n) + "," + std::to_string(l.msgs_in) + "," +
               std::to_string(l.msgs_out) + "," + std::to_string(l.bytes_in) + "," +
               std::to_string(l.bytes_out) + "\n";
    }
    return out;
}

std::string breakdown_csv(const std::string& run_id, const std::map<node_id, node_load>& loads) {
    std::string out = "run,node,kind,msgs_in,msgs_out,bytes_in,bytes_out\n";
    for (const auto& [n, l] : loads) {
        for (const auto& [k, kl] : l.by_kind) {
            out += run_id + "," + std::to_string(n) + "," + to_string(k) + "," +
                   std::to_string(kl.msgs_in) + "," + std::to_string(kl.msgs_out) + "," +
                   std::to_string(kl.bytes_in) + "," + std::to_string(kl.bytes_out) + "\n";
        }
    }
    return out;
}

}  // namespace htring
