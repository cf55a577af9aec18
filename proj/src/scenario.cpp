#include "htring/scenario.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace htring {

using nlohmann::json;

std::vector<node_id> scenario::client_ids() const {
    std::vector<node_id> ids;
    const node_id base = n_acceptors + standalone_learners;
    for (std::uint32_t i = 0; i < clients.count; ++i) ids.push_back(base + 1 + i);
    return ids;
}

world_config scenario::to_world_config() const {
    world_config wc;
    wc.n_acceptors = n_acceptors;
    wc.lans = lans;
    for (node_id i = 1; i <= n_acceptors; ++i) {
        bool learner = std::find(colocated_learners.begin(), colocated_learners.end(), i) !=
                       colocated_learners.end();
        wc.sites.push_back(site_spec{i, true, learner});
    }
    for (std::uint32_t i = 0; i < standalone_learners; ++i) {
        wc.sites.push_back(site_spec{n_acceptors + 1 + i, false, true});
    }
    wc.clients = client_ids();
    wc.knobs = knobs;
    wc.client_retry = client_retry;
    wc.faults = faults;
    wc.seed = seed;
    wc.max_ticks = run_length;
    return wc;
}

std::vector<submit_spec> scenario::submissions() const {
    std::vector<submit_spec> subs;
    auto ids = client_ids();
    for (std::uint64_t k = 0; k < clients.requests; ++k) {
        submit_spec s;
        s.at = clients.arrival_start + k * clients.arrival_interval;
        s.client = ids[k % ids.size()];
        s.payload_bytes = clients.payload_bytes;
        s.policy = clients.policy;
        s.specific = clients.specific;
        subs.push_back(s);
    }
    return subs;
}

std::optional<std::string> validate_scenario(const scenario& s) {
    if (s.n_acceptors < 3) return "acceptors must be >= 3";
    if (s.lans < 1) return "lans must be >= 1";
    if (s.clients.count < 1) return "clients.count must be >= 1";
    if (s.clients.policy == target_policy::specific &&
        (s.clients.specific < 1 || s.clients.specific > s.n_acceptors)) {
        return "clients.target names a node outside 1..acceptors";
    }
    for (auto n : s.colocated_learners) {
        if (n < 1 || n > s.n_acceptors) return "colocated learner outside 1..acceptors";
    }
    if (s.standalone_learners == 0 && s.colocated_learners.empty()) {
        return "at least one learner is required";
    }
    if (s.faults.delay_min < 1) return "delay.min must be >= 1";
    if (s.faults.delay_max < s.faults.delay_min) return "delay.max must be >= delay.min";
    if (s.faults.loss_ppm > 1000000) return "loss must be within [0,1]";
    if (s.faults.duplication_ppm > 1000000) return "duplication must be within [0,1]";
    std::set<node_id> valid_crash_targets;
    std::map<node_id, std::uint64_t> crash_counts;
    for (const auto& c : s.faults.crashes) {
        if (c.node < 1 || c.node > s.n_acceptors + s.standalone_learners) {
            return "crash entry names an unknown node";
        }
        if (c.restart_at && *c.restart_at <= c.at) return "restart_at must follow at";
    }
    if (s.knobs.pipeline_depth < 1) return "pipeline_depth must be >= 1";
    if (s.knobs.max_batch_size < 1) return "max_batch_size must be >= 1";
    if (s.run_length < 1) return "run_length must be >= 1";
    (void)valid_crash_targets;
    (void)crash_counts;
    return std::nullopt;
}

namespace {

std::optional<std::string> check_keys(const json& j, const std::set<std::string>& known,
                                      const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) return "unknown key \"" + it.key() + "\" in " + where;
    }
    return std::nullopt;
}

std::uint32_t ppm_from_probability(double p) {
    if (p < 0) return 2000000;  // out of range, caught by validation
    return static_cast<std::uint32_t>(p * 1000000.0 + 0.5);
}

}  // namespace

scenario_parse_result parse_scenario_json(const std::string& text) {
    scenario_parse_result out;
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        out.error = std::string("config is not valid JSON: ") + e.what();
        return out;
    }
    scenario s;
    try {
        if (auto err = check_keys(j, {"name", "acceptors", "lans", "learners", "clients",
                                      "faults", "protocol", "seed", "run_length"},
                                  "top level")) {
            out.error = *err;
            return out;
        }
        if (j.contains("name")) s.name = j.at("name").get<std::string>();
        if (j.contains("acceptors")) s.n_acceptors = j.at("acceptors").get<std::uint32_t>();
        if (j.contains("lans")) s.lans = j.at("lans").get<std::uint32_t>();
        if (j.contains("learners")) {
            const auto& l = j.at("learners");
            if (auto err = check_keys(l, {"colocated", "standalone"}, "learners")) {
                out.error = *err;
                return out;
            }
            if (l.contains("colocated")) {
                s.colocated_learners = l.at("colocated").get<std::vector<node_id>>();
            }
            if (l.contains("standalone")) {
                s.standalone_learners = l.at("standalone").get<std::uint32_t>();
            }
        }
        if (j.contains("clients")) {
            const auto& c = j.at("clients");
            if (auto err = check_keys(c,
                                      {"count", "requests", "payload_bytes", "arrival_start",
                                       "arrival_interval", "target", "retry"},
                                      "clients")) {
                out.error = *err;
                return out;
            }
            if (c.contains("count")) s.clients.count = c.at("count").get<std::uint32_t>();
            if (c.contains("requests")) s.clients.requests = c.at("requests").get<std::uint64_t>();
            if (c.contains("payload_bytes")) {
                s.clients.payload_bytes = c.at("payload_bytes").get<std::uint64_t>();
            }
            if (c.contains("arrival_start")) {
                s.clients.arrival_start = c.at("arrival_start").get<tick_t>();
            }
            if (c.contains("arrival_interval")) {
                s.clients.arrival_interval = c.at("arrival_interval").get<tick_t>();
            }
            if (c.contains("retry")) s.client_retry = c.at("retry").get<tick_t>();
            if (c.contains("target")) {
                const std::string t = c.at("target").get<std::string>();
                if (t == "leader") {
                    s.clients.policy = target_policy::leader;
                } else if (t == "random-broadcaster") {
                    s.clients.policy = target_policy::random_broadcaster;
                } else if (t == "random-coordinator") {
                    s.clients.policy = target_policy::random_coordinator;
                } else if (t.rfind("node:", 0) == 0) {
                    s.clients.policy = target_policy::specific;
                    s.clients.specific = static_cast<node_id>(std::stoul(t.substr(5)));
                } else {
                    out.error = "clients.target must be leader, random-broadcaster, "
                                "random-coordinator, or node:<id>";
                    return out;
                }
            }
        }
        if (j.contains("faults")) {
            const auto& f = j.at("faults");
            if (auto err = check_keys(f,
                                      {"loss", "duplication", "delay_min", "delay_max", "reorder",
                                       "quiesce_at", "crashes", "detection_delay",
                                       "lan_busy_penalty"},
                                      "faults")) {
                out.error = *err;
                return out;
            }
            if (f.contains("loss")) s.faults.loss_ppm = ppm_from_probability(f.at("loss").get<double>());
            if (f.contains("duplication")) {
                s.faults.duplication_ppm = ppm_from_probability(f.at("duplication").get<double>());
            }
            if (f.contains("delay_min")) s.faults.delay_min = f.at("delay_min").get<tick_t>();
            if (f.contains("delay_max")) s.faults.delay_max = f.at("delay_max").get<tick_t>();
            if (f.contains("reorder")) s.faults.reorder = f.at("reorder").get<bool>();
            if (f.contains("quiesce_at")) s.faults.quiesce_at = f.at("quiesce_at").get<tick_t>();
            if (f.contains("detection_delay")) {
                s.faults.detection_delay = f.at("detection_delay").get<tick_t>();
            }
            if (f.contains("lan_busy_penalty")) {
                s.faults.lan_busy_penalty = f.at("lan_busy_penalty").get<tick_t>();
            }
            if (f.contains("crashes")) {
                for (const auto& ce : f.at("crashes")) {
                    if (auto err = check_keys(ce, {"node", "at", "restart_at"}, "crashes[]")) {
                        out.error = *err;
                        return out;
                    }
                    crash_entry entry;
                    entry.node = ce.at("node").get<node_id>();
                    entry.at = ce.at("at").get<tick_t>();
                    if (ce.contains("restart_at")) entry.restart_at = ce.at("restart_at").get<tick_t>();
                    s.faults.crashes.push_back(entry);
                }
            }
        }
        if (j.contains("protocol")) {
            const auto& p = j.at("protocol");
            if (auto err = check_keys(p,
                                      {"timeout", "delta", "batching", "max_batch_size",
                                       "max_batch_delay", "pipeline_depth", "ring",
                                       "ack_timeout", "resend_cap"},
                                      "protocol")) {
                out.error = *err;
                return out;
            }
            if (p.contains("timeout")) s.knobs.timeout = p.at("timeout").get<tick_t>();
            if (p.contains("delta")) s.knobs.delta = p.at("delta").get<tick_t>();
            if (p.contains("batching")) s.knobs.batching = p.at("batching").get<bool>();
            if (p.contains("max_batch_size")) {
                s.knobs.max_batch_size = p.at("max_batch_size").get<std::uint32_t>();
            }
            if (p.contains("max_batch_delay")) {
                s.knobs.max_batch_delay = p.at("max_batch_delay").get<tick_t>();
            }
            if (p.contains("pipeline_depth")) {
                s.knobs.pipeline_depth = p.at("pipeline_depth").get<std::uint32_t>();
            }
            if (p.contains("ack_timeout")) s.knobs.ack_timeout = p.at("ack_timeout").get<tick_t>();
            if (p.contains("resend_cap")) s.knobs.resend_cap = p.at("resend_cap").get<std::uint32_t>();
            if (p.contains("ring")) {
                const std::string r = p.at("ring").get<std::string>();
                if (r == "static") {
                    s.knobs.dynamic_ring = false;
                } else if (r == "dynamic") {
                    s.knobs.dynamic_ring = true;
                } else {
                    out.error = "protocol.ring must be static or dynamic";
                    return out;
                }
            }
        }
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("run_length")) s.run_length = j.at("run_length").get<tick_t>();
    } catch (const std::exception& e) {
        out.error = std::string("config field has the wrong type: ") + e.what();
        return out;
    }
    if (auto err = validate_scenario(s)) {
        out.error = *err;
        return out;
    }
    out.value = std::move(s);
    return out;
}

scenario_parse_result load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        scenario_parse_result out;
        out.error = "cannot open config file: " + path;
        return out;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_json(ss.str());
}

std::string scenario_to_json(const scenario& s) {
    json j;
    j["name"] = s.name;
    j["acceptors"] = s.n_acceptors;
    j["lans"] = s.lans;
    j["learners"] = {{"colocated", s.colocated_learners},
                     {"standalone", s.standalone_learners}};
    json c;
    c["count"] = s.clients.count;
    c["requests"] = s.clients.requests;
    c["payload_bytes"] = s.clients.payload_bytes;
    c["arrival_start"] = s.clients.arrival_start;
    c["arrival_interval"] = s.clients.arrival_interval;
    c["retry"] = s.client_retry;
    switch (s.clients.policy) {
        case target_policy::leader: c["target"] = "leader"; break;
        case target_policy::random_broadcaster: c["target"] = "random-broadcaster"; break;
        case target_policy::random_coordinator: c["target"] = "random-coordinator"; break;
        case target_policy::specific: c["target"] = "node:" + std::to_string(s.clients.specific); break;
    }
    j["clients"] = c;
    json f;
    f["loss"] = s.faults.loss_ppm / 1000000.0;
    f["duplication"] = s.faults.duplication_ppm / 1000000.0;
    f["delay_min"] = s.faults.delay_min;
    f["delay_max"] = s.faults.delay_max;
    f["reorder"] = s.faults.reorder;
    f["quiesce_at"] = s.faults.quiesce_at;
    f["detection_delay"] = s.faults.detection_delay;
    f["lan_busy_penalty"] = s.faults.lan_busy_penalty;
    f["crashes"] = json::array();
    for (const auto& ce : s.faults.crashes) {
        json e;
        e["node"] = ce.node;
        e["at"] = ce.at;
        if (ce.restart_at) e["restart_at"] = *ce.restart_at;
        f["crashes"].push_back(e);
    }
    j["faults"] = f;
    json p;
    p["timeout"] = s.knobs.timeout;
    p["delta"] = s.knobs.delta;
    p["batching"] = s.knobs.batching;
    p["max_batch_size"] = s.knobs.max_batch_size;
    p["max_batch_delay"] = s.knobs.max_batch_delay;
    p["pipeline_depth"] = s.knobs.pipeline_depth;
    p["ring"] = s.knobs.dynamic_ring ? "dynamic" : "static";
    p["ack_timeout"] = s.knobs.ack_timeout;
    p["resend_cap"] = s.knobs.resend_cap;
    j["protocol"] = p;
    j["seed"] = s.seed;
    j["run_length"] = s.run_length;
    return j.dump(2) + "\n";
}

}  // namespace htring
