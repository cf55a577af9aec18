#include "htring/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace htring {

namespace {

node_id measured_learner(const scenario& s) {
    if (s.standalone_learners > 0) return s.n_acceptors + 1;
    if (!s.colocated_learners.empty()) {
        return *std::min_element(s.colocated_learners.begin(), s.colocated_learners.end());
    }
    return 0;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string run_result::summary_text() const {
    auto pass = [&](const char* name) { return checks.ok_for(name) ? "PASS" : "FAIL"; };
    std::string out;
    out += "run " + scn.name + ": seed=" + std::to_string(scn.seed) +
           " events=" + std::to_string(events) + (drained ? " (drained)" : " (cut off)") + "\n";
    out += "learned instances: " + std::to_string(learned_instances) + "\n";
    out += "submitted requests: " + std::to_string(submitted.size()) + "\n";
    out += std::string("safety: nontriviality=") + pass("nontriviality") +
           " agreement=" + pass("agreement") + " consistency=" + pass("consistency") +
           " in-order=" + pass("in-order") + " at-most-once=" + pass("at-most-once") +
           " persist-order=" + pass("persist-order") + " conservation=" + pass("conservation") +
           " causality=" + pass("causality") + " sizes=" + pass("sizes") + "\n";
    if (fault) out += "protocol fault: " + *fault + "\n";
    out += std::string("progress: ") +
           (progress.applicable ? (progress.ok ? "satisfied" : "FAILED") : "not applicable") +
           "\n";
    out += "busiest node: " + std::to_string(busy.node) + " msgs=" + std::to_string(busy.msgs) +
           " bytes=" + std::to_string(busy.bytes) + "\n";
    out += "latency hops (instance 1): " +
           (latency_hops ? std::to_string(*latency_hops) : std::string("n/a")) + "\n";
    out += "response hops (first request): " +
           (response_hops1 ? std::to_string(*response_hops1) : std::string("n/a")) + "\n";
    if (!checks.ok()) out += checks.summary();
    return out;
}

run_result run_scenario(const scenario& s) {
    run_result r;
    r.scn = s;
    world w(s.to_world_config());
    w.boot(s.submissions());
    w.run();

    r.tr = w.get_trace();
    r.fault = w.fault();
    r.drained = !w.fault() && w.events_processed() > 0 && w.outstanding_client_requests() == 0;
    r.events = w.events_processed();
    r.submitted = w.submitted();
    r.checks = run_checks(r.tr);
    r.progress = check_progress(r.tr, r.submitted, s.n_acceptors);
    r.loads = aggregate(r.tr);
    r.busy = busiest_node(r.loads);

    std::set<instance_id> learned;
    for (const auto& rec : r.tr.records) {
        if (const auto* l = std::get_if<tr_learn>(&rec)) learned.insert(l->instance);
    }
    r.learned_instances = learned.size();

    if (auto node = measured_learner(s)) r.latency_hops = commit_latency_hops(r.tr, 1, node);
    if (!r.submitted.empty()) r.response_hops1 = response_hops(r.tr, *r.submitted.begin());

    if (r.fault || !r.checks.ok()) {
        r.exit_code = 2;
    } else if (r.progress.applicable && !r.progress.ok) {
        r.exit_code = 3;
    }
    return r;
}

void write_run_outputs(const run_result& r, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir + "/trace.txt", r.tr.to_text());
    write_file_atomic(out_dir + "/metrics.csv", metrics_csv(r.scn.name, r.loads));
    write_file_atomic(out_dir + "/breakdown.csv", breakdown_csv(r.scn.name, r.loads));
    std::string summary = "run,busiest_node,busiest_msgs,busiest_bytes,latency_hops,response_hops\n";
    summary += r.scn.name + "," + std::to_string(r.busy.node) + "," +
               std::to_string(r.busy.msgs) + "," + std::to_string(r.busy.bytes) + "," +
               (r.latency_hops ? std::to_string(*r.latency_hops) : "") + "," +
               (r.response_hops1 ? std::to_string(*r.response_hops1) : "") + "\n";
    write_file_atomic(out_dir + "/summary.csv", summary);
    write_file_atomic(out_dir + "/summary.txt", r.summary_text());
}

std::string sweep_result::csv() const {
    std::string out =
        "axis_value,leader_msgs,leader_bytes,classical_msgs,classical_bytes,ring_msgs,ring_"
        "bytes\n";
    for (const auto& p : points) {
        out += std::to_string(p.axis_value) + "," + std::to_string(p.leader_msgs) + "," +
               std::to_string(p.leader_bytes) + "," + std::to_string(p.classical.messages) + "," +
               std::to_string(p.classical.bytes) + "," + std::to_string(p.ring.messages) + "," +
               std::to_string(p.ring.bytes) + "\n";
    }
    return out;
}

sweep_result run_sweep(const scenario& base, sweep_axis axis,
                       const std::vector<std::uint64_t>& values) {
    sweep_result out;
    if (values.empty()) {
        out.exit_code = 1;
        out.error = "sweep axis has no values";
        return out;
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
        scenario s = base;
        s.seed = base.seed * 1000003 + 7919 * (k + 1);
        s.name = base.name + "_" + std::to_string(values[k]);
        if (axis == sweep_axis::requests) {
            s.clients.requests = values[k];
        } else if (axis == sweep_axis::payload) {
            s.clients.payload_bytes = values[k];
        } else {
            const auto m = static_cast<std::uint32_t>(values[k]);
            s.n_acceptors = 2 * m - 1;
            for (auto& c : s.colocated_learners) c = std::min<node_id>(c, s.n_acceptors);
        }
        auto r = run_scenario(s);
        if (r.exit_code != 0) {
            out.exit_code = r.exit_code;
            out.error = "sweep aborted at axis value " + std::to_string(values[k]) + ":\n" +
                        r.summary_text();
            return out;
        }
        const node_id leader = 1;  // no crash plan in a sweep: the boot leader stays
        sweep_point p;
        p.axis_value = values[k];
        auto it = r.loads.find(leader);
        if (it != r.loads.end()) {
            p.leader_msgs = it->second.msgs_total();
            p.leader_bytes = it->second.bytes_total();
        }
        p.classical = baseline_leader_cost(baseline_variant::classical, s.clients.requests,
                                           majority_of(s.n_acceptors), s.clients.payload_bytes);
        p.ring = baseline_leader_cost(baseline_variant::ring, s.clients.requests,
                                      majority_of(s.n_acceptors), s.clients.payload_bytes);
        out.points.push_back(p);
    }
    return out;
}

namespace {

std::string svg_plot(const std::string& title, const std::vector<sweep_point>& points,
                     bool bytes) {
    // three log-scaled polylines: measured leader, classical, ring
    const int W = 640, H = 420, ML = 70, MR = 20, MT = 40, MB = 50;
    auto yval = [&](const sweep_point& p, int series) -> double {
        std::uint64_t v = 0;
        if (series == 0) v = bytes ? p.leader_bytes : p.leader_msgs;
        if (series == 1) v = bytes ? p.classical.bytes : p.classical.messages;
        if (series == 2) v = bytes ? p.ring.bytes : p.ring.messages;
        return std::log10(std::max<std::uint64_t>(v, 1));
    };
    double ymin = 1e300, ymax = -1e300, xmin = 1e300, xmax = -1e300;
    for (const auto& p : points) {
        xmin = std::min(xmin, double(p.axis_value));
        xmax = std::max(xmax, double(p.axis_value));
        for (int s = 0; s < 3; ++s) {
            ymin = std::min(ymin, yval(p, s));
            ymax = std::max(ymax, yval(p, s));
        }
    }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    auto X = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto Y = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };
    const char* colors[3] = {"#1f77b4", "#d62728", "#2ca02c"};
    const char* names[3] = {"measured leader", "classical baseline", "ring baseline"};
    char buf[256];
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
                      "\" height=\"" + std::to_string(H) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(W / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ML,
                  H - MB, W - MR, H - MB);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ML, MT,
                  ML, H - MB);
    svg += buf;
    svg += "<text x=\"12\" y=\"" + std::to_string(H / 2) +
           "\" font-family=\"sans-serif\" font-size=\"11\" "
           "transform=\"rotate(-90 12 " + std::to_string(H / 2) + ")\">log10 " +
           (bytes ? "bytes" : "messages") + "</text>\n";
    for (int s = 0; s < 3; ++s) {
        std::string pts;
        for (const auto& p : points) {
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", X(double(p.axis_value)), Y(yval(p, s)));
            pts += buf;
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(colors[s]) +
               "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
        svg += "<text x=\"" + std::to_string(ML + 8) + "\" y=\"" + std::to_string(MT + 16 * (s + 1)) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + colors[s] + "\">" +
               names[s] + "</text>\n";
    }
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\" "
                      "font-family=\"sans-serif\" font-size=\"10\">%llu</text>\n",
                      X(double(p.axis_value)), H - MB + 16,
                      static_cast<unsigned long long>(p.axis_value));
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace

void write_sweep_outputs(const sweep_result& r, sweep_axis axis, const std::string& out_dir,
                         bool emit_plots) {
    std::filesystem::create_directories(out_dir);
    const std::string tmp = out_dir + "/sweep.csv.tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << r.csv();
    }
    std::filesystem::rename(tmp, out_dir + "/sweep.csv");
    if (!emit_plots) return;
    const char* axis_name = axis == sweep_axis::requests ? "requests"
                            : axis == sweep_axis::payload ? "payload bytes"
                                                          : "ring size";
    std::ofstream(out_dir + "/sweep_messages.svg")
        << svg_plot(std::string("busiest-node messages vs ") + axis_name, r.points, false);
    std::ofstream(out_dir + "/sweep_bytes.svg")
        << svg_plot(std::string("busiest-node bytes vs ") + axis_name, r.points, true);
}

replay_result replay_file(const std::string& path) {
    replay_result out;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        out.exit_code = 1;
        out.detail = "cannot open trace: " + path;
        return out;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::size_t bad_line = 0;
    auto tr = parse_trace_text(ss.str(), &bad_line);
    if (!tr) {
        out.exit_code = 1;
        out.detail = "trace parse error at line " + std::to_string(bad_line);
        return out;
    }
    auto report = run_checks(*tr);
    if (!report.ok()) {
        out.exit_code = 2;
        out.detail = report.summary();
        return out;
    }
    out.detail = "all checks passed (" + std::to_string(tr->records.size()) + " records)";
    return out;
}

crash_sweep_result run_crash_sweep(const scenario& base, node_id victim, tick_t restart_delay) {
    crash_sweep_result out;
    auto baseline = run_scenario(base);
    const std::uint64_t total = baseline.events;
    for (std::uint64_t k = 0; k < total; ++k) {
        world w(base.to_world_config());
        w.boot(base.submissions());
        w.set_crash_point(victim, k, restart_delay);
        w.run();
        auto checks = run_checks(w.get_trace());
        auto progress = check_progress(w.get_trace(), w.submitted(), base.n_acceptors);
        ++out.points;
        if (w.fault() || !checks.ok()) {
            out.all_safe = false;
            out.failures.push_back("crash point " + std::to_string(k) + ": " +
                                   (w.fault() ? *w.fault() : checks.summary()));
        }
        if (!progress.applicable || !progress.ok) {
            out.all_learned = false;
            out.failures.push_back("crash point " + std::to_string(k) +
                                   ": not every request executed everywhere");
        }
    }
    return out;
}

}  // namespace htring
