#include "htring/trace.hpp"

#include <charconv>
#include <sstream>

namespace htring {

namespace {

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::optional<std::uint64_t> to_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

const char* role_name(node_role r) {
    switch (r) {
        case node_role::acceptor: return "acc";
        case node_role::learner: return "lrn";
        case node_role::client: return "cli";
    }
    return "?";
}

std::optional<msg_kind> kind_from(const std::string& s) {
    for (int k = 0; k <= static_cast<int>(msg_kind::ack); ++k) {
        if (s == to_string(static_cast<msg_kind>(k))) return static_cast<msg_kind>(k);
    }
    return std::nullopt;
}

// canonical message fields: kind sender transport instance round sn value payload
std::optional<message> parse_message_fields(const std::vector<std::string>& t, size_t at) {
    if (t.size() < at + 8) return std::nullopt;
    message m;
    auto k = kind_from(t[at]);
    if (!k) return std::nullopt;
    m.kind = *k;
    auto snd = to_u64(t[at + 1]);
    if (!snd) return std::nullopt;
    m.sender = static_cast<node_id>(*snd);
    const std::string& tr = t[at + 2];
    if (tr.size() < 2 || (tr[0] != 'u' && tr[0] != 'm')) return std::nullopt;
    auto trn = to_u64(tr.substr(1));
    if (!trn) return std::nullopt;
    m.via = tr[0] == 'u' ? transport::to(static_cast<node_id>(*trn))
                         : transport::on_lan(static_cast<std::uint32_t>(*trn));
    if (t[at + 3] != "-") {
        auto i = to_u64(t[at + 3]);
        if (!i) return std::nullopt;
        m.instance = *i;
    }
    if (t[at + 4] != "-") {
        auto b = parse_ballot(t[at + 4]);
        if (!b) return std::nullopt;
        m.round = *b;
    }
    if (t[at + 5] != "-") {
        auto sn = to_u64(t[at + 5]);
        if (!sn) return std::nullopt;
        m.sn = static_cast<std::uint32_t>(*sn);
    }
    if (t[at + 6] != "-") {
        std::string vs = t[at + 6];
        if (m.kind == msg_kind::phase1b) {
            auto tilde = vs.find('~');
            if (tilde == std::string::npos) return std::nullopt;
            auto ar = parse_ballot(vs.substr(0, tilde));
            if (!ar) return std::nullopt;
            m.accepted_round = *ar;
            vs = vs.substr(tilde + 1);
        }
        auto v = parse_value(vs);
        if (!v) return std::nullopt;
        m.val = *v;
    }
    auto payload = to_u64(t[at + 7]);
    if (!payload) return std::nullopt;
    if (*payload > 0) {
        // shell payload: replay only needs the byte count
        request shell;
        if (m.val && m.val->kind == value::kind_t::request) shell.id = m.val->req;
        shell.payload = std::make_shared<const std::vector<std::uint8_t>>(*payload, 0);
        m.req_payload = std::move(shell);
    }
    return m;
}

std::optional<stable_record> parse_record_fields(const std::vector<std::string>& t, size_t at) {
    if (t.size() < at + 1) return std::nullopt;
    const std::string& kind = t[at];
    if (kind == "coord") {
        if (t.size() < at + 4) return std::nullopt;
        coordinator_instance_record c;
        auto i = to_u64(t[at + 1]);
        auto b = parse_ballot(t[at + 2]);
        if (!i || !b) return std::nullopt;
        c.instance = *i;
        c.crnd = *b;
        if (t[at + 3] != "-") {
            auto v = parse_value(t[at + 3]);
            if (!v) return std::nullopt;
            c.cval = *v;
        }
        return c;
    }
    if (kind == "acc") {
        if (t.size() < at + 6) return std::nullopt;
        acceptor_instance_record a;
        auto i = to_u64(t[at + 1]);
        auto r = parse_ballot(t[at + 2]);
        auto vr = parse_ballot(t[at + 3]);
        auto sn = to_u64(t[at + 5]);
        if (!i || !r || !vr || !sn) return std::nullopt;
        a.instance = *i;
        a.rnd = *r;
        a.vrnd = *vr;
        if (t[at + 4] != "-") {
            auto v = parse_value(t[at + 4]);
            if (!v) return std::nullopt;
            a.vval = *v;
        }
        a.sn = static_cast<std::uint32_t>(*sn);
        return a;
    }
    if (kind == "elec") {
        if (t.size() < at + 7) return std::nullopt;
        election_record e;
        auto view = to_u64(t[at + 1]);
        auto leader = to_u64(t[at + 2]);
        auto lsn = parse_ballot(t[at + 3]);
        auto km = to_u64(t[at + 4]);
        if (!view || !leader || !lsn || !km) return std::nullopt;
        e.view = *view;
        e.leader = static_cast<node_id>(*leader);
        e.lsn = *lsn;
        e.known_max = *km;
        auto parse_list = [](const std::string& s, std::vector<node_id>& out) {
            std::string cur;
            for (char c : s + ",") {
                if (c == ',') {
                    if (!cur.empty()) {
                        auto v = to_u64(cur);
                        if (!v) return false;
                        out.push_back(static_cast<node_id>(*v));
                        cur.clear();
                    }
                } else {
                    cur += c;
                }
            }
            return true;
        };
        if (!parse_list(t[at + 5], e.ring)) return std::nullopt;
        if (!parse_list(t[at + 6], e.lan_broadcasters)) return std::nullopt;
        return e;
    }
    return std::nullopt;
}

}  // namespace

std::string format_trace_record(const trace_record& r) {
    std::string out;
    if (const auto* n = std::get_if<tr_node>(&r)) {
        out = "node " + std::to_string(n->node) + " " + role_name(n->role) + " " +
              (n->colocated_learner ? "1" : "0");
    } else if (const auto* e = std::get_if<tr_emit>(&r)) {
        out = "emit " + std::to_string(e->tick) + " " + std::to_string(e->uid) + " " +
              std::to_string(e->cause) + " " + std::to_string(e->size) + " " +
              format_message(e->msg);
    } else if (const auto* d = std::get_if<tr_deliver>(&r)) {
        out = "recv " + std::to_string(d->tick) + " " + std::to_string(d->uid) + " " +
              std::to_string(d->emit_uid) + " " + std::to_string(d->node) + " " +
              (d->duplicate ? "1" : "0") + " " + std::to_string(d->size) + " " +
              format_message(d->msg);
    } else if (const auto* l = std::get_if<tr_lose>(&r)) {
        out = "lose " + std::to_string(l->tick) + " " + std::to_string(l->emit_uid) + " " +
              std::to_string(l->node);
    } else if (const auto* c = std::get_if<tr_crashdrop>(&r)) {
        out = "cdrop " + std::to_string(c->tick) + " " + std::to_string(c->emit_uid) + " " +
              std::to_string(c->node) + " " + (c->duplicate ? "1" : "0");
    } else if (const auto* p = std::get_if<tr_persist>(&r)) {
        out = "persist " + std::to_string(p->tick) + " " + std::to_string(p->node) + " " +
              format_record(p->rec);
    } else if (const auto* l = std::get_if<tr_learn>(&r)) {
        out = "learn " + std::to_string(l->tick) + " " + std::to_string(l->node) + " " +
              std::to_string(l->instance) + " " + format_value(l->val);
    } else if (const auto* x = std::get_if<tr_exec>(&r)) {
        out = "exec " + std::to_string(x->tick) + " " + std::to_string(x->node) + " " +
              std::to_string(x->instance) + " " + format_value(x->val);
    } else if (const auto* a = std::get_if<tr_apply>(&r)) {
        out = "apply " + std::to_string(a->tick) + " " + std::to_string(a->node) + " " +
              std::to_string(a->instance) + " " + format_value(value::of(a->req));
    } else if (const auto* c = std::get_if<tr_crash>(&r)) {
        out = "crash " + std::to_string(c->tick) + " " + std::to_string(c->node);
    } else if (const auto* s = std::get_if<tr_restart>(&r)) {
        out = "restart " + std::to_string(s->tick) + " " + std::to_string(s->node);
    } else if (const auto* v = std::get_if<tr_view>(&r)) {
        out = "view " + std::to_string(v->tick) + " " + std::to_string(v->view) + " " +
              std::to_string(v->leader) + " " + format_ballot(v->lsn) + " " +
              std::to_string(v->known_max) + " ";
        for (size_t i = 0; i < v->ring.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(v->ring[i]);
        }
    } else if (const auto* t = std::get_if<tr_timer>(&r)) {
        out = "timer " + std::to_string(t->tick) + " " + std::to_string(t->node) + " " + t->kind +
              " " + std::to_string(t->key);
    } else if (const auto* d = std::get_if<tr_dyn>(&r)) {
        out = "dyn " + std::to_string(d->tick) + " " + std::to_string(d->node) + " " +
              std::to_string(d->d);
    }
    return out;
}

std::optional<trace_record> parse_trace_record(const std::string& line) {
    auto t = split(line);
    if (t.empty()) return std::nullopt;
    const std::string& tag = t[0];

    auto u = [&](size_t i) -> std::optional<std::uint64_t> {
        return i < t.size() ? to_u64(t[i]) : std::nullopt;
    };

    if (tag == "node" && t.size() == 4) {
        tr_node n;
        auto id = u(1);
        if (!id) return std::nullopt;
        n.node = static_cast<node_id>(*id);
        if (t[2] == "acc") n.role = node_role::acceptor;
        else if (t[2] == "lrn") n.role = node_role::learner;
        else if (t[2] == "cli") n.role = node_role::client;
        else return std::nullopt;
        n.colocated_learner = t[3] == "1";
        return n;
    }
    if (tag == "emit") {
        tr_emit e;
        auto a = u(1), b = u(2), c = u(3), s = u(4);
        auto m = parse_message_fields(t, 5);
        if (!a || !b || !c || !s || !m) return std::nullopt;
        e.tick = *a;
        e.uid = *b;
        e.cause = *c;
        e.size = *s;
        e.msg = *m;
        return e;
    }
    if (tag == "recv") {
        tr_deliver d;
        auto a = u(1), b = u(2), c = u(3), n = u(4), s = u(6);
        auto m = parse_message_fields(t, 7);
        if (!a || !b || !c || !n || !s || !m || t.size() < 7) return std::nullopt;
        d.tick = *a;
        d.uid = *b;
        d.emit_uid = *c;
        d.node = static_cast<node_id>(*n);
        d.duplicate = t[5] == "1";
        d.size = *s;
        d.msg = *m;
        return d;
    }
    if (tag == "lose" && t.size() == 4) {
        auto a = u(1), b = u(2), n = u(3);
        if (!a || !b || !n) return std::nullopt;
        return tr_lose{*a, *b, static_cast<node_id>(*n)};
    }
    if (tag == "cdrop" && t.size() == 5) {
        auto a = u(1), b = u(2), n = u(3);
        if (!a || !b || !n) return std::nullopt;
        return tr_crashdrop{*a, *b, static_cast<node_id>(*n), t[4] == "1"};
    }
    if (tag == "persist") {
        auto a = u(1), n = u(2);
        auto rec = parse_record_fields(t, 3);
        if (!a || !n || !rec) return std::nullopt;
        return tr_persist{*a, static_cast<node_id>(*n), *rec};
    }
    if (tag == "learn" && t.size() == 5) {
        auto a = u(1), n = u(2), i = u(3);
        auto v = parse_value(t[4]);
        if (!a || !n || !i || !v) return std::nullopt;
        return tr_learn{*a, static_cast<node_id>(*n), *i, *v};
    }
    if (tag == "exec" && t.size() == 5) {
        auto a = u(1), n = u(2), i = u(3);
        auto v = parse_value(t[4]);
        if (!a || !n || !i || !v) return std::nullopt;
        return tr_exec{*a, static_cast<node_id>(*n), *i, *v};
    }
    if (tag == "apply" && t.size() == 5) {
        auto a = u(1), n = u(2), i = u(3);
        auto v = parse_value(t[4]);
        if (!a || !n || !i || !v || v->kind != value::kind_t::request) return std::nullopt;
        return tr_apply{*a, static_cast<node_id>(*n), *i, v->req};
    }
    if (tag == "crash" && t.size() == 3) {
        auto a = u(1), n = u(2);
        if (!a || !n) return std::nullopt;
        return tr_crash{*a, static_cast<node_id>(*n)};
    }
    if (tag == "restart" && t.size() == 3) {
        auto a = u(1), n = u(2);
        if (!a || !n) return std::nullopt;
        return tr_restart{*a, static_cast<node_id>(*n)};
    }
    if (tag == "view" && t.size() == 7) {
        tr_view v;
        auto a = u(1), w = u(2), l = u(3), km = u(5);
        auto lsn = parse_ballot(t[4]);
        if (!a || !w || !l || !lsn || !km) return std::nullopt;
        v.tick = *a;
        v.view = *w;
        v.leader = static_cast<node_id>(*l);
        v.lsn = *lsn;
        v.known_max = *km;
        std::string cur;
        for (char c : t[6] + ",") {
            if (c == ',') {
                if (!cur.empty()) {
                    auto n = to_u64(cur);
                    if (!n) return std::nullopt;
                    v.ring.push_back(static_cast<node_id>(*n));
                    cur.clear();
                }
            } else {
                cur += c;
            }
        }
        return v;
    }
    if (tag == "timer" && t.size() == 5) {
        auto a = u(1), n = u(2), k = u(4);
        if (!a || !n || !k) return std::nullopt;
        return tr_timer{*a, static_cast<node_id>(*n), t[3], *k};
    }
    if (tag == "dyn" && t.size() == 4) {
        auto a = u(1), n = u(2), d = u(3);
        if (!a || !n || !d) return std::nullopt;
        return tr_dyn{*a, static_cast<node_id>(*n), static_cast<std::uint32_t>(*d)};
    }
    return std::nullopt;
}

std::string trace::to_text() const {
    std::string out = header;
    out += '\n';
    for (const auto& r : records) {
        out += format_trace_record(r);
        out += '\n';
    }
    return out;
}

std::optional<trace> parse_trace_text(const std::string& text, std::size_t* error_line) {
    trace tr;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (tr.header.empty()) tr.header = line;
            continue;
        }
        auto rec = parse_trace_record(line);
        if (!rec) {
            if (error_line) *error_line = lineno;
            return std::nullopt;
        }
        tr.records.push_back(std::move(*rec));
    }
    return tr;
}

}  // namespace htring
