#include "htring/storage.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace htring {

namespace {

std::string opt_value_str(const std::optional<value>& v) {
    return v ? format_value(*v) : "-";
}

}  // namespace

std::string format_record(const stable_record& r) {
    if (const auto* c = std::get_if<coordinator_instance_record>(&r)) {
        return "coord " + std::to_string(c->instance) + " " + format_ballot(c->crnd) + " " +
               opt_value_str(c->cval);
    }
    if (const auto* a = std::get_if<acceptor_instance_record>(&r)) {
        return "acc " + std::to_string(a->instance) + " " + format_ballot(a->rnd) + " " +
               format_ballot(a->vrnd) + " " + opt_value_str(a->vval) + " " + std::to_string(a->sn);
    }
    const auto& e = std::get<election_record>(r);
    std::string out = "elec " + std::to_string(e.view) + " " + std::to_string(e.leader) + " " +
                      format_ballot(e.lsn) + " " + std::to_string(e.known_max) + " ";
    for (size_t i = 0; i < e.ring.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(e.ring[i]);
    }
    out += ' ';
    for (size_t i = 0; i < e.lan_broadcasters.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(e.lan_broadcasters[i]);
    }
    return out;
}

void memory_store::persist(const stable_record& r) {
    ++writes_;
    if (const auto* c = std::get_if<coordinator_instance_record>(&r)) {
        coord_[c->instance] = *c;
    } else if (const auto* a = std::get_if<acceptor_instance_record>(&r)) {
        acc_[a->instance] = *a;
    } else {
        election_ = std::get<election_record>(r);
    }
}

std::vector<stable_record> memory_store::recover() const {
    std::vector<stable_record> out;
    if (election_) out.push_back(*election_);
    for (const auto& [i, rec] : coord_) out.push_back(rec);
    for (const auto& [i, rec] : acc_) out.push_back(rec);
    return out;
}

// --- binary encoding for the file backend ---------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_ballot(std::vector<std::uint8_t>& b, const ballot& bl) {
    put_u64(b, bl.seq);
    put_u32(b, bl.node);
}
void put_value(std::vector<std::uint8_t>& b, const std::optional<value>& v) {
    if (!v) {
        b.push_back(0xff);
        return;
    }
    b.push_back(static_cast<std::uint8_t>(v->kind));
    if (v->kind == value::kind_t::request) {
        put_u32(b, v->req.client);
        put_u64(b, v->req.seq);
    } else if (v->kind == value::kind_t::batch) {
        put_u32(b, v->batch.broadcaster);
        put_u64(b, v->batch.seq);
    }
}

struct reader {
    const std::vector<std::uint8_t>& b;
    size_t pos = 0;
    bool ok = true;

    std::uint8_t u8() {
        if (pos + 1 > b.size()) { ok = false; return 0; }
        return b[pos++];
    }
    std::uint32_t u32() {
        if (pos + 4 > b.size()) { ok = false; return 0; }
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        if (pos + 8 > b.size()) { ok = false; return 0; }
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[pos++]) << (8 * i);
        return v;
    }
    ballot bal() {
        ballot bl;
        bl.seq = u64();
        bl.node = u32();
        return bl;
    }
    std::optional<value> val() {
        auto tag = u8();
        if (tag == 0xff) return std::nullopt;
        value v;
        v.kind = static_cast<value::kind_t>(tag);
        if (v.kind == value::kind_t::request) {
            v.req.client = u32();
            v.req.seq = u64();
        } else if (v.kind == value::kind_t::batch) {
            v.batch.broadcaster = u32();
            v.batch.seq = u64();
        }
        return v;
    }
};

}  // namespace

std::vector<std::uint8_t> encode_record(const stable_record& r) {
    std::vector<std::uint8_t> b;
    if (const auto* c = std::get_if<coordinator_instance_record>(&r)) {
        b.push_back(0);
        put_u64(b, c->instance);
        put_ballot(b, c->crnd);
        put_value(b, c->cval);
    } else if (const auto* a = std::get_if<acceptor_instance_record>(&r)) {
        b.push_back(1);
        put_u64(b, a->instance);
        put_ballot(b, a->rnd);
        put_ballot(b, a->vrnd);
        put_value(b, a->vval);
        put_u32(b, a->sn);
    } else {
        const auto& e = std::get<election_record>(r);
        b.push_back(2);
        put_u64(b, e.view);
        put_u32(b, e.leader);
        put_ballot(b, e.lsn);
        put_u64(b, e.known_max);
        put_u32(b, static_cast<std::uint32_t>(e.ring.size()));
        for (auto n : e.ring) put_u32(b, n);
        put_u32(b, static_cast<std::uint32_t>(e.lan_broadcasters.size()));
        for (auto n : e.lan_broadcasters) put_u32(b, n);
    }
    return b;
}

std::optional<stable_record> decode_record(const std::vector<std::uint8_t>& bytes) {
    reader rd{bytes};
    auto tag = rd.u8();
    if (tag == 0) {
        coordinator_instance_record c;
        c.instance = rd.u64();
        c.crnd = rd.bal();
        c.cval = rd.val();
        if (!rd.ok) return std::nullopt;
        return c;
    }
    if (tag == 1) {
        acceptor_instance_record a;
        a.instance = rd.u64();
        a.rnd = rd.bal();
        a.vrnd = rd.bal();
        a.vval = rd.val();
        a.sn = rd.u32();
        if (!rd.ok) return std::nullopt;
        return a;
    }
    if (tag == 2) {
        election_record e;
        e.view = rd.u64();
        e.leader = rd.u32();
        e.lsn = rd.bal();
        e.known_max = rd.u64();
        auto nr = rd.u32();
        for (std::uint32_t i = 0; i < nr && rd.ok; ++i) e.ring.push_back(rd.u32());
        auto nl = rd.u32();
        for (std::uint32_t i = 0; i < nl && rd.ok; ++i) e.lan_broadcasters.push_back(rd.u32());
        if (!rd.ok) return std::nullopt;
        return e;
    }
    return std::nullopt;
}

void file_store::persist(const stable_record& r) {
    auto payload = encode_record(r);
    std::vector<std::uint8_t> entry;
    put_u32(entry, static_cast<std::uint32_t>(payload.size()));
    entry.insert(entry.end(), payload.begin(), payload.end());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(reinterpret_cast<const char*>(entry.data()),
              static_cast<std::streamsize>(entry.size()));
    out.flush();
}

std::vector<stable_record> file_store::recover() const {
    // Replay the log through a memory_store so last-writer-wins keying
    // matches the in-memory backend exactly.
    memory_store replay;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return {};
    while (true) {
        std::uint8_t len_bytes[4];
        if (!in.read(reinterpret_cast<char*>(len_bytes), 4)) break;
        std::uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len |= std::uint32_t(len_bytes[i]) << (8 * i);
        std::vector<std::uint8_t> payload(len);
        if (!in.read(reinterpret_cast<char*>(payload.data()), len)) break;  // torn tail entry
        auto rec = decode_record(payload);
        if (!rec) break;
        replay.persist(*rec);
    }
    return replay.recover();
}

}  // namespace htring
