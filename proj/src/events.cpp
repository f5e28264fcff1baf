#include "copytrace/events.hpp"

#include "copytrace/error.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace {

void append_event_tsv(std::string& out, const BlobEvent& e) {
    e.blob.append_hex(out);
    out.push_back('\t');
    tsv::append_int(out, e.time);
    out.push_back('\t');
    tsv::append_escaped(out, e.project);
    out.push_back('\t');
    tsv::append_escaped(out, e.repo);
    out.push_back('\t');
    tsv::append_escaped(out, e.path);
    out.push_back('\t');
    tsv::append_uint(out, e.size);
    out.push_back('\n');
}

std::string event_tsv(const BlobEvent& e) {
    std::string s;
    append_event_tsv(s, e);
    return s;
}

BlobEvent parse_event_tsv(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    thread_local std::vector<std::string_view> f;
    tsv::split(line, f);
    if (f.size() != 6) throw Error(Errc::IoError, "event row needs 6 fields: '" + std::string(line) + "'");
    auto id = ObjectId::try_from_hex(f[0]);
    if (!id) throw Error(Errc::IoError, "bad blob id in event row");
    BlobEvent e;
    e.blob = *id;
    e.time = tsv::parse_i64(f[1]);
    e.project = tsv::unescape(f[2]);
    e.repo = tsv::unescape(f[3]);
    e.path = tsv::unescape(f[4]);
    e.size = tsv::parse_u64(f[5]);
    return e;
}

void append_instance_tsv(std::string& out, const ReuseInstance& r) {
    r.blob.append_hex(out);
    out.push_back('\t');
    tsv::append_escaped(out, r.origin_project);
    out.push_back('\t');
    tsv::append_int(out, r.origin_time);
    out.push_back('\t');
    tsv::append_escaped(out, r.dest_project);
    out.push_back('\t');
    tsv::append_int(out, r.dest_time);
    out += r.ambiguous_origin ? "\t1\n" : "\t0\n";
}

ReuseInstance parse_instance_tsv(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    auto f = tsv::split(line);
    if (f.size() != 6) throw Error(Errc::IoError, "reuse row needs 6 fields: '" + std::string(line) + "'");
    auto id = ObjectId::try_from_hex(f[0]);
    if (!id) throw Error(Errc::IoError, "bad blob id in reuse row");
    ReuseInstance r;
    r.blob = *id;
    r.origin_project = tsv::unescape(f[1]);
    r.origin_time = tsv::parse_i64(f[2]);
    r.dest_project = tsv::unescape(f[3]);
    r.dest_time = tsv::parse_i64(f[4]);
    if (f[5] != "0" && f[5] != "1") throw Error(Errc::IoError, "bad ambiguous flag in reuse row");
    r.ambiguous_origin = f[5] == "1";
    return r;
}

}  // namespace copytrace
