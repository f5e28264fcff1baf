#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "copytrace/object_id.hpp"

namespace copytrace {

/// One blob-creation record. Before dedup this is a raw event row; after dedup
/// it is the first appearance of `blob` in `project` (t_b(P) in `time`).
struct BlobEvent {
    ObjectId blob;
    std::int64_t time = 0;
    std::string project;
    std::string repo;
    std::string path;
    std::uint64_t size = 0;

    bool operator==(const BlobEvent&) const = default;
};

/// Total order used by the timeline sort: (blob, time, project, repo), with
/// (path, size) as final tie-breaks so the order is a function of row content.
inline std::strong_ordering compare_events(const BlobEvent& a, const BlobEvent& b) noexcept {
    if (auto c = a.blob <=> b.blob; c != 0) return c;
    if (auto c = a.time <=> b.time; c != 0) return c;
    if (auto c = a.project.compare(b.project); c != 0) return c <=> 0;
    if (auto c = a.repo.compare(b.repo); c != 0) return c <=> 0;
    if (auto c = a.path.compare(b.path); c != 0) return c <=> 0;
    return a.size <=> b.size;
}

struct EventLess {
    bool operator()(const BlobEvent& a, const BlobEvent& b) const noexcept { return compare_events(a, b) < 0; }
};

struct ReuseInstance {
    ObjectId blob;
    std::string origin_project;
    std::int64_t origin_time = 0;
    std::string dest_project;
    std::int64_t dest_time = 0;
    bool ambiguous_origin = false;

    bool operator==(const ReuseInstance&) const = default;
    auto operator<=>(const ReuseInstance&) const = default;
};

/// blob_hex \t time \t project \t repo \t path \t size
void append_event_tsv(std::string& out, const BlobEvent& e);
std::string event_tsv(const BlobEvent& e);
/// Throws Error(IoError) on a malformed line.
BlobEvent parse_event_tsv(std::string_view line);

/// blob \t origin_project \t origin_time \t dest_project \t dest_time \t ambiguous(0/1)
void append_instance_tsv(std::string& out, const ReuseInstance& r);
ReuseInstance parse_instance_tsv(std::string_view line);

}  // namespace copytrace
