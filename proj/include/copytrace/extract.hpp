#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "copytrace/defork.hpp"
#include "copytrace/events.hpp"
#include "copytrace/gitstore.hpp"

namespace copytrace::extract {

using git::CommitRecord;

/// 1990-01-01T00:00:00Z
inline constexpr std::int64_t kDefaultFloor = 631152000;

struct BlobCreation {
    ObjectId commit;
    ObjectId blob;
    std::string path;  // smallest path carrying the blob in this commit
    std::int64_t time = 0;
    std::string repo;
    std::uint64_t size = 0;

    bool operator==(const BlobCreation&) const = default;
};

/// Per-blob facts gathered while reading payloads (blobs.tsv).
struct BlobInfo {
    ObjectId blob;
    std::uint64_t size = 0;
    bool has_nul = false;  // NUL within the first 8000 bytes

    bool operator==(const BlobInfo&) const = default;
};

/// Returns the commits in topological order (parents first, ties by id) with
/// effective_time/repaired filled in. Parents outside the set are ignored.
/// Throws Error(CycleDetected) or Error(ConfigInvalid) when floor >= horizon.
std::vector<CommitRecord> sanitize_timestamps(std::vector<CommitRecord> commits, std::int64_t floor,
                                              std::int64_t horizon);

struct RepoHistory {
    std::string repo;
    std::vector<CommitRecord> commits;  // sanitized, topological
    std::vector<BlobCreation> creations;
    std::vector<BlobInfo> blobs;  // sorted by blob, one per created blob
};

/// Walks every commit reachable from any ref (tags peeled) and emits the blobs
/// each commit introduces relative to the union of its parents' trees.
RepoHistory extract_blob_creations(const git::ObjectStore& store, const std::string& repo_id, std::int64_t floor,
                                   std::int64_t horizon);

/// Joins creations with the deforked project map. Throws Error(UnmappedRepository).
void emit_events(std::span<const BlobCreation> creations, const defork::ClusterMap& clusters,
                 const std::function<void(const BlobEvent&)>& sink);
std::vector<BlobEvent> emit_events(std::span<const BlobCreation> creations, const defork::ClusterMap& clusters);

/// repo \t commit \t raw_time \t effective_time \t repaired(0/1) \t author
void append_commit_tsv(std::string& out, const std::string& repo, const CommitRecord& c);

}  // namespace copytrace::extract
