#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "copytrace/codec.hpp"
#include "copytrace/object_id.hpp"

namespace copytrace::git {

namespace fs = std::filesystem;

enum class ObjectKind : std::uint8_t { Commit = 1, Tree = 2, Blob = 3, Tag = 4 };

std::string_view kind_name(ObjectKind kind) noexcept;

struct GitObject {
    ObjectKind kind = ObjectKind::Blob;
    Bytes payload;

    std::size_t size() const noexcept { return payload.size(); }
    std::string_view text() const noexcept { return as_chars(payload); }
};

inline constexpr std::uint32_t kModeTree = 0040000;
inline constexpr std::uint32_t kModeGitlink = 0160000;
inline constexpr std::uint32_t kModeSymlink = 0120000;

struct TreeEntry {
    std::uint32_t mode = 0;
    std::string name;
    ObjectId id;
};

struct Ref {
    std::string name;
    ObjectId target;
};

/// Parsed commit header. `effective_time` and `repaired` start as copies of
/// the raw values and are rewritten by timestamp sanitization.
struct CommitRecord {
    ObjectId id;
    ObjectId tree;
    std::vector<ObjectId> parents;
    std::int64_t author_time = 0;
    std::int32_t author_tz_minutes = 0;
    std::int64_t raw_time = 0;  // committer time
    std::int32_t committer_tz_minutes = 0;
    std::int64_t effective_time = 0;
    bool repaired = false;
    std::string author;  // "Name <email>"
};

struct PathBlob {
    std::string path;
    ObjectId blob;
    std::uint32_t mode = 0;

    bool operator==(const PathBlob&) const = default;
};

struct StoreOptions {
    /// Recompute the object name of every materialized object.
    bool verify_hashes = true;
    /// Budget for the shared decoded-object cache; 0 disables it.
    std::size_t cache_bytes = 32u << 20;
};

/// Read-only view of a git object database (loose objects plus v2 packs).
/// Copies share the underlying state; all const members are safe to call
/// concurrently.
class ObjectStore {
public:
    static ObjectStore open(const fs::path& repo_path, StoreOptions options = {});

    const fs::path& git_dir() const noexcept;
    std::size_t object_count() const noexcept;
    /// Sorted, duplicate-free.
    std::vector<ObjectId> object_ids() const;
    bool contains(const ObjectId& id) const noexcept;
    std::size_t pack_count() const noexcept;

    GitObject read(const ObjectId& id) const;

    /// All refs (loose, packed-refs, HEAD) resolved to object ids, sorted by name.
    /// Dangling symbolic refs are omitted.
    std::vector<Ref> refs() const;

    struct Impl;

private:
    explicit ObjectStore(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<Impl> impl_;
};

inline ObjectStore open_store(const fs::path& repo_path, StoreOptions options = {}) {
    return ObjectStore::open(repo_path, options);
}
inline GitObject read_object(const ObjectStore& store, const ObjectId& id) { return store.read(id); }

/// Locates the git directory for a work tree or bare repository; empty if none.
fs::path find_git_dir(const fs::path& repo_path);

CommitRecord parse_commit(const GitObject& obj, const ObjectId& id);
std::vector<TreeEntry> parse_tree(const GitObject& obj);

/// Target object of an annotated tag.
ObjectId parse_tag_target(const GitObject& obj);

/// Recursive listing of blobs (regular files and symlinks) under `tree_id`,
/// sorted by path. Gitlinks are skipped.
std::vector<PathBlob> walk_tree(const ObjectStore& store, const ObjectId& tree_id);

/// Applies a git binary delta to `base`. Throws Error(CorruptObject) on malformed input.
Bytes apply_delta(std::span<const std::uint8_t> base, std::span<const std::uint8_t> delta);

}  // namespace copytrace::git
