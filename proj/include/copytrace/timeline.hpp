#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "copytrace/events.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace::timeline {

namespace fs = std::filesystem;

using EventSink = std::function<void(const BlobEvent&)>;
using InstanceSink = std::function<void(const ReuseInstance&)>;

/// Throws Error(ConfigInvalid) unless n is a power of two in [1, 256].
void validate_shard_count(unsigned n_shards);

/// Leading log2(n_shards) bits of the blob id.
unsigned shard_of(const ObjectId& blob, unsigned n_shards) noexcept;

/// "<prefix>.<shard>.tsv"
fs::path shard_path(const fs::path& dir, std::string_view prefix, unsigned shard);

/// Appends event rows to per-shard spill files; one writer per shard.
class ShardWriter {
public:
    ShardWriter(const fs::path& dir, unsigned n_shards, std::string_view prefix = "events");

    void write(const BlobEvent& e);
    void close();
    unsigned shard_count() const noexcept { return static_cast<unsigned>(files_.size()); }
    const std::vector<std::uint64_t>& row_counts() const noexcept { return counts_; }

private:
    std::vector<std::unique_ptr<tsv::FileWriter>> files_;
    std::vector<std::string> buffers_;
    std::vector<std::uint64_t> counts_;
};

void shard_events(std::span<const BlobEvent> rows, const fs::path& dir, unsigned n_shards);

struct SortOptions {
    /// Rows held in memory per run; 0 sorts entirely in memory.
    std::size_t run_rows = 1'000'000;
    /// Maximum runs merged at once.
    std::size_t fan_in = 64;
    /// Directory for run files; created if missing.
    fs::path spill_dir = fs::temp_directory_path();
};

/// Bounded-memory merge sort of BlobEvent rows in compare_events order.
/// Spill failures raise Error(SpillSpaceExhausted).
class ExternalSorter {
public:
    explicit ExternalSorter(SortOptions options);
    ~ExternalSorter();
    ExternalSorter(const ExternalSorter&) = delete;
    ExternalSorter& operator=(const ExternalSorter&) = delete;

    void add(BlobEvent e);
    /// Streams all rows in sorted order; the sorter is empty afterwards.
    void finish(const EventSink& sink);

    std::size_t runs_spilled() const noexcept { return runs_spilled_; }

private:
    void spill();
    fs::path next_run_path();

    SortOptions options_;
    std::vector<BlobEvent> buffer_;
    std::vector<fs::path> runs_;
    std::size_t runs_spilled_ = 0;
    std::uint64_t serial_ = 0;
};

/// Sorts one TSV shard of event rows.
void sort_shard(const fs::path& shard, const SortOptions& options, const EventSink& sink);
std::vector<BlobEvent> sort_shard(const fs::path& shard, const SortOptions& options);

/// Keeps the first row of every (blob, project) in a sorted stream.
/// Throws Error(UnsortedInput) when the stream is out of order.
class FirstPerProject {
public:
    explicit FirstPerProject(EventSink sink) : sink_(std::move(sink)) {}
    void push(const BlobEvent& e);

private:
    EventSink sink_;
    bool have_last_ = false;
    BlobEvent last_;
    std::unordered_set<std::string> projects_;
};

std::vector<BlobEvent> dedupe_first_per_project(std::span<const BlobEvent> sorted);

class Denylist {
public:
    /// Always contains the empty blob.
    Denylist();
    /// One 40-hex id per line; blank lines and '#' comments ignored.
    void load(const fs::path& path);
    void add(const ObjectId& id) { ids_.insert(id); }
    bool contains(const ObjectId& id) const { return ids_.count(id) != 0; }
    std::size_t size() const noexcept { return ids_.size(); }

    static const ObjectId& empty_blob();

private:
    std::unordered_set<ObjectId> ids_;
};

enum class Pairing { OriginFanout };

/// Pairs the origin of every blob with each later project. Input must be the
/// deduplicated timeline in sorted order.
class ReuseDeriver {
public:
    ReuseDeriver(const Denylist& denylist, InstanceSink sink, Pairing pairing = Pairing::OriginFanout);
    void push(const BlobEvent& e);
    void finish();

private:
    void flush();

    const Denylist& denylist_;
    InstanceSink sink_;
    std::vector<BlobEvent> group_;
    bool have_last_ = false;
    BlobEvent last_;
};

std::vector<ReuseInstance> derive_reuse(std::span<const BlobEvent> deduped, const Denylist& denylist,
                                        Pairing pairing = Pairing::OriginFanout);

/// Streams every row of a TSV event file.
void read_events(const fs::path& path, const EventSink& sink);
std::vector<BlobEvent> read_events(const fs::path& path);
std::vector<ReuseInstance> read_instances(const fs::path& path);

}  // namespace copytrace::timeline
