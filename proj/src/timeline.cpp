#include "copytrace/timeline.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <queue>
#include <unistd.h>

#include "copytrace/error.hpp"

namespace copytrace::timeline {

void validate_shard_count(unsigned n_shards) {
    if (n_shards < 1 || n_shards > 256 || (n_shards & (n_shards - 1)) != 0)
        throw Error(Errc::ConfigInvalid, "shard count must be a power of two in [1, 256], got " + std::to_string(n_shards));
}

unsigned shard_of(const ObjectId& blob, unsigned n_shards) noexcept {
    unsigned bits = 0;
    while ((1u << bits) < n_shards) ++bits;
    if (bits == 0) return 0;
    return blob[0] >> (8 - bits);
}

fs::path shard_path(const fs::path& dir, std::string_view prefix, unsigned shard) {
    return dir / (std::string(prefix) + "." + std::to_string(shard) + ".tsv");
}

ShardWriter::ShardWriter(const fs::path& dir, unsigned n_shards, std::string_view prefix) {
    validate_shard_count(n_shards);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::ShardIOFailure, "cannot create " + dir.string());
    for (unsigned k = 0; k < n_shards; ++k)
        files_.push_back(std::make_unique<tsv::FileWriter>(shard_path(dir, prefix, k), int(Errc::ShardIOFailure)));
    buffers_.resize(n_shards);
    counts_.assign(n_shards, 0);
}

void ShardWriter::write(const BlobEvent& e) {
    unsigned k = shard_of(e.blob, shard_count());
    append_event_tsv(buffers_[k], e);
    ++counts_[k];
    if (buffers_[k].size() > (1u << 16)) {
        files_[k]->write(buffers_[k]);
        buffers_[k].clear();
    }
}

void ShardWriter::close() {
    for (std::size_t k = 0; k < files_.size(); ++k) {
        files_[k]->write(buffers_[k]);
        buffers_[k].clear();
        files_[k]->close();
    }
}

void shard_events(std::span<const BlobEvent> rows, const fs::path& dir, unsigned n_shards) {
    ShardWriter writer(dir, n_shards);
    for (const auto& r : rows) writer.write(r);
    writer.close();
}

// ---------------------------------------------------------------------------
// Run files: fixed binary layout, one record per row.
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void spill_failure(const fs::path& path) {
    int err = errno;
    if (err == ENOSPC || err == EDQUOT) throw Error(Errc::SpillSpaceExhausted, "no space left writing " + path.string());
    throw Error(Errc::SpillSpaceExhausted, "cannot write spill file " + path.string());
}

class RunWriter {
public:
    explicit RunWriter(fs::path path) : path_(std::move(path)) {
        f_ = std::fopen(path_.c_str(), "wb");
        if (!f_) spill_failure(path_);
        std::setvbuf(f_, nullptr, _IOFBF, 1 << 20);
    }
    ~RunWriter() {
        if (f_) std::fclose(f_);
    }

    void write(const BlobEvent& e) {
        put(e.blob.raw().data(), 20);
        put(&e.time, sizeof e.time);
        put(&e.size, sizeof e.size);
        put_string(e.project);
        put_string(e.repo);
        put_string(e.path);
    }

    void close() {
        if (std::fclose(f_) != 0) {
            f_ = nullptr;
            spill_failure(path_);
        }
        f_ = nullptr;
    }

private:
    void put(const void* p, std::size_t n) {
        if (std::fwrite(p, 1, n, f_) != n) spill_failure(path_);
    }
    void put_string(const std::string& s) {
        auto len = static_cast<std::uint32_t>(s.size());
        put(&len, sizeof len);
        put(s.data(), s.size());
    }

    fs::path path_;
    std::FILE* f_ = nullptr;
};

class RunReader {
public:
    explicit RunReader(const fs::path& path) : path_(path) {
        f_ = std::fopen(path.c_str(), "rb");
        if (!f_) throw Error(Errc::IoError, "cannot reopen spill file " + path.string());
        std::setvbuf(f_, nullptr, _IOFBF, 1 << 16);
    }
    ~RunReader() {
        if (f_) std::fclose(f_);
    }
    RunReader(const RunReader&) = delete;
    RunReader& operator=(const RunReader&) = delete;

    bool next(BlobEvent& e) {
        std::uint8_t raw[20];
        std::size_t got = std::fread(raw, 1, 20, f_);
        if (got == 0) return false;
        if (got != 20) corrupt();
        e.blob = ObjectId::from_raw(raw);
        get(&e.time, sizeof e.time);
        get(&e.size, sizeof e.size);
        get_string(e.project);
        get_string(e.repo);
        get_string(e.path);
        return true;
    }

private:
    [[noreturn]] void corrupt() { throw Error(Errc::IoError, "truncated spill file " + path_.string()); }
    void get(void* p, std::size_t n) {
        if (std::fread(p, 1, n, f_) != n) corrupt();
    }
    void get_string(std::string& s) {
        std::uint32_t len = 0;
        get(&len, sizeof len);
        s.resize(len);
        if (len) get(s.data(), len);
    }

    fs::path path_;
    std::FILE* f_ = nullptr;
};

void merge_runs(const std::vector<fs::path>& runs, const EventSink& sink) {
    std::vector<std::unique_ptr<RunReader>> readers;
    std::vector<BlobEvent> heads(runs.size());
    for (const auto& r : runs) readers.push_back(std::make_unique<RunReader>(r));
    // Ties between runs resolve to the lower run index, keeping the merge stable.
    auto greater = [&](std::size_t a, std::size_t b) {
        auto c = compare_events(heads[a], heads[b]);
        return c > 0 || (c == 0 && a > b);
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
    for (std::size_t i = 0; i < readers.size(); ++i)
        if (readers[i]->next(heads[i])) heap.push(i);
    while (!heap.empty()) {
        std::size_t i = heap.top();
        heap.pop();
        sink(heads[i]);
        if (readers[i]->next(heads[i])) heap.push(i);
    }
}

std::atomic<std::uint64_t> g_sorter_serial{0};

}  // namespace

ExternalSorter::ExternalSorter(SortOptions options) : options_(std::move(options)) {
    if (options_.fan_in < 2) options_.fan_in = 2;
    serial_ = g_sorter_serial.fetch_add(1);
    if (options_.run_rows > 0) buffer_.reserve(std::min<std::size_t>(options_.run_rows, 1u << 20));
}

ExternalSorter::~ExternalSorter() {
    std::error_code ec;
    for (const auto& r : runs_) fs::remove(r, ec);
}

fs::path ExternalSorter::next_run_path() {
    std::error_code ec;
    fs::create_directories(options_.spill_dir, ec);
    if (ec) throw Error(Errc::SpillSpaceExhausted, "cannot create spill dir " + options_.spill_dir.string());
    return options_.spill_dir / ("run-" + std::to_string(::getpid()) + "-" + std::to_string(serial_) + "-" +
                                 std::to_string(runs_spilled_++) + ".bin");
}

void ExternalSorter::spill() {
    if (buffer_.empty()) return;
    std::sort(buffer_.begin(), buffer_.end(), EventLess{});
    fs::path path = next_run_path();
    RunWriter w(path);
    for (const auto& e : buffer_) w.write(e);
    w.close();
    runs_.push_back(path);
    buffer_.clear();
}

void ExternalSorter::add(BlobEvent e) {
    buffer_.push_back(std::move(e));
    if (options_.run_rows > 0 && buffer_.size() >= options_.run_rows) spill();
}

void ExternalSorter::finish(const EventSink& sink) {
    if (runs_.empty()) {
        std::sort(buffer_.begin(), buffer_.end(), EventLess{});
        for (const auto& e : buffer_) sink(e);
        buffer_.clear();
        return;
    }
    spill();
    // Reduce to at most fan_in runs with intermediate passes.
    while (runs_.size() > options_.fan_in) {
        std::vector<fs::path> next;
        for (std::size_t lo = 0; lo < runs_.size(); lo += options_.fan_in) {
            std::vector<fs::path> group(runs_.begin() + lo,
                                        runs_.begin() + std::min(runs_.size(), lo + options_.fan_in));
            if (group.size() == 1) {
                next.push_back(group.front());
                continue;
            }
            fs::path out = next_run_path();
            {
                RunWriter w(out);
                merge_runs(group, [&](const BlobEvent& e) { w.write(e); });
                w.close();
            }
            std::error_code ec;
            for (const auto& g : group) fs::remove(g, ec);
            next.push_back(out);
        }
        runs_ = std::move(next);
    }
    merge_runs(runs_, sink);
    std::error_code ec;
    for (const auto& r : runs_) fs::remove(r, ec);
    runs_.clear();
}

void read_events(const fs::path& path, const EventSink& sink) {
    tsv::LineReader reader(path);
    std::string line;
    while (reader.next(line)) sink(parse_event_tsv(line));
}

std::vector<BlobEvent> read_events(const fs::path& path) {
    std::vector<BlobEvent> out;
    read_events(path, [&](const BlobEvent& e) { out.push_back(e); });
    return out;
}

std::vector<ReuseInstance> read_instances(const fs::path& path) {
    std::vector<ReuseInstance> out;
    tsv::LineReader reader(path);
    std::string line;
    while (reader.next(line)) out.push_back(parse_instance_tsv(line));
    return out;
}

void sort_shard(const fs::path& shard, const SortOptions& options, const EventSink& sink) {
    ExternalSorter sorter(options);
    tsv::LineReader reader(shard);
    std::string line;
    while (reader.next(line)) sorter.add(parse_event_tsv(line));
    sorter.finish(sink);
}

std::vector<BlobEvent> sort_shard(const fs::path& shard, const SortOptions& options) {
    std::vector<BlobEvent> out;
    sort_shard(shard, options, [&](const BlobEvent& e) { out.push_back(e); });
    return out;
}

// ---------------------------------------------------------------------------
// Dedup and reuse derivation
// ---------------------------------------------------------------------------

namespace {

// Key order of the sorted timeline, ignoring the path/size tie-breaks.
int compare_key(const BlobEvent& a, const BlobEvent& b) {
    if (a.blob != b.blob) return a.blob < b.blob ? -1 : 1;
    if (a.time != b.time) return a.time < b.time ? -1 : 1;
    if (int c = a.project.compare(b.project)) return c;
    return a.repo.compare(b.repo);
}

}  // namespace

void FirstPerProject::push(const BlobEvent& e) {
    if (have_last_ && compare_key(last_, e) > 0)
        throw Error(Errc::UnsortedInput, "timeline row for " + e.blob.hex() + " precedes its predecessor");
    if (!have_last_ || last_.blob != e.blob) projects_.clear();
    if (projects_.insert(e.project).second) sink_(e);
    last_ = e;
    have_last_ = true;
}

std::vector<BlobEvent> dedupe_first_per_project(std::span<const BlobEvent> sorted) {
    std::vector<BlobEvent> out;
    FirstPerProject dedupe([&](const BlobEvent& e) { out.push_back(e); });
    for (const auto& e : sorted) dedupe.push(e);
    return out;
}

const ObjectId& Denylist::empty_blob() {
    static const ObjectId id = ObjectId::from_hex("e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    return id;
}

Denylist::Denylist() { ids_.insert(empty_blob()); }

void Denylist::load(const fs::path& path) {
    tsv::LineReader reader(path);
    std::string line;
    std::size_t lineno = 0;
    while (reader.next(line)) {
        ++lineno;
        auto hash = line.find('#');
        std::string_view body(line.data(), hash == std::string::npos ? line.size() : hash);
        while (!body.empty() && (body.back() == ' ' || body.back() == '\t' || body.back() == '\r')) body.remove_suffix(1);
        while (!body.empty() && (body.front() == ' ' || body.front() == '\t')) body.remove_prefix(1);
        if (body.empty()) continue;
        auto id = ObjectId::try_from_hex(body);
        if (!id) throw Error(Errc::ConfigInvalid, path.string() + ":" + std::to_string(lineno) + ": not a blob id");
        ids_.insert(*id);
    }
}

ReuseDeriver::ReuseDeriver(const Denylist& denylist, InstanceSink sink, Pairing pairing)
    : denylist_(denylist), sink_(std::move(sink)) {
    (void)pairing;  // origin fan-out is the only pairing
}

void ReuseDeriver::push(const BlobEvent& e) {
    if (have_last_) {
        int c = compare_key(last_, e);
        if (c > 0) throw Error(Errc::UnsortedInput, "timeline row for " + e.blob.hex() + " precedes its predecessor");
        if (last_.blob != e.blob) flush();
    }
    for (const auto& g : group_)
        if (g.project == e.project)
            throw Error(Errc::UnsortedInput, "project " + e.project + " repeats for blob " + e.blob.hex() +
                                                 "; input is not deduplicated");
    group_.push_back(e);
    last_ = e;
    have_last_ = true;
}

void ReuseDeriver::flush() {
    if (group_.size() >= 2 && !denylist_.contains(group_.front().blob)) {
        const BlobEvent& origin = group_.front();
        bool ambiguous = group_[1].time == origin.time;
        ReuseInstance r;
        r.blob = origin.blob;
        r.origin_project = origin.project;
        r.origin_time = origin.time;
        r.ambiguous_origin = ambiguous;
        for (std::size_t i = 1; i < group_.size(); ++i) {
            r.dest_project = group_[i].project;
            r.dest_time = group_[i].time;
            sink_(r);
        }
    }
    group_.clear();
}

void ReuseDeriver::finish() { flush(); }

std::vector<ReuseInstance> derive_reuse(std::span<const BlobEvent> deduped, const Denylist& denylist, Pairing pairing) {
    std::vector<ReuseInstance> out;
    ReuseDeriver d(denylist, [&](const ReuseInstance& r) { out.push_back(r); }, pairing);
    for (const auto& e : deduped) d.push(e);
    d.finish();
    return out;
}

}  // namespace copytrace::timeline
