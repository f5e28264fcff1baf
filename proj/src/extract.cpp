#include "copytrace/extract.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "copytrace/error.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace::extract {

namespace {

constexpr std::size_t kBinaryProbe = 8000;

// Unique blobs of one tree, each with its smallest path; sorted by blob id.
using BlobSet = std::vector<std::pair<ObjectId, std::string>>;

std::shared_ptr<const BlobSet> blob_set_of(const git::ObjectStore& store, const ObjectId& tree) {
    auto listing = git::walk_tree(store, tree);  // sorted by path
    auto set = std::make_shared<BlobSet>();
    set->reserve(listing.size());
    for (auto& pb : listing) set->emplace_back(pb.blob, std::move(pb.path));
    std::stable_sort(set->begin(), set->end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    set->erase(std::unique(set->begin(), set->end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
               set->end());
    return set;
}

bool contains(const BlobSet& set, const ObjectId& id) {
    auto it = std::lower_bound(set.begin(), set.end(), id, [](const auto& e, const ObjectId& v) { return e.first < v; });
    return it != set.end() && it->first == id;
}

}  // namespace

std::vector<CommitRecord> sanitize_timestamps(std::vector<CommitRecord> commits, std::int64_t floor,
                                              std::int64_t horizon) {
    if (floor >= horizon) throw Error(Errc::ConfigInvalid, "sanitization floor must precede horizon");
    std::unordered_map<ObjectId, std::size_t> index;
    for (std::size_t i = 0; i < commits.size(); ++i) index.emplace(commits[i].id, i);

    std::vector<std::size_t> pending(commits.size(), 0);
    std::vector<std::vector<std::size_t>> children(commits.size());
    for (std::size_t i = 0; i < commits.size(); ++i)
        for (const auto& p : commits[i].parents)
            if (auto it = index.find(p); it != index.end()) {
                ++pending[i];
                children[it->second].push_back(i);
            }

    auto later = [&](std::size_t a, std::size_t b) { return commits[a].id > commits[b].id; };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
    for (std::size_t i = 0; i < commits.size(); ++i)
        if (pending[i] == 0) ready.push(i);

    std::vector<std::size_t> order;
    order.reserve(commits.size());
    while (!ready.empty()) {
        std::size_t i = ready.top();
        ready.pop();
        order.push_back(i);
        CommitRecord& c = commits[i];
        bool has_parent = false;
        std::int64_t parent_max = 0;
        for (const auto& p : c.parents)
            if (auto it = index.find(p); it != index.end()) {
                std::int64_t t = commits[it->second].effective_time;
                parent_max = has_parent ? std::max(parent_max, t) : t;
                has_parent = true;
            }
        std::int64_t base = c.raw_time;
        if (base < floor || base > horizon) base = has_parent ? parent_max : floor;
        c.effective_time = has_parent ? std::max(base, parent_max) : base;
        c.repaired = c.effective_time != c.raw_time;
        for (std::size_t ch : children[i])
            if (--pending[ch] == 0) ready.push(ch);
    }
    if (order.size() != commits.size()) throw Error(Errc::CycleDetected, "commit graph contains a cycle");

    std::vector<CommitRecord> out;
    out.reserve(commits.size());
    for (std::size_t i : order) out.push_back(std::move(commits[i]));
    return out;
}

RepoHistory extract_blob_creations(const git::ObjectStore& store, const std::string& repo_id, std::int64_t floor,
                                   std::int64_t horizon) {
    RepoHistory hist;
    hist.repo = repo_id;

    // Reachable commits from every ref.
    std::deque<ObjectId> queue;
    std::unordered_set<ObjectId> seen;
    for (const auto& ref : store.refs()) {
        ObjectId target = ref.target;
        for (int hops = 0; hops < 16; ++hops) {
            auto obj = store.read(target);
            if (obj.kind == git::ObjectKind::Tag) {
                target = git::parse_tag_target(obj);
                continue;
            }
            if (obj.kind == git::ObjectKind::Commit && seen.insert(target).second) queue.push_back(target);
            break;
        }
    }
    std::vector<CommitRecord> commits;
    while (!queue.empty()) {
        ObjectId id = queue.front();
        queue.pop_front();
        CommitRecord rec = git::parse_commit(store.read(id), id);
        for (const auto& p : rec.parents)
            if (seen.insert(p).second) queue.push_back(p);
        commits.push_back(std::move(rec));
    }
    hist.commits = sanitize_timestamps(std::move(commits), floor, horizon);

    std::unordered_map<ObjectId, std::size_t> position;
    std::vector<std::size_t> remaining_children(hist.commits.size(), 0);
    for (std::size_t i = 0; i < hist.commits.size(); ++i) position.emplace(hist.commits[i].id, i);
    for (const auto& c : hist.commits)
        for (const auto& p : c.parents) ++remaining_children[position.at(p)];

    std::vector<std::shared_ptr<const BlobSet>> sets(hist.commits.size());
    std::unordered_map<ObjectId, BlobInfo> infos;

    for (std::size_t i = 0; i < hist.commits.size(); ++i) {
        const CommitRecord& c = hist.commits[i];
        std::vector<const BlobSet*> parent_sets;
        std::shared_ptr<const BlobSet> own;
        for (const auto& p : c.parents) {
            std::size_t pi = position.at(p);
            parent_sets.push_back(sets[pi].get());
            if (!own && hist.commits[pi].tree == c.tree) own = sets[pi];
        }
        if (!own) own = blob_set_of(store, c.tree);

        for (const auto& [blob, path] : *own) {
            bool inherited = std::any_of(parent_sets.begin(), parent_sets.end(),
                                         [&](const BlobSet* s) { return contains(*s, blob); });
            if (inherited) continue;
            auto it = infos.find(blob);
            if (it == infos.end()) {
                auto obj = store.read(blob);
                if (obj.kind != git::ObjectKind::Blob)
                    throw Error(Errc::CorruptTree, "tree entry " + blob.hex() + " is not a blob");
                auto probe = std::span(obj.payload).first(std::min(obj.payload.size(), kBinaryProbe));
                bool nul = std::find(probe.begin(), probe.end(), std::uint8_t{0}) != probe.end();
                it = infos.emplace(blob, BlobInfo{blob, obj.payload.size(), nul}).first;
            }
            hist.creations.push_back({c.id, blob, path, c.effective_time, repo_id, it->second.size});
        }
        sets[i] = std::move(own);
        for (const auto& p : c.parents) {
            std::size_t pi = position.at(p);
            if (--remaining_children[pi] == 0) sets[pi].reset();
        }
        if (remaining_children[i] == 0) sets[i].reset();
    }

    hist.blobs.reserve(infos.size());
    for (auto& [id, info] : infos) hist.blobs.push_back(info);
    std::sort(hist.blobs.begin(), hist.blobs.end(), [](const auto& a, const auto& b) { return a.blob < b.blob; });
    return hist;
}

void emit_events(std::span<const BlobCreation> creations, const defork::ClusterMap& clusters,
                 const std::function<void(const BlobEvent&)>& sink) {
    BlobEvent e;
    for (const auto& c : creations) {
        if (!clusters.contains(c.repo)) throw Error(Errc::UnmappedRepository, c.repo);
        e.blob = c.blob;
        e.time = c.time;
        e.project = clusters.project_of(c.repo);
        e.repo = c.repo;
        e.path = c.path;
        e.size = c.size;
        sink(e);
    }
}

std::vector<BlobEvent> emit_events(std::span<const BlobCreation> creations, const defork::ClusterMap& clusters) {
    std::vector<BlobEvent> out;
    out.reserve(creations.size());
    emit_events(creations, clusters, [&](const BlobEvent& e) { out.push_back(e); });
    return out;
}

void append_commit_tsv(std::string& out, const std::string& repo, const CommitRecord& c) {
    tsv::append_escaped(out, repo);
    out.push_back('\t');
    c.id.append_hex(out);
    out.push_back('\t');
    tsv::append_int(out, c.raw_time);
    out.push_back('\t');
    tsv::append_int(out, c.effective_time);
    out += c.repaired ? "\t1\t" : "\t0\t";
    tsv::append_escaped(out, c.author);
    out.push_back('\n');
}

}  // namespace copytrace::extract
