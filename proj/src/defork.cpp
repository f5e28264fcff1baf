#include "copytrace/defork.hpp"

#include <algorithm>
#include <numeric>

#include "copytrace/error.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace::defork {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::uint8_t> rank_;
};

}  // namespace

ClusterMap::ClusterMap(std::vector<ProjectCluster> clusters) : clusters_(std::move(clusters)) {
    for (auto& c : clusters_) {
        std::sort(c.members.begin(), c.members.end());
        c.id = c.members.empty() ? std::string{} : c.members.front();
    }
    std::sort(clusters_.begin(), clusters_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& c : clusters_)
        for (const auto& m : c.members) repo_to_project_.emplace(m, c.id);
}

const std::string& ClusterMap::project_of(std::string_view repo) const {
    auto it = repo_to_project_.find(repo);
    if (it == repo_to_project_.end()) throw Error(Errc::UnknownRepository, std::string(repo));
    return it->second;
}

bool ClusterMap::contains(std::string_view repo) const { return repo_to_project_.find(repo) != repo_to_project_.end(); }

std::string ClusterMap::to_tsv() const {
    std::string out;
    for (const auto& [repo, project] : repo_to_project_) {
        tsv::append_escaped(out, repo);
        out.push_back('\t');
        tsv::append_escaped(out, project);
        out.push_back('\n');
    }
    return out;
}

ClusterMap ClusterMap::from_tsv(const std::filesystem::path& path) {
    std::map<std::string, std::vector<std::string>> by_project;
    tsv::LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
        auto f = tsv::split(line);
        if (f.size() != 2) throw Error(Errc::IoError, "bad p2P row in " + path.string());
        by_project[tsv::unescape(f[1])].push_back(tsv::unescape(f[0]));
    }
    std::vector<ProjectCluster> clusters;
    for (auto& [id, members] : by_project) {
        ProjectCluster c{id, std::move(members)};
        std::sort(c.members.begin(), c.members.end());
        if (c.members.front() != id) throw Error(Errc::IoError, "p2P project id is not its smallest member: " + id);
        clusters.push_back(std::move(c));
    }
    return ClusterMap(std::move(clusters));
}

ClusterMap build_clusters(std::span<const RepoCommits> repos, std::size_t threshold) {
    if (threshold == 0) throw Error(Errc::ConfigInvalid, "defork threshold must be >= 1");
    std::vector<const RepoCommits*> order;
    for (const auto& r : repos) order.push_back(&r);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->repo < b->repo; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (order[i]->repo == order[i - 1]->repo)
            throw Error(Errc::ConfigInvalid, "duplicate repository id " + order[i]->repo);

    std::vector<std::pair<ObjectId, std::uint32_t>> membership;
    for (std::uint32_t i = 0; i < order.size(); ++i)
        for (const auto& c : order[i]->commits) membership.emplace_back(c, i);
    std::sort(membership.begin(), membership.end());
    membership.erase(std::unique(membership.begin(), membership.end()), membership.end());

    DisjointSets sets(order.size());
    if (threshold == 1) {
        for (std::size_t i = 1; i < membership.size(); ++i)
            if (membership[i].first == membership[i - 1].first) sets.unite(membership[i].second, membership[i - 1].second);
    } else {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> shared;
        for (std::size_t lo = 0; lo < membership.size();) {
            std::size_t hi = lo;
            while (hi < membership.size() && membership[hi].first == membership[lo].first) ++hi;
            for (std::size_t a = lo; a < hi; ++a)
                for (std::size_t b = a + 1; b < hi; ++b) ++shared[{membership[a].second, membership[b].second}];
            lo = hi;
        }
        for (const auto& [pair, count] : shared)
            if (count >= threshold) sets.unite(pair.first, pair.second);
    }

    std::map<std::size_t, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < order.size(); ++i) groups[sets.find(i)].push_back(order[i]->repo);
    std::vector<ProjectCluster> clusters;
    for (auto& [root, members] : groups) clusters.push_back({{}, std::move(members)});
    return ClusterMap(std::move(clusters));
}

}  // namespace copytrace::defork
