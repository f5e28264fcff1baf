#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copytrace/object_id.hpp"

namespace copytrace::defork {

struct ProjectCluster {
    std::string id;                    // lexicographically smallest member
    std::vector<std::string> members;  // sorted

    bool operator==(const ProjectCluster&) const = default;
};

struct RepoCommits {
    std::string repo;
    std::vector<ObjectId> commits;
};

/// Deforked partition of the repository universe (the p2P map).
class ClusterMap {
public:
    ClusterMap() = default;
    explicit ClusterMap(std::vector<ProjectCluster> clusters);

    /// Throws Error(UnknownRepository).
    const std::string& project_of(std::string_view repo) const;
    bool contains(std::string_view repo) const;
    /// Sorted by id.
    const std::vector<ProjectCluster>& clusters() const noexcept { return clusters_; }
    std::size_t repo_count() const noexcept { return repo_to_project_.size(); }

    /// repo_id \t project_id, sorted by repo_id.
    std::string to_tsv() const;
    static ClusterMap from_tsv(const std::filesystem::path& path);

private:
    std::vector<ProjectCluster> clusters_;
    std::map<std::string, std::string, std::less<>> repo_to_project_;
};

/// Connected components over repos. threshold == 1 unions every pair of repos
/// sharing any commit; threshold k > 1 unions pairs sharing at least k commits.
/// Repos without commits become singletons.
ClusterMap build_clusters(std::span<const RepoCommits> repos, std::size_t threshold = 1);

}  // namespace copytrace::defork
