#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "copytrace/codec.hpp"
#include "copytrace/defork.hpp"
#include "copytrace/events.hpp"
#include "copytrace/metrics.hpp"
#include "copytrace/object_id.hpp"

/// Deterministic git corpora from a line-oriented script, plus a brute-force
/// oracle that recomputes every pipeline output from the script alone.
///
/// Script grammar, one directive per line ('#' starts a comment line):
///
///     repo <id>
///     fork <new> from <repo>@<commit>
///     commit <id> time=<iso8601|@epoch> [parent=<id>|parent=none]... [author=<name>]
///     file <path> <<TAG          heredoc; lines up to a line equal to TAG
///     file <path> text=<word>    content "<word>\n"
///     file <path> hex=<bytes>    raw bytes, e.g. binary content
///     file <path> seed=<n> size=<k>
///     delete <path>
///     symlink <path> <target>
///     gitlink <path> <40-hex>
///     churn <n> start=<iso8601> step=<seconds>   n tree-preserving commits
///     tag <name> <commit>        annotated tag in the current repo
///     meta <repo> stars=<n> forks=<n>
///     deny <40-hex> | deny text=<word>
///     expect-cluster <repo>...
///
/// `commit` adds to the current repo; without parent= its parent is the repo's
/// previously declared commit (or the fork point). A commit starts from its
/// first parent's files. File directives apply to the latest commit.
namespace copytrace::synth {

namespace fs = std::filesystem;

enum class EntryKind { File, Symlink, Gitlink };

struct FileEntry {
    EntryKind kind = EntryKind::File;
    std::string content;  // file bytes or symlink target
    ObjectId gitlink;

    bool operator==(const FileEntry&) const = default;
};

using FileMap = std::map<std::string, FileEntry>;

struct ScriptCommit {
    std::string label;
    std::int64_t time = 0;
    std::vector<std::string> parents;
    std::string author;  // full identity "name <name@example.com>"
    FileMap files;       // complete tree after this commit
};

struct ScriptTag {
    std::string name;
    std::string commit;
};

struct ScriptRepo {
    std::string id;
    std::vector<std::string> commits;  // labels in declaration order (fork history first)
    std::vector<ScriptTag> tags;
    std::optional<std::string> fork_of;
};

/// Resolved script: commits are global by label; repos list the labels they contain.
struct CorpusScript {
    std::map<std::string, ScriptCommit> commits;
    std::vector<ScriptRepo> repos;
    std::map<std::string, metrics::RepoMetadata> metadata;
    std::vector<ObjectId> denylist;
    std::vector<std::vector<std::string>> expected_clusters;

    const ScriptRepo& repo(const std::string& id) const;
};

/// Throws Error(ScriptInvalid) with a line number.
CorpusScript parse_script(std::string_view text);
CorpusScript load_script(const fs::path& path);

ObjectId blob_id_of(const FileEntry& entry);

struct GenerateResult {
    std::size_t repos = 0;
    std::size_t objects_written = 0;
    std::map<std::string, ObjectId> commit_ids;  // label -> id
};

/// Writes one bare repository per script repo under out_dir (loose objects,
/// refs, HEAD), plus metadata.tsv and denylist.txt when the script has them.
/// Throws Error(DirNotEmpty) if out_dir has content.
GenerateResult generate(const CorpusScript& script, const fs::path& out_dir);

struct OracleOptions {
    std::int64_t floor = 631152000;  // 1990-01-01
    std::int64_t horizon = 0;
    std::optional<std::int64_t> window_seconds = 730 * 86400;
    std::size_t defork_threshold = 1;
    std::vector<ObjectId> extra_denylist;
};

struct OracleCommit {
    std::string repo;
    std::string label;
    ObjectId id;
    std::int64_t raw_time = 0;
    std::int64_t effective_time = 0;
    bool repaired = false;
};

struct OracleOutput {
    std::vector<OracleCommit> commits;
    std::vector<BlobEvent> events;    // raw creation rows, sorted
    std::vector<defork::ProjectCluster> clusters;
    std::vector<BlobEvent> timeline;  // first appearance per (blob, project), sorted
    std::vector<ReuseInstance> instances;  // sorted
    std::vector<metrics::OriginBlob> origins;  // by blob
    std::vector<metrics::WindowFlag> flags;
    std::vector<metrics::TrendPoint> trends;
    std::vector<metrics::BlobFeatureRow> blob_rows;
    std::vector<metrics::ProjectFeatureRow> project_rows;
    std::vector<metrics::PropensityRow> propensity_blob;
    std::vector<metrics::PropensityRow> propensity_project;
    std::vector<metrics::PropensityRow> propensity_project_share;
    metrics::ContingencyTable contingency{};
    std::map<std::string, metrics::NormalizedBinaryMetric> binary_metric;  // projects where defined
};

/// Brute-force recomputation of the pipeline from the script. Quadratic by design.
OracleOutput oracle(const CorpusScript& script, const OracleOptions& options);

/// Oracle flags for an arbitrary window (nullopt = unlimited).
std::vector<metrics::WindowFlag> oracle_flags(const OracleOutput& out, std::optional<std::int64_t> window_seconds,
                                              std::int64_t horizon);

struct RandomScriptParams {
    int repos = 8;
    int min_commits = 2;
    int max_commits = 7;
    int shared_pool = 6;
    double fork_probability = 0.25;
    double merge_probability = 0.2;
    double anomaly_probability = 0.08;
};

/// Seeded script exercising forks, merges, timestamp anomalies, binaries, symlinks,
/// gitlinks, denylisted content and cross-project copies.
std::string random_script(std::uint64_t seed, const RandomScriptParams& params = {});

}  // namespace copytrace::synth
