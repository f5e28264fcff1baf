#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "copytrace/defork.hpp"
#include "copytrace/events.hpp"

namespace copytrace::metrics {

enum class Language : std::uint8_t {
    C,
    CSharp,
    Go,
    JavaScript,
    Kotlin,
    ObjectiveC,
    Python,
    R,
    Rust,
    Scala,
    TypeScript,
    Java,
    PHP,
    Perl,
    Ruby,
    Other,
};

inline constexpr std::size_t kLanguageCount = 16;

std::string_view language_name(Language lang) noexcept;
std::optional<Language> language_from_name(std::string_view name) noexcept;
/// Every tag, ordered by name (the tie-break order for dominant language).
const std::array<Language, kLanguageCount>& languages_by_name() noexcept;

/// Extension map: .c/.h C, .cs CSharp, .go Go, .js/.mjs JavaScript, .kt Kotlin,
/// .m/.mm ObjectiveC, .py Python, .r/.R R, .rs Rust, .scala Scala, .ts/.tsx
/// TypeScript, .java Java, .php PHP, .pl/.pm Perl, .rb Ruby; anything else Other.
Language classify_language(std::string_view path) noexcept;

bool has_binary_extension(std::string_view path) noexcept;
/// NUL within the first 8000 bytes (git's heuristic).
bool has_nul_prefix(std::span<const std::uint8_t> prefix) noexcept;
bool classify_binary(std::span<const std::uint8_t> prefix, std::string_view path) noexcept;

enum class SizeClass : std::uint8_t { Small = 0, Medium = 1, Big = 2 };

std::string_view size_class_name(SizeClass c) noexcept;
/// Big: commits > 100 and stars > 10. Small: stars == 0 and commits < 10. Otherwise Medium.
SizeClass size_class(std::uint64_t commits, std::uint64_t stars) noexcept;

/// The originating row of one blob: its first appearance across all projects.
struct OriginBlob {
    ObjectId blob;
    std::string project;
    std::int64_t time = 0;
    std::string path;
    std::uint64_t size = 0;
    bool binary = false;

    bool operator==(const OriginBlob&) const = default;
};

/// First row of every blob in a sorted, deduplicated timeline. Blobs for which
/// `skip` returns true (denylisted) are dropped. `binary` combines the NUL probe
/// result from `has_nul` with the origin path's extension.
std::vector<OriginBlob> origin_blobs(std::span<const BlobEvent> timeline,
                                     const std::function<bool(const ObjectId&)>& has_nul,
                                     const std::function<bool(const ObjectId&)>& skip);

struct TrendPoint {
    std::string quarter;
    std::uint64_t created = 0;
    std::uint64_t reused = 0;
    double ratio = 0;

    bool operator==(const TrendPoint&) const = default;
};

/// Per creation quarter: blobs created, how many were later committed by another
/// project, and their ratio. Quarters without creations are omitted.
std::vector<TrendPoint> reuse_ratio_series(std::span<const OriginBlob> origins,
                                           std::span<const ReuseInstance> instances);

/// Blobs with at least one instance whose dest_time - origin_time <= window
/// (any instance when window is nullopt).
std::unordered_set<ObjectId> reused_within(std::span<const ReuseInstance> instances,
                                           std::optional<std::int64_t> window_seconds);

struct WindowFlag {
    ObjectId blob;
    bool reused = false;

    bool operator==(const WindowFlag&) const = default;
};

/// Time-limited reuse flags for the model sample: blobs created no later than
/// horizon - window. Output sorted by blob. Throws Error(WindowExceedsCorpusSpan)
/// when horizon - window precedes the earliest creation.
std::vector<WindowFlag> time_limited_flags(std::span<const OriginBlob> origins,
                                           std::span<const ReuseInstance> instances,
                                           std::optional<std::int64_t> window_seconds, std::int64_t horizon);

struct BlobFeatureRow {
    ObjectId blob;
    std::string origin_project;
    Language language = Language::Other;  // binary blobs are bucketed as Other
    std::int64_t creation_time = 0;
    bool is_binary = false;
    std::uint64_t size = 0;
    bool reused_within_window = false;

    bool operator==(const BlobFeatureRow&) const = default;
};

std::vector<BlobFeatureRow> blob_features(std::span<const OriginBlob> origins, std::span<const WindowFlag> flags);

struct PropensityRow {
    Language language = Language::Other;
    std::uint64_t total = 0;
    std::uint64_t reused = 0;
    double ratio = 0;

    bool operator==(const PropensityRow&) const = default;
};

struct LabeledOutcome {
    Language language;
    bool reused;
};

/// reused / total per language in enum order; languages with no items omitted.
std::vector<PropensityRow> propensity_by_language(std::span<const LabeledOutcome> items);

/// Per-project activity gathered from commit history and the metadata sidecar.
struct ProjectActivity {
    std::string project;
    std::uint64_t commits = 0;
    std::uint64_t authors = 0;
    std::int64_t first_commit = 0;
    std::int64_t last_commit = 0;
    std::uint64_t stars = 0;
    std::uint64_t forks = 0;

    bool operator==(const ProjectActivity&) const = default;
};

struct CommitRow {
    std::string repo;
    ObjectId commit;
    std::int64_t raw_time = 0;
    std::int64_t effective_time = 0;
    bool repaired = false;
    std::string author;
};

struct RepoMetadata {
    std::uint64_t stars = 0;
    std::uint64_t forks = 0;
};

/// repo_id \t stars \t forks; '#' lines ignored.
std::map<std::string, RepoMetadata> load_metadata(const std::filesystem::path& path);

/// One row per cluster. Commits and authors are distinct across member repos;
/// stars and forks are the maximum over members (0 when absent).
std::vector<ProjectActivity> project_activity(std::span<const CommitRow> commits, const defork::ClusterMap& clusters,
                                              const std::map<std::string, RepoMetadata>& metadata);

struct ProjectFeatureRow {
    std::string project;
    std::uint64_t n_blobs = 0;          // originating blobs (c)
    std::uint64_t n_binary = 0;         // bc
    std::uint64_t n_reused = 0;         // cc: originated blobs reused within the window
    std::uint64_t n_binary_reused = 0;  // cbc
    double binary_ratio = 0;            // bc / c, 0 when c == 0
    std::uint64_t n_commits = 0;
    std::uint64_t n_authors = 0;
    std::uint64_t n_forks = 0;
    std::uint64_t n_stars = 0;
    std::int64_t earliest_commit_time = 0;
    std::uint64_t activity_months = 0;
    Language dominant_language = Language::Other;
    bool has_reused_origin = false;

    bool operator==(const ProjectFeatureRow&) const = default;
};

/// `reused` holds the blobs counted as reused (typically reused_within(window)).
std::vector<ProjectFeatureRow> project_features(std::span<const OriginBlob> origins,
                                                const std::unordered_set<ObjectId>& reused,
                                                std::span<const ProjectActivity> activity);

/// ceil((last - first) / 30 days), at least 1.
std::uint64_t activity_months(std::int64_t first, std::int64_t last) noexcept;

/// Table-12 style: each blob labelled with its origin project's dominant language.
std::vector<PropensityRow> propensity_project_mode(std::span<const BlobFeatureRow> rows,
                                                   std::span<const ProjectFeatureRow> projects);
/// Table-5 style: each blob labelled with its own language.
std::vector<PropensityRow> propensity_blob_mode(std::span<const BlobFeatureRow> rows);
/// Share of projects (by dominant language) originating at least one reused blob.
std::vector<PropensityRow> propensity_project_share(std::span<const ProjectFeatureRow> projects);

/// [origin class][biggest downstream class], indexed by SizeClass.
using ContingencyTable = std::array<std::array<std::uint64_t, 3>, 3>;

/// Each blob with instances is counted once, in the cell of its origin's class and
/// the largest class among its destinations.
ContingencyTable contingency_table(std::span<const ReuseInstance> instances,
                                   const std::function<SizeClass(const std::string&)>& class_of);

struct NormalizedBinaryMetric {
    std::uint64_t cbc = 0;
    std::uint64_t cc = 0;
    std::uint64_t bc = 0;
    std::uint64_t c = 0;
    double cbr = 0;
    double br = 0;
    double m = 0;

    bool operator==(const NormalizedBinaryMetric&) const = default;
};

/// m = (cbc/cc) / (bc/c). Throws Error(Undefined) when cc == 0 or bc == 0.
NormalizedBinaryMetric normalized_binary_metric(std::uint64_t cbc, std::uint64_t cc, std::uint64_t bc,
                                                std::uint64_t c);
NormalizedBinaryMetric normalized_binary_metric(const ProjectFeatureRow& row);

}  // namespace copytrace::metrics
