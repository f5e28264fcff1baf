#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "copytrace/defork.hpp"
#include "copytrace/events.hpp"
#include "copytrace/metrics.hpp"
#include "copytrace/stats.hpp"

/// Stage orchestration: scan (gitstore, extract, defork), reuse (sort, dedupe,
/// derive) and report (metrics, models). Every stage reads and writes flat files
/// under RunConfig::out:
///
///     scan/   events.<k>.tsv p2P.tsv commits.tsv blobs.tsv config.txt manifest.json
///     reuse/  b2tP.<k>.tsv reuse.<k>.tsv manifest.json
///     report/ *.csv stats.json summary.json trend.svg
namespace copytrace::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
    std::vector<fs::path> corpora;
    fs::path out = "out";
    unsigned shards = 16;
    std::int64_t window_days = 730;  // 0 means unlimited
    std::int64_t floor = 631152000;
    std::optional<std::int64_t> horizon;  // scan time + 24h when unset
    std::optional<fs::path> denylist;
    std::optional<fs::path> metadata;
    unsigned jobs = 0;  // 0 = logical CPUs
    std::uint64_t seed = 0;
    std::size_t defork_threshold = 1;
    std::size_t sort_run_rows = 1'000'000;  // 0 = in-memory sort
    std::optional<fs::path> spill_dir;      // defaults to $COPYTRACE_TMP, then out/tmp

    /// Applies one key=value setting. Throws Error(ConfigInvalid).
    void set(std::string_view key, std::string_view value);
    /// '#' comments and blank lines ignored; `corpus` may repeat.
    void load(const fs::path& path);
    /// Throws Error(ConfigInvalid).
    void validate() const;
    /// Canonical key=value text of every output-affecting setting.
    std::string canonical() const;
    std::string hash() const;

    std::optional<std::int64_t> window_seconds() const;
    unsigned effective_jobs() const;
    fs::path effective_spill_dir() const;
};

using Logger = std::function<void(std::string_view)>;

struct StageResult {
    std::vector<std::string> warnings;
};

/// Errors from a repository are rethrown with the repo id prefixed.
StageResult cmd_scan(RunConfig config, const Logger& log = {});
/// Throws Error(MissingStageOutput) without a completed scan.
StageResult cmd_reuse(const RunConfig& config, const Logger& log = {});
/// Throws Error(MissingStageOutput) without a completed reuse stage. Tables that
/// cannot be computed are reported as warnings; the rest are still written.
StageResult cmd_report(const RunConfig& config, const Logger& log = {});

/// Table outcome: either a value or the error that prevented it.
template <class T>
struct Table {
    std::optional<T> value;
    std::string error;
};

struct ModelReport {
    stats::RegressionResult fit;
    std::vector<stats::AnovaRow> anova;
    std::vector<std::string> dropped;  // constant columns removed before fitting
};

struct SizeTest {
    std::string group;  // "All" or a language name
    stats::WelchResult result;
};

struct SpearmanMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rho;  // NaN where undefined
};

/// Everything cmd_report emits, computed from the scan and reuse outputs on disk.
struct ReportTables {
    std::int64_t horizon = 0;
    std::optional<std::int64_t> window_seconds;
    defork::ClusterMap clusters;
    std::vector<ReuseInstance> instances;
    std::vector<metrics::OriginBlob> origins;
    std::vector<metrics::TrendPoint> trends;
    Table<std::vector<metrics::WindowFlag>> flags;
    std::vector<metrics::BlobFeatureRow> blob_rows;
    std::vector<metrics::ProjectFeatureRow> project_rows;
    std::vector<metrics::PropensityRow> propensity_blob;
    std::vector<metrics::PropensityRow> propensity_project;
    std::vector<metrics::PropensityRow> propensity_project_share;
    metrics::ContingencyTable contingency{};
    std::map<std::string, metrics::NormalizedBinaryMetric> binary_metric;
    Table<ModelReport> blob_model;
    Table<ModelReport> project_model;
    Table<SpearmanMatrix> spearman;
    std::vector<SizeTest> size_tests;
    std::vector<std::string> warnings;
};

ReportTables compute_report(const RunConfig& config);

/// Rendering helpers (exposed for tests).
std::string contingency_csv(const metrics::ContingencyTable& table);
std::string trend_svg(const std::vector<metrics::TrendPoint>& trends);
std::string csv_field(std::string_view field);

/// Names of the scan and reuse output files for shard k.
fs::path scan_dir(const RunConfig& config);
fs::path reuse_dir(const RunConfig& config);
fs::path report_dir(const RunConfig& config);

}  // namespace copytrace::pipeline
