#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "copytrace/pipeline.hpp"
#include "copytrace/synth.hpp"

namespace testutil {

struct RunOptions {
    unsigned shards = 4;
    std::size_t sort_run_rows = 1'000'000;
    std::int64_t window_days = 730;
    std::int64_t horizon = 1577836800;  // 2020-01-01
    std::size_t defork_threshold = 1;
};

/// Runs scan, reuse and report on an existing corpus directory.
copytrace::pipeline::RunConfig run_pipeline(const std::filesystem::path& corpus, const std::filesystem::path& out,
                                            const RunOptions& options);

/// Every scan/reuse TSV under out, shards concatenated then sorted line-wise.
struct StageText {
    std::string events, p2p, commits, blobs, b2tp, reuse;
    bool operator==(const StageText&) const = default;
};
StageText stage_text(const std::filesystem::path& out, unsigned shards);

/// Every report file as name -> bytes.
std::vector<std::pair<std::string, std::string>> report_files(const std::filesystem::path& out);

/// Generates the script under work/, runs the pipeline and compares every output
/// with the brute-force oracle. Returns human-readable mismatches (empty = equal).
struct OracleComparison {
    copytrace::synth::OracleOutput oracle;
    copytrace::pipeline::ReportTables report;
};

std::vector<std::string> compare_with_oracle(const copytrace::synth::CorpusScript& script,
                                             const std::filesystem::path& work, const RunOptions& options,
                                             OracleComparison* keep = nullptr);

}  // namespace testutil
