#include "corpus_check.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "copytrace/error.hpp"
#include "copytrace/timeline.hpp"
#include "copytrace/tsv.hpp"
#include "test_util.hpp"

namespace testutil {

namespace pl = copytrace::pipeline;
namespace synth = copytrace::synth;
using copytrace::BlobEvent;

pl::RunConfig run_pipeline(const fs::path& corpus, const fs::path& out, const RunOptions& options) {
    pl::RunConfig cfg;
    cfg.corpora = {corpus};
    cfg.out = out;
    cfg.shards = options.shards;
    cfg.sort_run_rows = options.sort_run_rows;
    cfg.window_days = options.window_days;
    cfg.horizon = options.horizon;
    cfg.defork_threshold = options.defork_threshold;
    cfg.jobs = 1;
    cfg.spill_dir = out / "spill";
    if (fs::exists(corpus / "metadata.tsv")) cfg.metadata = corpus / "metadata.tsv";
    if (fs::exists(corpus / "denylist.txt")) cfg.denylist = corpus / "denylist.txt";
    pl::cmd_scan(cfg);
    pl::cmd_reuse(cfg);
    pl::cmd_report(cfg);
    return cfg;
}

namespace {

std::string sorted_concat(const fs::path& dir, const std::string& prefix, unsigned shards) {
    std::vector<std::string> all;
    for (unsigned k = 0; k < shards; ++k) {
        auto ls = lines(copytrace::tsv::read_file(copytrace::timeline::shard_path(dir, prefix, k)));
        all.insert(all.end(), ls.begin(), ls.end());
    }
    std::sort(all.begin(), all.end());
    std::string out;
    for (const auto& l : all) out += l + "\n";
    return out;
}

template <class T>
void expect_equal(std::vector<std::string>& out, const std::string& what, const T& got, const T& want) {
    if (!(got == want)) out.push_back(what + " differs from the oracle");
}

std::string describe(const BlobEvent& e) { return copytrace::event_tsv(e); }

}  // namespace

StageText stage_text(const fs::path& out, unsigned shards) {
    using copytrace::tsv::read_file;
    StageText t;
    t.events = sorted_concat(out / "scan", "events", shards);
    t.p2p = read_file(out / "scan" / "p2P.tsv");
    t.commits = read_file(out / "scan" / "commits.tsv");
    t.blobs = read_file(out / "scan" / "blobs.tsv");
    t.b2tp = sorted_concat(out / "reuse", "b2tP", shards);
    t.reuse = sorted_concat(out / "reuse", "reuse", shards);
    return t;
}

std::vector<std::pair<std::string, std::string>> report_files(const fs::path& out) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::directory_iterator(out / "report"))
        if (e.path().filename() != "summary.json")  // carries the config hash
            files.emplace_back(e.path().filename().string(), copytrace::tsv::read_file(e.path()));
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<std::string> compare_with_oracle(const synth::CorpusScript& script, const fs::path& work,
                                             const RunOptions& options, OracleComparison* keep) {
    std::vector<std::string> bad;
    fs::path corpus = work / "corpus", out = work / "out";
    synth::generate(script, corpus);
    pl::RunConfig cfg = run_pipeline(corpus, out, options);
    pl::ReportTables report = pl::compute_report(cfg);

    synth::OracleOptions oo;
    oo.horizon = options.horizon;
    oo.window_seconds = cfg.window_seconds();
    oo.defork_threshold = options.defork_threshold;
    synth::OracleOutput want = synth::oracle(script, oo);

    std::vector<BlobEvent> events;
    for (unsigned k = 0; k < options.shards; ++k) {
        auto part = copytrace::timeline::read_events(copytrace::timeline::shard_path(out / "scan", "events", k));
        events.insert(events.end(), part.begin(), part.end());
    }
    std::sort(events.begin(), events.end(), copytrace::EventLess{});
    if (events != want.events) {
        std::ostringstream s;
        s << "events differ: pipeline " << events.size() << " rows, oracle " << want.events.size();
        for (std::size_t i = 0; i < std::min(events.size(), want.events.size()); ++i)
            if (!(events[i] == want.events[i])) {
                s << "; first difference: " << describe(events[i]) << " vs " << describe(want.events[i]);
                break;
            }
        bad.push_back(s.str());
    }

    std::map<std::pair<std::string, std::string>, std::pair<std::int64_t, bool>> commits;
    for (const auto& line : lines(copytrace::tsv::read_file(out / "scan" / "commits.tsv"))) {
        auto f = copytrace::tsv::split(line);
        commits[{std::string(f[0]), std::string(f[1])}] = {copytrace::tsv::parse_i64(f[3]), f[4] == "1"};
    }
    std::map<std::pair<std::string, std::string>, std::pair<std::int64_t, bool>> want_commits;
    for (const auto& c : want.commits) want_commits[{c.repo, c.id.hex()}] = {c.effective_time, c.repaired};
    expect_equal(bad, "sanitized commits", commits, want_commits);

    expect_equal(bad, "clusters", report.clusters.clusters(), want.clusters);

    std::vector<BlobEvent> timeline;
    for (unsigned k = 0; k < options.shards; ++k) {
        auto part = copytrace::timeline::read_events(copytrace::timeline::shard_path(out / "reuse", "b2tP", k));
        timeline.insert(timeline.end(), part.begin(), part.end());
    }
    std::sort(timeline.begin(), timeline.end(), copytrace::EventLess{});
    expect_equal(bad, "b2tP timeline", timeline, want.timeline);

    auto instances = report.instances;
    std::sort(instances.begin(), instances.end());
    expect_equal(bad, "reuse instances", instances, want.instances);
    expect_equal(bad, "origins", report.origins, want.origins);
    if (!report.flags.value)
        bad.push_back("window flags missing: " + report.flags.error);
    else
        expect_equal(bad, "window flags", *report.flags.value, want.flags);
    expect_equal(bad, "trends", report.trends, want.trends);
    expect_equal(bad, "blob features", report.blob_rows, want.blob_rows);
    expect_equal(bad, "project features", report.project_rows, want.project_rows);
    expect_equal(bad, "propensity (blob mode)", report.propensity_blob, want.propensity_blob);
    expect_equal(bad, "propensity (project mode)", report.propensity_project, want.propensity_project);
    expect_equal(bad, "propensity (project share)", report.propensity_project_share, want.propensity_project_share);
    expect_equal(bad, "contingency table", report.contingency, want.contingency);
    expect_equal(bad, "contingency.csv", copytrace::tsv::read_file(out / "report" / "contingency.csv"),
                 pl::contingency_csv(want.contingency));
    expect_equal(bad, "binary metric", report.binary_metric, want.binary_metric);

    for (const auto& expected : script.expected_clusters) {
        bool found = false;
        for (const auto& c : report.clusters.clusters()) found = found || c.members == expected;
        if (!found) bad.push_back("expected cluster not produced");
    }
    if (keep) *keep = {std::move(want), std::move(report)};
    return bad;
}

}  // namespace testutil
