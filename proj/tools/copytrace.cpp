// copytrace: whole-file reuse across git repositories.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "copytrace/error.hpp"
#include "copytrace/pipeline.hpp"
#include "copytrace/synth.hpp"
#include "copytrace/tsv.hpp"

namespace {

using namespace copytrace;

struct Flags {
    std::string config;
    std::vector<std::string> corpora;
    std::optional<std::string> out, floor, horizon, denylist, metadata, spill_dir;
    std::optional<unsigned> shards, jobs;
    std::optional<std::int64_t> window_days;
    std::optional<std::uint64_t> seed, defork_threshold, sort_run_rows;
    bool quiet = false;
};

pipeline::RunConfig resolve(const Flags& f) {
    pipeline::RunConfig cfg;
    if (!f.config.empty()) cfg.load(f.config);
    if (!f.corpora.empty()) {
        cfg.corpora.clear();
        for (const auto& c : f.corpora) cfg.set("corpus", c);
    }
    auto put = [&](const char* key, const auto& v) {
        if (v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>)
                cfg.set(key, *v);
            else
                cfg.set(key, std::to_string(*v));
        }
    };
    put("out", f.out);
    put("floor", f.floor);
    put("horizon", f.horizon);
    put("denylist", f.denylist);
    put("metadata", f.metadata);
    put("spill_dir", f.spill_dir);
    put("shards", f.shards);
    put("jobs", f.jobs);
    put("window_days", f.window_days);
    put("seed", f.seed);
    put("defork_threshold", f.defork_threshold);
    put("sort_run_rows", f.sort_run_rows);
    return cfg;
}

int exit_code(Errc code) {
    switch (code) {
        case Errc::ConfigInvalid:
            return 1;
        default:
            return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"copytrace: trace copy-based reuse of file blobs across git repositories"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "key=value config file; flags override it");
    app.add_option("--corpus", f.corpora, "corpus root (one repository per subdirectory); repeatable");
    app.add_option("--out", f.out, "output directory (default: out)");
    app.add_option("--shards", f.shards, "hash shards, power of two in 1..256 (default 16)");
    app.add_option("--window-days", f.window_days, "reuse window in days, 0 = unlimited (default 730)");
    app.add_option("--floor", f.floor, "earliest plausible commit time, ISO-8601 (default 1990-01-01)");
    app.add_option("--horizon", f.horizon, "latest plausible commit time, ISO-8601 (default now + 24h)");
    app.add_option("--denylist", f.denylist, "file of blob ids excluded from reuse");
    app.add_option("--metadata", f.metadata, "repo_id<TAB>stars<TAB>forks sidecar");
    app.add_option("--jobs", f.jobs, "worker threads (default: logical CPUs)");
    app.add_option("--seed", f.seed, "seed recorded in the config and used by synth --random");
    app.add_option("--defork-threshold", f.defork_threshold, "shared commits needed to merge repositories (default 1)");
    app.add_option("--sort-run-rows", f.sort_run_rows, "rows per external-sort run, 0 = in memory (default 1000000)");
    app.add_option("--spill-dir", f.spill_dir, "directory for sort runs (default $COPYTRACE_TMP, then OUT/tmp)");
    app.add_flag("-q,--quiet", f.quiet, "suppress progress messages");

    auto* scan = app.add_subcommand("scan", "extract blob creations and defork repositories");
    auto* reuse = app.add_subcommand("reuse", "sort, deduplicate and derive reuse instances");
    auto* report = app.add_subcommand("report", "emit metric tables, models and the trend chart");
    auto* run = app.add_subcommand("run", "scan, reuse and report in sequence");
    auto* synth = app.add_subcommand("synth", "generate a git corpus from a script");
    std::string script_path, script_out;
    bool random = false;
    synth->add_option("script", script_path, "corpus script");
    synth->add_flag("--random", random, "generate a random script from --seed instead");
    synth->add_option("--write-script", script_out, "save the script used (with --random)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    pipeline::Logger log;
    if (!f.quiet) log = [](std::string_view msg) { std::cerr << msg << "\n"; };

    try {
        if (synth->parsed()) {
            if (random == !script_path.empty()) {
                std::cerr << "synth: give either a script or --random\n";
                return 1;
            }
            if (!f.out) {
                std::cerr << "synth: --out is required\n";
                return 1;
            }
            std::string text = random ? synth::random_script(f.seed.value_or(0)) : tsv::read_file(script_path);
            if (!script_out.empty()) tsv::write_file(script_out, text);
            auto result = synth::generate(synth::parse_script(text), *f.out);
            if (log)
                log("synth: " + std::to_string(result.repos) + " repositories, " +
                    std::to_string(result.objects_written) + " objects");
            return 0;
        }

        pipeline::RunConfig cfg = resolve(f);
        if ((scan->parsed() || run->parsed()) && cfg.corpora.empty()) {
            std::cerr << "error: at least one --corpus is required\n";
            return 1;
        }
        if (scan->parsed() || run->parsed()) pipeline::cmd_scan(cfg, log);
        if (reuse->parsed() || run->parsed()) pipeline::cmd_reuse(cfg, log);
        if (report->parsed() || run->parsed()) pipeline::cmd_report(cfg, log);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
