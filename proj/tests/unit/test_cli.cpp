#include <doctest.h>

#include <json.hpp>

#include "copytrace/tsv.hpp"
#include "test_util.hpp"

using namespace copytrace;
namespace fs = std::filesystem;
using testutil::TempDir;
using testutil::run;
using testutil::shell_quote;

namespace {

const std::string kCli = COPYTRACE_CLI;
const fs::path kCorpora = COPYTRACE_CORPORA_DIR;

testutil::CommandResult cli(const std::string& args) { return run(shell_quote(kCli) + " " + args); }

std::string q(const fs::path& p) { return shell_quote(p.string()); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    auto help = cli("--help");
    CHECK(help.status == 0);
    for (const char* word : {"scan", "reuse", "report", "run", "synth", "--window-days", "--shards"})
        CHECK(help.output.find(word) != std::string::npos);
    CHECK(cli("").status == 1);
    CHECK(cli("frobnicate").status == 1);
    CHECK(cli("run --shards nope --corpus x").status == 1);
    CHECK(cli("run").status == 1);
    CHECK(cli("scan --corpus x --shards 3 --horizon 2020-01-01").status == 1);
    CHECK(cli("synth --random").status == 1);
}

TEST_CASE("synth then run end to end") {
    TempDir tmp;
    auto s = cli("synth " + q(kCorpora / "binaries.txt") + " --out " + q(tmp / "c"));
    REQUIRE_MESSAGE(s.status == 0, s.output);
    auto r = cli("run -q --corpus " + q(tmp / "c") + " --out " + q(tmp / "out") +
                 " --horizon 2020-01-01 --shards 2 --metadata " + q(tmp / "c" / "metadata.tsv"));
    REQUIRE_MESSAGE(r.status == 0, r.output);
    for (const char* f : {"trends.csv", "propensity.csv", "contingency.csv", "project_features.csv", "blob_features.csv",
                          "binary_metric.csv", "size_ttest.csv", "stats.json", "summary.json",
                          "trend.svg"})
        CHECK_MESSAGE(fs::exists(tmp / "out" / "report" / f), std::string(f));
    auto summary = nlohmann::json::parse(tsv::read_file(tmp / "out" / "report" / "summary.json"));
    CHECK(summary.contains("config_hash"));
    auto stats = nlohmann::json::parse(tsv::read_file(tmp / "out" / "report" / "stats.json"));
    CHECK(stats["spearman"].contains("error"));
    CHECK_FALSE(fs::exists(tmp / "out" / "report" / "spearman.csv"));
    CHECK(fs::exists(tmp / "out" / "scan" / "events.1.tsv"));
    CHECK_FALSE(fs::exists(tmp / "out" / "scan" / "events.2.tsv"));
}

TEST_CASE("random synth records its script") {
    TempDir tmp;
    auto s = cli("synth --random --seed 5 --out " + q(tmp / "c") + " --write-script " + q(tmp / "s.txt"));
    REQUIRE_MESSAGE(s.status == 0, s.output);
    CHECK(tsv::read_file(tmp / "s.txt").find("repo ") != std::string::npos);
    CHECK(cli("synth --random --seed 5 --out " + q(tmp / "c")).status == 2);  // DirNotEmpty
}

TEST_CASE("a bad repository fails the scan and is named") {
    TempDir tmp;
    fs::create_directories(tmp / "c" / "notgit");
    auto r = cli("scan -q --corpus " + q(tmp / "c") + " --out " + q(tmp / "out") + " --horizon 2020-01-01");
    CHECK(r.status == 2);
    CHECK(r.output.find("notgit") != std::string::npos);
    auto missing = cli("reuse -q --out " + q(tmp / "nowhere"));
    CHECK(missing.status == 2);
    CHECK(missing.output.find("MissingStageOutput") != std::string::npos);
}

TEST_CASE("flags override the config file") {
    TempDir tmp;
    REQUIRE(cli("synth " + q(kCorpora / "basic_copy.txt") + " --out " + q(tmp / "c")).status == 0);
    tsv::write_file(tmp / "run.conf", "corpus=" + (tmp / "c").string() + "\nshards=2\nhorizon=2020-01-01\nout=" +
                                          (tmp / "from_conf").string() + "\n");
    auto r = cli("scan -q --config " + q(tmp / "run.conf") + " --shards 8");
    REQUIRE_MESSAGE(r.status == 0, r.output);
    auto m = nlohmann::json::parse(tsv::read_file(tmp / "from_conf" / "scan" / "manifest.json"));
    CHECK(m["shards"] == 8);
    CHECK(m["horizon"] == 1577836800);
    tsv::write_file(tmp / "bad.conf", "bogus=1\n");
    CHECK(cli("scan --config " + q(tmp / "bad.conf")).status == 1);
}

}
