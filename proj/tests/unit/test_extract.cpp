#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "copytrace/error.hpp"
#include "copytrace/extract.hpp"
#include "copytrace/synth.hpp"
#include "copytrace/timeutil.hpp"
#include "test_util.hpp"

using namespace copytrace;
using extract::sanitize_timestamps;
using git::CommitRecord;

namespace {

constexpr std::int64_t kFloor = 631152000;
constexpr std::int64_t kHorizon = 1577836800;

ObjectId id_of(int n) {
    std::uint8_t raw[20] = {};
    raw[18] = static_cast<std::uint8_t>(n >> 8);
    raw[19] = static_cast<std::uint8_t>(n);
    return ObjectId::from_raw(raw);
}

CommitRecord commit(int n, std::int64_t t, std::vector<int> parents = {}) {
    CommitRecord c;
    c.id = id_of(n);
    for (int p : parents) c.parents.push_back(id_of(p));
    c.raw_time = c.effective_time = t;
    return c;
}

std::map<int, CommitRecord> by_number(const std::vector<CommitRecord>& v) {
    std::map<int, CommitRecord> m;
    for (const auto& c : v) m[c.id[19] | (c.id[18] << 8)] = c;
    return m;
}

}  // namespace

TEST_SUITE("extract") {

TEST_CASE("epoch commit and parent-postdates-child repair") {
    std::int64_t t1 = timeutil::parse_iso8601("2013-05-01");
    std::int64_t t3 = timeutil::parse_iso8601("2013-04-01");
    auto out = by_number(sanitize_timestamps({commit(1, t1), commit(2, 0, {1}), commit(3, t3, {2})}, kFloor, kHorizon));
    CHECK(out[1].effective_time == t1);
    CHECK_FALSE(out[1].repaired);
    CHECK(out[2].effective_time == t1);  // below the floor: inherits the parent
    CHECK(out[2].repaired);
    CHECK(out[3].effective_time == t1);  // older than its parent: clamped up
    CHECK(out[3].repaired);
}

TEST_CASE("roots outside the window take the floor; future commits inherit") {
    std::int64_t t = timeutil::parse_iso8601("2014-01-01");
    auto out = by_number(sanitize_timestamps(
        {commit(1, 0), commit(2, t, {1}), commit(3, 4102444800, {2}), commit(4, 4102444800)}, kFloor, kHorizon));
    CHECK(out[1].effective_time == kFloor);
    CHECK(out[2].effective_time == t);
    CHECK_FALSE(out[2].repaired);
    CHECK(out[3].effective_time == t);
    CHECK(out[4].effective_time == kFloor);
    CHECK(out[4].repaired);
}

TEST_CASE("merge takes the latest parent") {
    auto out = by_number(sanitize_timestamps({commit(1, 1e9), commit(2, 1.2e9), commit(3, 1.1e9, {1, 2})}, kFloor,
                                             kHorizon));
    CHECK(out[3].effective_time == 1200000000);
    CHECK(out[3].repaired);
}

TEST_CASE("output is topological with ties by id") {
    auto out = sanitize_timestamps({commit(5, 1e9, {3}), commit(4, 1e9), commit(3, 1e9), commit(2, 1e9, {4})},
                                   kFloor, kHorizon);
    std::vector<int> order;
    for (const auto& c : out) order.push_back(c.id[19]);
    CHECK(order == std::vector<int>{3, 4, 2, 5});
}

TEST_CASE("sanitized times are monotone along every edge (random DAGs)") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 1 + static_cast<int>(rng() % 40);
        std::vector<CommitRecord> in;
        for (int i = 0; i < n; ++i) {
            std::vector<int> parents;
            for (int k = 0; k < 2 && i > 0; ++k)
                if (rng() % 3) parents.push_back(static_cast<int>(rng() % i));
            std::sort(parents.begin(), parents.end());
            parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
            std::int64_t t;
            switch (rng() % 6) {
                case 0: t = 0; break;
                case 1: t = 4102444800; break;
                default: t = 1200000000 + static_cast<std::int64_t>(rng() % 200000000);
            }
            in.push_back(commit(i, t, parents));
        }
        std::shuffle(in.begin(), in.end(), rng);
        auto out = sanitize_timestamps(in, kFloor, kHorizon);
        REQUIRE(out.size() == in.size());
        std::map<ObjectId, std::size_t> pos;
        for (std::size_t i = 0; i < out.size(); ++i) pos[out[i].id] = i;
        for (const auto& c : out) {
            CHECK(c.effective_time >= kFloor);
            CHECK(c.effective_time <= kHorizon);
            CHECK(c.repaired == (c.effective_time != c.raw_time));
            for (const auto& p : c.parents) {
                CHECK(pos[p] < pos[c.id]);
                CHECK(out[pos[p]].effective_time <= c.effective_time);
            }
        }
        // idempotent once raw times are replaced by effective ones
        auto again = out;
        for (auto& c : again) c.raw_time = c.effective_time;
        auto twice = sanitize_timestamps(again, kFloor, kHorizon);
        for (std::size_t i = 0; i < twice.size(); ++i) CHECK_FALSE(twice[i].repaired);
    }
}

TEST_CASE("cycles and bad windows are rejected") {
    try {
        sanitize_timestamps({commit(1, 1e9, {2}), commit(2, 1e9, {1})}, kFloor, kHorizon);
        FAIL("expected CycleDetected");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CycleDetected);
    }
    try {
        sanitize_timestamps({commit(1, 1e9)}, kHorizon, kFloor);
        FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ConfigInvalid);
    }
}

TEST_CASE("creations relative to the union of parents") {
    auto script = synth::parse_script(R"(repo m
commit m1 time=2015-01-01T00:00:00Z
file app.py text=app_v1
file copy.py text=app_v1
commit m2 time=2015-01-10T00:00:00Z
file app.py text=app_v2
commit s1 time=2015-01-05T00:00:00Z parent=m1
file side.py text=side_v1
commit merge time=2015-02-01T00:00:00Z parent=m2 parent=s1
file side.py text=side_v1
commit fix time=2015-03-01T00:00:00Z
file side.py text=side_v2
file app.py text=app_v1
symlink ln app.py
gitlink sub 1234567890abcdef1234567890abcdef12345678
)");
    testutil::TempDir tmp;
    auto gen = synth::generate(script, tmp.path());
    auto store = git::ObjectStore::open(tmp / "m");
    auto hist = extract::extract_blob_creations(store, "m", kFloor, kHorizon);
    CHECK(hist.commits.size() == 5);
    std::map<std::string, std::vector<std::string>> by_commit;
    for (const auto& c : hist.creations) {
        for (const auto& [label, id] : gen.commit_ids)
            if (id == c.commit) by_commit[label].push_back(c.path);
        CHECK(c.repo == "m");
    }
    CHECK(by_commit["m1"] == std::vector<std::string>{"app.py"});  // smallest path for a repeated blob
    CHECK(by_commit["m2"] == std::vector<std::string>{"app.py"});
    CHECK(by_commit["s1"] == std::vector<std::string>{"side.py"});
    CHECK(by_commit.count("merge") == 0);  // nothing new relative to both parents
    std::sort(by_commit["fix"].begin(), by_commit["fix"].end());
    CHECK(by_commit["fix"] == std::vector<std::string>{"ln", "side.py"});  // app_v1 is old; gitlinks skipped
    for (const auto& b : hist.blobs) CHECK_FALSE(b.has_nul);
    CHECK(std::is_sorted(hist.blobs.begin(), hist.blobs.end(),
                         [](const auto& a, const auto& b) { return a.blob < b.blob; }));
}

TEST_CASE("events carry the project of the repository") {
    extract::BlobCreation c{id_of(1), id_of(2), "a.c", 5, "fork", 9};
    defork::ClusterMap map({{"base", {"base", "fork"}}});
    auto ev = extract::emit_events(std::span(&c, 1), map);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0] == BlobEvent{id_of(2), 5, "base", "fork", "a.c", 9});
    c.repo = "stranger";
    try {
        extract::emit_events(std::span(&c, 1), map);
        FAIL("expected UnmappedRepository");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnmappedRepository);
    }
}

}
