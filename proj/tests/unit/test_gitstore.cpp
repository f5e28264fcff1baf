#include <doctest.h>

#include <map>

#include "copytrace/error.hpp"
#include "copytrace/gitstore.hpp"
#include "copytrace/tsv.hpp"
#include "test_util.hpp"

using namespace copytrace;
using namespace copytrace::git;
using testutil::PackEntry;
using testutil::TempDir;
using testutil::run;
using testutil::shell_quote;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return Errc::IoError;
}

std::string run_git(const fs::path& dir, const std::string& args) {
    auto r = run("cd " + shell_quote(dir.string()) +
                 " && GIT_AUTHOR_DATE='2015-01-01T00:00:00Z' GIT_COMMITTER_DATE='2015-01-01T00:00:00Z'"
                 " git -c user.name=t -c user.email=t@example.com -c init.defaultBranch=main"
                 " -c core.autocrlf=false -c gc.auto=0 " + args);
    REQUIRE_MESSAGE(r.status == 0, args << ": " << r.output);
    return r.output;
}

// A work tree with history rich enough to produce deltas when packed.
fs::path make_work_repo(const fs::path& dir) {
    fs::create_directories(dir);
    run_git(dir, "init -q .");
    std::string big;
    for (int i = 0; i < 400; ++i) big += "line " + std::to_string(i) + " of a long evolving file\n";
    for (int rev = 0; rev < 12; ++rev) {
        big.insert(big.size() / 2, "revision " + std::to_string(rev) + "\n");
        tsv::write_file(dir / "big.txt", big);
        tsv::write_file(dir / ("f" + std::to_string(rev % 4) + ".c"), "int v = " + std::to_string(rev) + ";\n");
        fs::create_directories(dir / "sub" / "deep");
        tsv::write_file(dir / "sub" / "deep" / "x.py", "print(" + std::to_string(rev / 3) + ")\n");
        if (rev == 2) tsv::write_file(dir / "bin.dat", std::string("\0\1\2\3binary", 10));
        if (rev == 3) fs::create_symlink("big.txt", dir / "link");
        run_git(dir, "add -A");
        run_git(dir, "commit -q -m r" + std::to_string(rev));
        if (rev == 5) run_git(dir, "tag -a v1 -m release");
        if (rev == 7) run_git(dir, "tag light");
    }
    return dir;
}

std::map<ObjectId, std::pair<ObjectKind, Bytes>> dump(const ObjectStore& s) {
    std::map<ObjectId, std::pair<ObjectKind, Bytes>> out;
    for (const auto& id : s.object_ids()) {
        auto o = s.read(id);
        out[id] = {o.kind, o.payload};
    }
    return out;
}

}  // namespace

TEST_SUITE("gitstore") {

TEST_CASE("loose and packed copies expose identical objects") {
    if (!testutil::have_git()) return;
    TempDir tmp;
    fs::path work = make_work_repo(tmp / "work");
    // commits in a work tree with gc.auto=0 leave every object loose
    fs::copy(work / ".git", tmp / "loose.git", fs::copy_options::recursive);
    run_git(tmp.path(), "clone -q --bare work ofs.git");
    run_git(tmp.path(), "clone -q --bare work ref.git");
    run_git(tmp / "ofs.git", "repack -q -a -d -f --depth=50 --window=50");
    run_git(tmp / "ref.git", "-c repack.useDeltaBaseOffset=false repack -q -a -d -f --depth=50 --window=50");

    auto loose = ObjectStore::open(tmp / "loose.git");
    auto ofs = ObjectStore::open(tmp / "ofs.git");
    auto ref = ObjectStore::open(tmp / "ref.git");
    CHECK(loose.pack_count() == 0);
    CHECK(ofs.pack_count() == 1);
    CHECK(ref.pack_count() == 1);
    auto a = dump(loose);
    CHECK(a.size() == loose.object_count());
    CHECK(dump(ofs) == a);
    CHECK(dump(ref) == a);

    // the packs really contain deltas of both flavours
    auto verify = run_git(tmp / "ofs.git", "verify-pack -v objects/pack/*.idx");
    CHECK(verify.find("chain length = ") != std::string::npos);

    // contents agree with git itself
    auto head = ObjectId::from_hex(run_git(work, "rev-parse HEAD:big.txt").substr(0, 40));
    CHECK(as_chars(ofs.read(head).payload) == tsv::read_file(work / "big.txt"));
}

TEST_CASE("refs from loose files, packed-refs and HEAD") {
    if (!testutil::have_git()) return;
    TempDir tmp;
    fs::path work = make_work_repo(tmp / "work");
    run_git(tmp.path(), "clone -q --bare work b.git");
    run_git(tmp / "b.git", "pack-refs --all");
    auto store = ObjectStore::open(tmp / "b.git");
    std::map<std::string, ObjectId> refs;
    for (const auto& r : store.refs()) refs[r.name] = r.target;
    auto head = ObjectId::from_hex(run_git(work, "rev-parse HEAD").substr(0, 40));
    CHECK(refs.at("HEAD") == head);
    CHECK(refs.at("refs/heads/main") == head);
    CHECK(refs.count("refs/tags/v1") == 1);
    CHECK(store.read(refs.at("refs/tags/v1")).kind == ObjectKind::Tag);
    CHECK(store.read(parse_tag_target(store.read(refs.at("refs/tags/v1")))).kind == ObjectKind::Commit);
    CHECK(store.read(refs.at("refs/tags/light")).kind == ObjectKind::Commit);
}

TEST_CASE("work tree discovery and tree walking") {
    if (!testutil::have_git()) return;
    TempDir tmp;
    fs::path work = make_work_repo(tmp / "work");
    CHECK(find_git_dir(work) == work / ".git");
    auto store = ObjectStore::open(work);
    auto head = ObjectId::from_hex(run_git(work, "rev-parse HEAD").substr(0, 40));
    auto commit = parse_commit(store.read(head), head);
    CHECK(commit.raw_time == 1420070400);
    CHECK(commit.author == "t <t@example.com>");
    CHECK(commit.parents.size() == 1);
    auto files = walk_tree(store, commit.tree);
    std::vector<std::string> paths;
    for (const auto& f : files) paths.push_back(f.path);
    CHECK(paths == std::vector<std::string>{"big.txt", "bin.dat", "f0.c", "f1.c", "f2.c", "f3.c", "link",
                                            "sub/deep/x.py"});
    for (const auto& f : files)
        if (f.path == "link") CHECK(f.mode == kModeSymlink);
    auto listed = run_git(work, "ls-tree -r HEAD");
    for (const auto& f : files) CHECK(listed.find(f.blob.hex() + "\t" + f.path) != std::string::npos);
}

TEST_CASE("delta application") {
    std::string base = "hello world, hello delta";
    std::string want = "world, hello! hello world";
    auto d = testutil::DeltaBuilder(base.size(), want.size()).copy(6, 12).insert("! ").copy(0, 11).bytes();
    CHECK(as_chars(apply_delta(as_bytes(base), d)) == want);
    auto bad_size = testutil::DeltaBuilder(base.size() + 1, 3).copy(0, 3).bytes();
    CHECK(code_of([&] { apply_delta(as_bytes(base), bad_size); }) == Errc::CorruptObject);
    auto out_of_range = testutil::DeltaBuilder(base.size(), 4).copy(base.size() - 2, 4).bytes();
    CHECK(code_of([&] { apply_delta(as_bytes(base), out_of_range); }) == Errc::CorruptObject);
}

TEST_CASE("hand-built pack with ofs and ref deltas") {
    TempDir tmp;
    fs::path g = tmp / "r.git";
    testutil::init_bare(g);
    std::string b0 = "base content for the first blob\n";
    std::string b1 = b0 + "appended\n";
    std::string b2 = "prefix " + b1;
    ObjectId i0 = git_object_id("blob", as_bytes(b0));
    ObjectId i1 = git_object_id("blob", as_bytes(b1));
    ObjectId i2 = git_object_id("blob", as_bytes(b2));
    std::vector<PackEntry> e(3);
    e[0] = {3, Bytes(b0.begin(), b0.end()), 0, {}, i0};
    e[1] = {6, testutil::DeltaBuilder(b0.size(), b1.size()).copy(0, b0.size()).insert("appended\n").bytes(), 0, {}, i1};
    e[2] = {7, testutil::DeltaBuilder(b1.size(), b2.size()).insert("prefix ").copy(0, b1.size()).bytes(), 0, i1, i2};
    testutil::write_pack(g, e);
    auto s = ObjectStore::open(g);
    CHECK(s.object_count() == 3);
    CHECK(as_chars(s.read(i2).payload) == b2);
    CHECK(as_chars(s.read(i1).payload) == b1);
    CHECK(s.read(i0).kind == ObjectKind::Blob);
}

TEST_CASE("missing ref-delta base") {
    TempDir tmp;
    fs::path g = tmp / "r.git";
    testutil::init_bare(g);
    std::string b = "payload\n";
    ObjectId absent = git_object_id("blob", as_bytes("not stored\n"));
    ObjectId id = git_object_id("blob", as_bytes(b));
    std::vector<PackEntry> e{{7, testutil::DeltaBuilder(11, b.size()).insert(b).bytes(), 0, absent, id}};
    testutil::write_pack(g, e);
    auto s = ObjectStore::open(g);
    CHECK(code_of([&] { s.read(id); }) == Errc::DeltaBaseMissing);
}

TEST_CASE("delta chains up to the depth limit resolve, deeper ones fail") {
    TempDir tmp;
    for (std::size_t depth : {std::size_t(4096), std::size_t(4097)}) {
        fs::path g = tmp / ("d" + std::to_string(depth) + ".git");
        testutil::init_bare(g);
        std::vector<PackEntry> e;
        std::string cur = "x";
        e.push_back({3, Bytes(cur.begin(), cur.end()), 0, {}, git_object_id("blob", as_bytes(cur))});
        for (std::size_t i = 1; i <= depth; ++i) {
            std::string next = cur + static_cast<char>('a' + i % 26);
            e.push_back({6, testutil::DeltaBuilder(cur.size(), next.size()).copy(0, cur.size())
                                .insert(next.substr(cur.size())).bytes(),
                         i - 1, {}, git_object_id("blob", as_bytes(next))});
            cur = next;
        }
        testutil::write_pack(g, e);
        auto s = ObjectStore::open(g, {true, 0});
        if (depth == 4096)
            CHECK(as_chars(s.read(e.back().id).payload) == cur);
        else
            CHECK(code_of([&] { s.read(e.back().id); }) == Errc::DeltaDepthExceeded);
    }
}

TEST_CASE("unsupported pack version") {
    TempDir tmp;
    fs::path g = tmp / "r.git";
    testutil::init_bare(g);
    std::string b = "v3\n";
    testutil::write_pack(g, {{3, Bytes(b.begin(), b.end()), 0, {}, git_object_id("blob", as_bytes(b))}}, 3);
    CHECK(code_of([&] { ObjectStore::open(g); }) == Errc::UnsupportedPackVersion);
}

TEST_CASE("corrupt pack index") {
    TempDir tmp;
    fs::path g = tmp / "r.git";
    testutil::init_bare(g);
    std::string b = "idx\n";
    testutil::write_pack(g, {{3, Bytes(b.begin(), b.end()), 0, {}, git_object_id("blob", as_bytes(b))}});
    for (const auto& f : fs::directory_iterator(g / "objects" / "pack"))
        if (f.path().extension() == ".idx") {
            std::string idx = tsv::read_file(f.path());
            idx[8 + 4 * 200] ^= 0x01;  // fanout entry
            tsv::write_file(f.path(), idx);
        }
    CHECK(code_of([&] { ObjectStore::open(g); }) == Errc::CorruptIndex);
}

TEST_CASE("multi-pack-index is refused") {
    TempDir tmp;
    fs::path g = tmp / "r.git";
    testutil::init_bare(g);
    tsv::write_file(g / "objects" / "pack" / "multi-pack-index", "MIDX");
    CHECK(code_of([&] { ObjectStore::open(g); }) == Errc::UnsupportedFormat);
}

TEST_CASE("not a repository") {
    TempDir tmp;
    fs::create_directories(tmp / "plain");
    CHECK(code_of([&] { ObjectStore::open(tmp / "plain"); }) == Errc::NotAGitRepository);
    CHECK(code_of([&] { ObjectStore::open(tmp / "absent"); }) == Errc::NotAGitRepository);
}

TEST_CASE("corrupt and missing loose objects") {
    TempDir tmp;
    fs::path g = tmp / "r.git";
    testutil::init_bare(g);
    ObjectId id = testutil::write_loose(g, "blob", "good\n");
    auto s = ObjectStore::open(g);
    CHECK(as_chars(s.read(id).payload) == "good\n");
    CHECK(code_of([&] { s.read(git_object_id("blob", as_bytes("other\n"))); }) == Errc::ObjectNotFound);

    std::string hex = id.hex();
    fs::path file = g / "objects" / hex.substr(0, 2) / hex.substr(2);
    std::string z = tsv::read_file(file);
    fs::permissions(file, fs::perms::owner_all);
    tsv::write_file(file, z.substr(0, z.size() - 3));
    CHECK(code_of([&] { ObjectStore::open(g).read(id); }) == Errc::CorruptObject);

    // valid zlib, wrong content for the name
    Bytes other = zlib_deflate(as_bytes(std::string("blob 5") + '\0' + "evil\n"));
    tsv::write_file(file, as_chars(other));
    CHECK(code_of([&] { ObjectStore::open(g).read(id); }) == Errc::CorruptObject);
}

TEST_CASE("malformed commit header") {
    GitObject o{ObjectKind::Commit, {}};
    std::string text = "tree 4b825dc642cb6eb9a060e54bf8d69288fbee4904\nauthor a <a> notanumber +0000\n"
                       "committer a <a> 1 +0000\n\nmsg\n";
    o.payload.assign(text.begin(), text.end());
    CHECK(code_of([&] { parse_commit(o, ObjectId()); }) == Errc::MalformedCommitHeader);
    std::string no_tree = "author a <a> 1 +0000\ncommitter a <a> 1 +0000\n\n";
    o.payload.assign(no_tree.begin(), no_tree.end());
    CHECK(code_of([&] { parse_commit(o, ObjectId()); }) == Errc::MalformedCommitHeader);
    std::string ok = "tree 4b825dc642cb6eb9a060e54bf8d69288fbee4904\nauthor a <a> 100 +0130\n"
                     "committer b <b> 200 -0200\n\nmsg\n";
    o.payload.assign(ok.begin(), ok.end());
    auto c = parse_commit(o, ObjectId());
    CHECK(c.author_time == 100);
    CHECK(c.author_tz_minutes == 90);
    CHECK(c.raw_time == 200);
    CHECK(c.committer_tz_minutes == -120);
    CHECK(c.effective_time == 200);
}

}
