#include "copytrace/synth.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "copytrace/error.hpp"
#include "copytrace/timeutil.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace::synth {

namespace {

const std::string kEmptyBlob = "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391";

[[noreturn]] void invalid(std::size_t lineno, const std::string& msg) {
    throw Error(Errc::ScriptInvalid, "line " + std::to_string(lineno) + ": " + msg);
}

bool valid_id(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '_' ||
               c == '-';
    });
}

bool valid_path(std::string_view p) {
    if (p.empty() || p.front() == '/' || p.back() == '/') return false;
    std::size_t start = 0;
    while (start <= p.size()) {
        std::size_t end = p.find('/', start);
        if (end == std::string_view::npos) end = p.size();
        auto part = p.substr(start, end - start);
        if (part.empty() || part == "." || part == ".." || part == ".git") return false;
        start = end + 1;
    }
    return p.find('\0') == std::string_view::npos;
}

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::optional<std::string_view> option(std::string_view token, std::string_view key) {
    if (token.size() > key.size() && token.substr(0, key.size()) == key && token[key.size()] == '=')
        return token.substr(key.size() + 1);
    return std::nullopt;
}

std::uint64_t parse_count(std::size_t lineno, std::string_view s) {
    try {
        return tsv::parse_u64(s);
    } catch (const Error&) {
        invalid(lineno, "expected a non-negative integer, got '" + std::string(s) + "'");
    }
}

std::int64_t parse_time(std::size_t lineno, std::string_view s) {
    try {
        return timeutil::parse_iso8601(s);
    } catch (const Error& e) {
        invalid(lineno, e.what());
    }
}

std::string decode_hex(std::size_t lineno, std::string_view hex) {
    if (hex.size() % 2 != 0) invalid(lineno, "odd-length hex content");
    auto nibble = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        invalid(lineno, "bad hex digit");
    };
    std::string out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2)
        out.push_back(static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1])));
    return out;
}

std::string seeded_content(std::uint64_t seed, std::uint64_t size) {
    std::mt19937_64 rng(seed);
    std::string out;
    out.reserve(size);
    for (std::uint64_t i = 0; i < size; ++i) {
        std::uint64_t v = rng() % 27;
        out.push_back(v == 26 ? '\n' : static_cast<char>('a' + v));
    }
    return out;
}

ObjectId parse_oid(std::size_t lineno, std::string_view hex) {
    auto id = ObjectId::try_from_hex(hex);
    if (!id) invalid(lineno, "expected a 40-digit object id, got '" + std::string(hex) + "'");
    return *id;
}

struct ParseState {
    CorpusScript script;
    std::map<std::string, std::size_t> repo_index;
    std::map<std::string, std::size_t> commit_order;
    std::vector<std::set<std::string>> repo_sets;
    std::vector<std::optional<std::string>> repo_head;
    std::vector<std::size_t> churn_counter;
    std::optional<std::size_t> current_repo;
    std::optional<std::string> current_commit;

    void add_closure(std::size_t repo, const std::string& label) {
        std::vector<std::string> stack{label};
        while (!stack.empty()) {
            std::string l = std::move(stack.back());
            stack.pop_back();
            if (!repo_sets[repo].insert(l).second) continue;
            for (const auto& p : script.commits.at(l).parents) stack.push_back(p);
        }
    }

    std::size_t new_repo(std::size_t lineno, const std::string& id) {
        if (!valid_id(id)) invalid(lineno, "bad repository id '" + id + "'");
        if (repo_index.count(id)) invalid(lineno, "repository '" + id + "' declared twice");
        std::size_t idx = script.repos.size();
        repo_index[id] = idx;
        script.repos.push_back({id, {}, {}, std::nullopt});
        repo_sets.emplace_back();
        repo_head.emplace_back();
        churn_counter.push_back(0);
        current_repo = idx;
        current_commit.reset();
        return idx;
    }

    std::size_t need_repo(std::size_t lineno) const {
        if (!current_repo) invalid(lineno, "no current repository");
        return *current_repo;
    }

    ScriptCommit& need_commit(std::size_t lineno) {
        if (!current_commit) invalid(lineno, "file directive outside a commit");
        return script.commits.at(*current_commit);
    }

    void add_commit(std::size_t lineno, ScriptCommit commit, bool explicit_parents) {
        std::size_t repo = need_repo(lineno);
        if (!valid_id(commit.label)) invalid(lineno, "bad commit label '" + commit.label + "'");
        if (script.commits.count(commit.label)) invalid(lineno, "commit '" + commit.label + "' declared twice");
        if (!explicit_parents && repo_head[repo]) commit.parents.push_back(*repo_head[repo]);
        std::set<std::string> seen;
        for (const auto& p : commit.parents) {
            if (!script.commits.count(p)) invalid(lineno, "unknown parent '" + p + "'");
            if (!seen.insert(p).second) invalid(lineno, "parent '" + p + "' listed twice");
        }
        if (!commit.parents.empty()) commit.files = script.commits.at(commit.parents.front()).files;
        if (commit.author.empty()) commit.author = script.repos[repo].id;
        commit.author = commit.author + " <" + commit.author + "@example.com>";
        std::string label = commit.label;
        commit_order[label] = commit_order.size();
        script.commits.emplace(label, std::move(commit));
        add_closure(repo, label);
        repo_head[repo] = label;
        current_commit = label;
    }
};

void check_tree_shape(std::size_t lineno, const FileMap& files, const std::string& path) {
    // a path may not be both a file and a directory
    std::string prefix = path + "/";
    auto it = files.lower_bound(prefix);
    if (it != files.end() && it->first.compare(0, prefix.size(), prefix) == 0)
        invalid(lineno, "'" + path + "' is already a directory");
    for (std::size_t pos = path.find('/'); pos != std::string::npos; pos = path.find('/', pos + 1))
        if (files.count(path.substr(0, pos))) invalid(lineno, "'" + path.substr(0, pos) + "' is already a file");
}

}  // namespace

const ScriptRepo& CorpusScript::repo(const std::string& id) const {
    for (const auto& r : repos)
        if (r.id == id) return r;
    throw Error(Errc::UnknownRepository, id);
}

CorpusScript parse_script(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start <= text.size();) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        std::string_view l = text.substr(start, end - start);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        lines.push_back(l);
        start = end + 1;
    }

    ParseState st;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::size_t lineno = i + 1;
        auto tok = tokenize(lines[i]);
        if (tok.empty() || tok[0][0] == '#') continue;
        const std::string& cmd = tok[0];

        if (cmd == "repo") {
            if (tok.size() != 2) invalid(lineno, "usage: repo <id>");
            st.new_repo(lineno, tok[1]);
        } else if (cmd == "fork") {
            if (tok.size() != 4 || tok[2] != "from") invalid(lineno, "usage: fork <new> from <repo>@<commit>");
            auto at = tok[3].find('@');
            if (at == std::string::npos) invalid(lineno, "usage: fork <new> from <repo>@<commit>");
            std::string src = tok[3].substr(0, at), label = tok[3].substr(at + 1);
            auto sit = st.repo_index.find(src);
            if (sit == st.repo_index.end()) invalid(lineno, "unknown repository '" + src + "'");
            if (!st.repo_sets[sit->second].count(label))
                invalid(lineno, "commit '" + label + "' is not in '" + src + "'");
            std::size_t idx = st.new_repo(lineno, tok[1]);
            st.script.repos[idx].fork_of = src;
            st.add_closure(idx, label);
            st.repo_head[idx] = label;
        } else if (cmd == "commit") {
            if (tok.size() < 3) invalid(lineno, "usage: commit <id> time=<t> [parent=<id>]... [author=<name>]");
            ScriptCommit c;
            c.label = tok[1];
            bool has_time = false, explicit_parents = false;
            for (std::size_t k = 2; k < tok.size(); ++k) {
                if (auto v = option(tok[k], "time")) {
                    c.time = parse_time(lineno, *v);
                    has_time = true;
                } else if (auto v = option(tok[k], "parent")) {
                    explicit_parents = true;
                    if (*v != "none") c.parents.emplace_back(*v);
                } else if (auto v = option(tok[k], "author")) {
                    if (!valid_id(*v)) invalid(lineno, "bad author name");
                    c.author = std::string(*v);
                } else {
                    invalid(lineno, "unknown commit option '" + tok[k] + "'");
                }
            }
            if (!has_time) invalid(lineno, "commit needs time=");
            st.add_commit(lineno, std::move(c), explicit_parents);
        } else if (cmd == "file") {
            if (tok.size() < 3) invalid(lineno, "usage: file <path> <<TAG | text= | hex= | seed= size=");
            ScriptCommit& c = st.need_commit(lineno);
            const std::string& path = tok[1];
            if (!valid_path(path)) invalid(lineno, "bad path '" + path + "'");
            FileEntry entry;
            if (tok[2].rfind("<<", 0) == 0) {
                if (tok.size() != 3 || tok[2].size() == 2) invalid(lineno, "usage: file <path> <<TAG");
                std::string tag = tok[2].substr(2);
                std::size_t k = i + 1;
                while (k < lines.size() && lines[k] != tag) {
                    entry.content.append(lines[k]);
                    entry.content.push_back('\n');
                    ++k;
                }
                if (k == lines.size()) invalid(lineno, "unterminated heredoc '" + tag + "'");
                i = k;
            } else if (auto v = option(tok[2], "text")) {
                if (tok.size() != 3) invalid(lineno, "usage: file <path> text=<word>");
                entry.content = std::string(*v) + "\n";
            } else if (auto v = option(tok[2], "hex")) {
                if (tok.size() != 3) invalid(lineno, "usage: file <path> hex=<bytes>");
                entry.content = decode_hex(lineno, *v);
            } else if (auto v = option(tok[2], "seed")) {
                if (tok.size() != 4) invalid(lineno, "usage: file <path> seed=<n> size=<k>");
                auto sz = option(tok[3], "size");
                if (!sz) invalid(lineno, "usage: file <path> seed=<n> size=<k>");
                entry.content = seeded_content(parse_count(lineno, *v), parse_count(lineno, *sz));
            } else {
                invalid(lineno, "unknown file source '" + tok[2] + "'");
            }
            c.files.erase(path);
            check_tree_shape(lineno, c.files, path);
            c.files[path] = std::move(entry);
        } else if (cmd == "delete") {
            if (tok.size() != 2) invalid(lineno, "usage: delete <path>");
            ScriptCommit& c = st.need_commit(lineno);
            if (!c.files.erase(tok[1])) invalid(lineno, "no file '" + tok[1] + "' to delete");
        } else if (cmd == "symlink" || cmd == "gitlink") {
            if (tok.size() != 3) invalid(lineno, "usage: " + cmd + " <path> <target>");
            ScriptCommit& c = st.need_commit(lineno);
            if (!valid_path(tok[1])) invalid(lineno, "bad path '" + tok[1] + "'");
            FileEntry entry;
            if (cmd == "symlink") {
                entry.kind = EntryKind::Symlink;
                entry.content = tok[2];
            } else {
                entry.kind = EntryKind::Gitlink;
                entry.gitlink = parse_oid(lineno, tok[2]);
            }
            c.files.erase(tok[1]);
            check_tree_shape(lineno, c.files, tok[1]);
            c.files[tok[1]] = std::move(entry);
        } else if (cmd == "churn") {
            if (tok.size() != 4) invalid(lineno, "usage: churn <n> start=<t> step=<seconds>");
            std::size_t repo = st.need_repo(lineno);
            std::uint64_t n = parse_count(lineno, tok[1]);
            auto start = option(tok[2], "start");
            auto step = option(tok[3], "step");
            if (!start || !step) invalid(lineno, "usage: churn <n> start=<t> step=<seconds>");
            std::int64_t t0 = parse_time(lineno, *start);
            std::int64_t dt = static_cast<std::int64_t>(parse_count(lineno, *step));
            for (std::uint64_t k = 0; k < n; ++k) {
                ScriptCommit c;
                c.label = st.script.repos[repo].id + ".churn" + std::to_string(st.churn_counter[repo]++);
                c.time = t0 + static_cast<std::int64_t>(k) * dt;
                st.add_commit(lineno, std::move(c), false);
            }
        } else if (cmd == "tag") {
            if (tok.size() != 3) invalid(lineno, "usage: tag <name> <commit>");
            std::size_t repo = st.need_repo(lineno);
            if (!valid_id(tok[1])) invalid(lineno, "bad tag name");
            if (!st.repo_sets[repo].count(tok[2])) invalid(lineno, "commit '" + tok[2] + "' is not in this repository");
            for (const auto& t : st.script.repos[repo].tags)
                if (t.name == tok[1]) invalid(lineno, "tag '" + tok[1] + "' declared twice");
            st.script.repos[repo].tags.push_back({tok[1], tok[2]});
        } else if (cmd == "meta") {
            if (tok.size() < 3) invalid(lineno, "usage: meta <repo> stars=<n> forks=<n>");
            if (!valid_id(tok[1])) invalid(lineno, "bad repository id");
            metrics::RepoMetadata m;
            for (std::size_t k = 2; k < tok.size(); ++k) {
                if (auto v = option(tok[k], "stars"))
                    m.stars = parse_count(lineno, *v);
                else if (auto v = option(tok[k], "forks"))
                    m.forks = parse_count(lineno, *v);
                else
                    invalid(lineno, "unknown meta option '" + tok[k] + "'");
            }
            st.script.metadata[tok[1]] = m;
        } else if (cmd == "deny") {
            if (tok.size() != 2) invalid(lineno, "usage: deny <40-hex> | deny text=<word>");
            if (auto v = option(tok[1], "text"))
                st.script.denylist.push_back(blob_id_of({EntryKind::File, std::string(*v) + "\n", {}}));
            else
                st.script.denylist.push_back(parse_oid(lineno, tok[1]));
        } else if (cmd == "expect-cluster") {
            if (tok.size() < 2) invalid(lineno, "usage: expect-cluster <repo>...");
            std::vector<std::string> members(tok.begin() + 1, tok.end());
            std::sort(members.begin(), members.end());
            st.script.expected_clusters.push_back(std::move(members));
        } else {
            invalid(lineno, "unknown directive '" + cmd + "'");
        }
    }

    for (const auto& cl : st.script.expected_clusters)
        for (const auto& r : cl)
            if (!st.repo_index.count(r)) throw Error(Errc::ScriptInvalid, "expect-cluster names unknown repository '" + r + "'");
    for (std::size_t r = 0; r < st.script.repos.size(); ++r) {
        auto& labels = st.script.repos[r].commits;
        labels.assign(st.repo_sets[r].begin(), st.repo_sets[r].end());
        std::sort(labels.begin(), labels.end(),
                  [&](const auto& a, const auto& b) { return st.commit_order.at(a) < st.commit_order.at(b); });
    }
    return std::move(st.script);
}

CorpusScript load_script(const fs::path& path) { return parse_script(tsv::read_file(path)); }

ObjectId blob_id_of(const FileEntry& entry) { return git_object_id("blob", as_bytes(entry.content)); }

namespace {

struct RawObject {
    std::string kind;
    std::string payload;
};

/// Serializes commits, trees, blobs and tags; objects are memoized by id.
class ObjectBuilder {
public:
    explicit ObjectBuilder(const CorpusScript& script) : script_(script) {}

    const ObjectId& commit_id(const std::string& label) {
        if (auto it = commit_ids_.find(label); it != commit_ids_.end()) return it->second;
        const ScriptCommit& c = script_.commits.at(label);
        std::string payload = "tree " + tree_of(c.files).hex() + "\n";
        for (const auto& p : c.parents) payload += "parent " + commit_id(p).hex() + "\n";
        std::string stamp = " " + std::to_string(c.time) + " +0000\n";
        payload += "author " + c.author + stamp;
        payload += "committer " + c.author + stamp;
        payload += "\n" + label + "\n";
        ObjectId id = put("commit", std::move(payload));
        return commit_ids_.emplace(label, id).first->second;
    }

    ObjectId tag_id(const ScriptTag& tag) {
        const ScriptCommit& c = script_.commits.at(tag.commit);
        std::string payload = "object " + commit_id(tag.commit).hex() + "\ntype commit\ntag " + tag.name +
                              "\ntagger " + c.author + " " + std::to_string(c.time) + " +0000\n\n" + tag.name + "\n";
        return put("tag", std::move(payload));
    }

    /// Every object reachable from one commit (ids only; payloads stay in the memo).
    void collect(const std::string& label, std::set<ObjectId>& out) {
        out.insert(commit_id(label));
        collect_tree(tree_of(script_.commits.at(label).files), out);
    }

    const RawObject& object(const ObjectId& id) const { return objects_.at(id); }

private:
    struct Dir {
        std::map<std::string, Dir> dirs;
        std::map<std::string, const FileEntry*> files;
    };

    ObjectId put(std::string kind, std::string payload) {
        ObjectId id = git_object_id(kind, as_bytes(payload));
        objects_.try_emplace(id, RawObject{std::move(kind), std::move(payload)});
        return id;
    }

    ObjectId write_dir(const Dir& dir) {
        struct Entry {
            std::string sort_key;
            std::string mode;
            std::string name;
            ObjectId id;
        };
        std::vector<Entry> entries;
        for (const auto& [name, sub] : dir.dirs) entries.push_back({name + "/", "40000", name, write_dir(sub)});
        for (const auto& [name, f] : dir.files) {
            switch (f->kind) {
                case EntryKind::File:
                    entries.push_back({name, "100644", name, put("blob", f->content)});
                    break;
                case EntryKind::Symlink:
                    entries.push_back({name, "120000", name, put("blob", f->content)});
                    break;
                case EntryKind::Gitlink:
                    entries.push_back({name, "160000", name, f->gitlink});
                    break;
            }
        }
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.sort_key < b.sort_key; });
        std::string payload;
        for (const auto& e : entries) {
            payload += e.mode + " " + e.name;
            payload.push_back('\0');
            payload.append(reinterpret_cast<const char*>(e.id.raw().data()), e.id.raw().size());
        }
        return put("tree", std::move(payload));
    }

    ObjectId tree_of(const FileMap& files) {
        Dir root;
        for (const auto& [path, entry] : files) {
            Dir* d = &root;
            std::size_t start = 0;
            for (std::size_t pos = path.find('/'); pos != std::string::npos; pos = path.find('/', start)) {
                d = &d->dirs[path.substr(start, pos - start)];
                start = pos + 1;
            }
            d->files[path.substr(start)] = &entry;
        }
        return write_dir(root);
    }

    void collect_tree(const ObjectId& tree, std::set<ObjectId>& out) {
        if (!out.insert(tree).second) return;
        const std::string& p = objects_.at(tree).payload;
        std::size_t i = 0;
        while (i < p.size()) {
            std::size_t sp = p.find(' ', i);
            std::size_t nul = p.find('\0', sp);
            std::string_view mode(p.data() + i, sp - i);
            ObjectId id = ObjectId::from_raw(p.data() + nul + 1);
            if (mode == "40000")
                collect_tree(id, out);
            else if (mode != "160000")
                out.insert(id);
            i = nul + 21;
        }
    }

    const CorpusScript& script_;
    std::unordered_map<ObjectId, RawObject> objects_;
    std::map<std::string, ObjectId> commit_ids_;
};

void write_loose(const fs::path& git_dir, const ObjectId& id, const RawObject& obj) {
    std::string hex = id.hex();
    fs::path dir = git_dir / "objects" / hex.substr(0, 2);
    fs::create_directories(dir);
    std::string raw = obj.kind + " " + std::to_string(obj.payload.size());
    raw.push_back('\0');
    raw += obj.payload;
    Bytes z = zlib_deflate(as_bytes(raw));
    tsv::write_file(dir / hex.substr(2), as_chars(z));
}

}  // namespace

GenerateResult generate(const CorpusScript& script, const fs::path& out_dir) {
    std::error_code ec;
    if (fs::exists(out_dir, ec)) {
        if (!fs::is_directory(out_dir)) throw Error(Errc::DirNotEmpty, out_dir.string() + " exists and is not a directory");
        if (!fs::is_empty(out_dir)) throw Error(Errc::DirNotEmpty, out_dir.string());
    }
    fs::create_directories(out_dir);

    ObjectBuilder builder(script);
    GenerateResult result;
    for (const auto& repo : script.repos) {
        fs::path git_dir = out_dir / repo.id;
        fs::create_directories(git_dir / "objects" / "info");
        fs::create_directories(git_dir / "objects" / "pack");
        fs::create_directories(git_dir / "refs" / "heads");
        fs::create_directories(git_dir / "refs" / "tags");
        tsv::write_file(git_dir / "HEAD", "ref: refs/heads/main\n");
        tsv::write_file(git_dir / "config",
                        "[core]\n\trepositoryformatversion = 0\n\tfilemode = true\n\tbare = true\n");

        std::set<ObjectId> ids;
        for (const auto& label : repo.commits) {
            builder.collect(label, ids);
            result.commit_ids[label] = builder.commit_id(label);
        }
        std::map<std::string, ObjectId> refs;
        if (!repo.commits.empty()) {
            // main follows the last declared commit; other unreachable tips get their own branch
            const std::string& main = repo.commits.back();
            std::set<std::string> covered;
            std::vector<std::string> stack{main};
            while (!stack.empty()) {
                std::string l = std::move(stack.back());
                stack.pop_back();
                if (!covered.insert(l).second) continue;
                for (const auto& p : script.commits.at(l).parents) stack.push_back(p);
            }
            std::set<std::string> has_child;
            for (const auto& l : repo.commits)
                for (const auto& p : script.commits.at(l).parents) has_child.insert(p);
            refs["refs/heads/main"] = builder.commit_id(main);
            for (const auto& l : repo.commits)
                if (!covered.count(l) && !has_child.count(l)) refs["refs/heads/tip-" + l] = builder.commit_id(l);
        }
        for (const auto& tag : repo.tags) {
            ObjectId id = builder.tag_id(tag);
            ids.insert(id);
            refs["refs/tags/" + tag.name] = id;
        }
        for (const auto& id : ids) write_loose(git_dir, id, builder.object(id));
        for (const auto& [name, id] : refs) tsv::write_file(git_dir / name, id.hex() + "\n");
        result.objects_written += ids.size();
        ++result.repos;
    }

    if (!script.metadata.empty()) {
        std::string out;
        for (const auto& [repo, m] : script.metadata)
            out += tsv::escape(repo) + "\t" + std::to_string(m.stars) + "\t" + std::to_string(m.forks) + "\n";
        tsv::write_file(out_dir / "metadata.tsv", out);
    }
    if (!script.denylist.empty()) {
        std::string out;
        for (const auto& id : script.denylist) out += id.hex() + "\n";
        tsv::write_file(out_dir / "denylist.txt", out);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

struct BlobRef {
    std::string path;
    std::uint64_t size = 0;
};

std::map<ObjectId, BlobRef> blob_map(const FileMap& files) {
    std::map<ObjectId, BlobRef> out;
    for (const auto& [path, entry] : files) {
        if (entry.kind == EntryKind::Gitlink) continue;
        ObjectId id = blob_id_of(entry);
        auto it = out.find(id);
        if (it == out.end())
            out.emplace(id, BlobRef{path, entry.content.size()});
        else if (path < it->second.path)
            it->second.path = path;
    }
    return out;
}

bool tuple_less(const BlobEvent& a, const BlobEvent& b) {
    return std::tie(a.blob, a.time, a.project, a.repo, a.path, a.size) <
           std::tie(b.blob, b.time, b.project, b.repo, b.path, b.size);
}

std::vector<metrics::PropensityRow> tabulate(const std::vector<std::pair<metrics::Language, bool>>& items) {
    std::map<int, std::pair<std::uint64_t, std::uint64_t>> counts;
    for (const auto& [lang, reused] : items) {
        auto& c = counts[static_cast<int>(lang)];
        ++c.first;
        c.second += reused ? 1 : 0;
    }
    std::vector<metrics::PropensityRow> out;
    for (const auto& [lang, c] : counts)
        out.push_back({static_cast<metrics::Language>(lang), c.first, c.second,
                       static_cast<double>(c.second) / static_cast<double>(c.first)});
    return out;
}

}  // namespace

std::vector<metrics::WindowFlag> oracle_flags(const OracleOutput& out, std::optional<std::int64_t> window_seconds,
                                              std::int64_t horizon) {
    std::vector<metrics::WindowFlag> flags;
    if (window_seconds && !out.origins.empty()) {
        std::int64_t earliest = out.origins.front().time;
        for (const auto& o : out.origins) earliest = std::min(earliest, o.time);
        if (horizon - *window_seconds < earliest)
            throw Error(Errc::WindowExceedsCorpusSpan, "window reaches before the first creation");
    }
    for (const auto& o : out.origins) {
        if (window_seconds && o.time > horizon - *window_seconds) continue;
        bool reused = false;
        for (const auto& r : out.instances)
            if (r.blob == o.blob && (!window_seconds || r.dest_time - r.origin_time <= *window_seconds)) reused = true;
        flags.push_back({o.blob, reused});
    }
    return flags;
}

OracleOutput oracle(const CorpusScript& script, const OracleOptions& options) {
    OracleOutput out;
    ObjectBuilder builder(script);

    // Effective times by repeated relaxation until nothing changes.
    std::map<std::string, std::int64_t> eff;
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& [label, c] : script.commits) {
            bool ready = true, has_parent = false;
            std::int64_t parent_max = 0;
            for (const auto& p : c.parents) {
                auto it = eff.find(p);
                if (it == eff.end()) {
                    ready = false;
                    break;
                }
                parent_max = has_parent ? std::max(parent_max, it->second) : it->second;
                has_parent = true;
            }
            if (!ready) continue;
            bool in_range = c.time >= options.floor && c.time <= options.horizon;
            std::int64_t base = in_range ? c.time : (has_parent ? parent_max : options.floor);
            std::int64_t value = has_parent ? std::max(base, parent_max) : base;
            auto [it, fresh] = eff.try_emplace(label, value);
            if (fresh || it->second != value) {
                it->second = value;
                changed = true;
            }
        }
    }

    std::map<std::string, std::map<ObjectId, BlobRef>> blobs_of;
    std::map<ObjectId, const FileEntry*> content_of;
    for (const auto& [label, c] : script.commits) {
        blobs_of[label] = blob_map(c.files);
        for (const auto& [path, entry] : c.files)
            if (entry.kind != EntryKind::Gitlink) content_of.emplace(blob_id_of(entry), &entry);
    }

    for (const auto& repo : script.repos)
        for (const auto& label : repo.commits) {
            const ScriptCommit& c = script.commits.at(label);
            out.commits.push_back({repo.id, label, builder.commit_id(label), c.time, eff.at(label), eff.at(label) != c.time});
        }

    // Clusters: repos linked when they share at least `threshold` commits; components by BFS.
    std::size_t n = script.repos.size();
    std::vector<std::set<std::string>> sets(n);
    for (std::size_t i = 0; i < n; ++i) sets[i].insert(script.repos[i].commits.begin(), script.repos[i].commits.end());
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t shared = 0;
            for (const auto& l : sets[i]) shared += sets[j].count(l);
            if (shared >= options.defork_threshold && shared > 0) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    std::vector<int> comp(n, -1);
    std::map<std::string, std::string> project_of;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::string> members;
        std::queue<std::size_t> q;
        q.push(s);
        comp[s] = static_cast<int>(s);
        while (!q.empty()) {
            std::size_t v = q.front();
            q.pop();
            members.push_back(script.repos[v].id);
            for (std::size_t w : adj[v])
                if (comp[w] < 0) {
                    comp[w] = static_cast<int>(s);
                    q.push(w);
                }
        }
        std::sort(members.begin(), members.end());
        for (const auto& m : members) project_of[m] = members.front();
        out.clusters.push_back({members.front(), members});
    }
    std::sort(out.clusters.begin(), out.clusters.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    // Creations: a commit's blobs minus everything its parents already had.
    for (const auto& repo : script.repos)
        for (const auto& label : repo.commits) {
            const ScriptCommit& c = script.commits.at(label);
            for (const auto& [blob, ref] : blobs_of.at(label)) {
                bool inherited = false;
                for (const auto& p : c.parents) inherited = inherited || blobs_of.at(p).count(blob);
                if (inherited) continue;
                out.events.push_back({blob, eff.at(label), project_of.at(repo.id), repo.id, ref.path, ref.size});
            }
        }
    std::sort(out.events.begin(), out.events.end(), tuple_less);

    // First appearance per (blob, project).
    std::map<std::pair<ObjectId, std::string>, BlobEvent> first;
    for (const auto& e : out.events) {
        auto key = std::make_pair(e.blob, e.project);
        auto it = first.find(key);
        if (it == first.end() ||
            std::tie(e.time, e.repo, e.path, e.size) < std::tie(it->second.time, it->second.repo, it->second.path, it->second.size))
            first[key] = e;
    }
    for (const auto& [key, e] : first) out.timeline.push_back(e);
    std::sort(out.timeline.begin(), out.timeline.end(), tuple_less);

    std::set<ObjectId> denied(script.denylist.begin(), script.denylist.end());
    denied.insert(options.extra_denylist.begin(), options.extra_denylist.end());
    denied.insert(ObjectId::from_hex(kEmptyBlob));

    std::map<ObjectId, std::vector<BlobEvent>> rows_of;
    for (const auto& e : out.timeline) rows_of[e.blob].push_back(e);
    for (const auto& [blob, rows] : rows_of) {
        if (denied.count(blob)) continue;
        const BlobEvent* origin = &rows.front();
        for (const auto& r : rows)
            if (std::tie(r.time, r.project) < std::tie(origin->time, origin->project)) origin = &r;
        bool ambiguous = false;
        for (const auto& r : rows)
            if (&r != origin && r.time == origin->time) ambiguous = true;
        for (const auto& r : rows)
            if (&r != origin)
                out.instances.push_back({blob, origin->project, origin->time, r.project, r.time, ambiguous});

        metrics::OriginBlob o;
        o.blob = blob;
        o.project = origin->project;
        o.time = origin->time;
        o.path = origin->path;
        o.size = origin->size;
        const std::string& bytes = content_of.at(blob)->content;
        bool nul = bytes.substr(0, 8000).find('\0') != std::string::npos;
        o.binary = nul || metrics::has_binary_extension(o.path);
        out.origins.push_back(std::move(o));
    }
    std::sort(out.instances.begin(), out.instances.end());

    auto reused_in = [&](const ObjectId& blob, std::optional<std::int64_t> window) {
        for (const auto& r : out.instances)
            if (r.blob == blob && (!window || r.dest_time - r.origin_time <= *window)) return true;
        return false;
    };

    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> quarters;
    for (const auto& o : out.origins) {
        auto& q = quarters[timeutil::quarter_label(o.time)];
        ++q.first;
        q.second += reused_in(o.blob, std::nullopt) ? 1 : 0;
    }
    for (const auto& [label, q] : quarters)
        out.trends.push_back({label, q.first, q.second, static_cast<double>(q.second) / static_cast<double>(q.first)});

    out.flags = oracle_flags(out, options.window_seconds, options.horizon);
    for (const auto& f : out.flags) {
        const auto& o = *std::find_if(out.origins.begin(), out.origins.end(), [&](const auto& x) { return x.blob == f.blob; });
        metrics::BlobFeatureRow row;
        row.blob = o.blob;
        row.origin_project = o.project;
        row.language = o.binary ? metrics::Language::Other : metrics::classify_language(o.path);
        row.creation_time = o.time;
        row.is_binary = o.binary;
        row.size = o.size;
        row.reused_within_window = f.reused;
        out.blob_rows.push_back(std::move(row));
    }

    std::map<std::string, metrics::SizeClass> class_of;
    for (const auto& cluster : out.clusters) {
        metrics::ProjectFeatureRow row;
        row.project = cluster.id;
        std::set<std::string> labels, authors;
        for (const auto& m : cluster.members) {
            const auto& repo = script.repo(m);
            labels.insert(repo.commits.begin(), repo.commits.end());
            if (auto it = script.metadata.find(m); it != script.metadata.end()) {
                row.n_stars = std::max(row.n_stars, it->second.stars);
                row.n_forks = std::max(row.n_forks, it->second.forks);
            }
        }
        std::int64_t lo = 0, hi = 0;
        for (const auto& l : labels) {
            authors.insert(script.commits.at(l).author);
            std::int64_t t = eff.at(l);
            if (l == *labels.begin()) lo = hi = t;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        row.n_commits = labels.size();
        row.n_authors = authors.size();
        row.earliest_commit_time = lo;
        if (!labels.empty()) {
            std::int64_t month = 30 * 86400;
            std::int64_t months = (hi - lo + month - 1) / month;
            row.activity_months = static_cast<std::uint64_t>(std::max<std::int64_t>(1, months));
        }
        std::map<metrics::Language, std::uint64_t> lang_counts;
        for (const auto& o : out.origins) {
            if (o.project != cluster.id) continue;
            bool reused = reused_in(o.blob, options.window_seconds);
            ++row.n_blobs;
            row.n_binary += o.binary ? 1 : 0;
            row.n_reused += reused ? 1 : 0;
            row.n_binary_reused += (reused && o.binary) ? 1 : 0;
            ++lang_counts[metrics::classify_language(o.path)];
        }
        if (row.n_blobs > 0) {
            row.binary_ratio = static_cast<double>(row.n_binary) / static_cast<double>(row.n_blobs);
            row.has_reused_origin = row.n_reused > 0;
            std::uint64_t best = 0;
            for (const auto& [lang, count] : lang_counts)
                if (count > best || (count == best && metrics::language_name(lang) < metrics::language_name(row.dominant_language))) {
                    best = count;
                    row.dominant_language = lang;
                }
            if (row.n_reused > 0 && row.n_binary > 0)
                out.binary_metric[cluster.id] = {row.n_binary_reused, row.n_reused, row.n_binary, row.n_blobs,
                    static_cast<double>(row.n_binary_reused) / static_cast<double>(row.n_reused),
                    static_cast<double>(row.n_binary) / static_cast<double>(row.n_blobs),
                    (static_cast<double>(row.n_binary_reused) / static_cast<double>(row.n_reused)) /
                        (static_cast<double>(row.n_binary) / static_cast<double>(row.n_blobs))};
        }
        class_of[cluster.id] = metrics::size_class(row.n_commits, row.n_stars);
        out.project_rows.push_back(std::move(row));
    }

    std::vector<std::pair<metrics::Language, bool>> by_blob, by_project, share;
    std::map<std::string, metrics::Language> dominant;
    for (const auto& p : out.project_rows) {
        dominant[p.project] = p.dominant_language;
        if (p.n_blobs > 0) share.emplace_back(p.dominant_language, p.has_reused_origin);
    }
    for (const auto& r : out.blob_rows) {
        by_blob.emplace_back(r.language, r.reused_within_window);
        by_project.emplace_back(dominant.at(r.origin_project), r.reused_within_window);
    }
    out.propensity_blob = tabulate(by_blob);
    out.propensity_project = tabulate(by_project);
    out.propensity_project_share = tabulate(share);

    std::set<ObjectId> counted;
    for (const auto& r : out.instances) {
        if (!counted.insert(r.blob).second) continue;
        metrics::SizeClass dest = metrics::SizeClass::Small;
        for (const auto& s : out.instances)
            if (s.blob == r.blob) dest = std::max(dest, class_of.at(s.dest_project));
        ++out.contingency[static_cast<std::size_t>(class_of.at(r.origin_project))][static_cast<std::size_t>(dest)];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random scripts

std::string random_script(std::uint64_t seed, const RandomScriptParams& params) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    auto chance = [&](double p) { return static_cast<double>(rng() % 1000000) < p * 1e6; };

    static const std::array<const char*, 20> exts = {".c",  ".h",  ".py", ".js", ".java", ".go", ".rb",
                                                     ".rs", ".png", ".txt", ".md", ".R",  ".ts", ".php",
                                                     ".kt", ".scala", ".m", ".pl", ".cs", ".jar"};
    static const std::array<const char*, 4> dirs = {"", "src/", "lib/", "doc/"};
    constexpr std::int64_t t0 = 1325376000;  // 2012-01-01

    std::ostringstream s;
    s << "# random corpus, seed " << seed << "\n";
    std::string tag = "s" + std::to_string(seed);
    if (chance(0.5)) s << "deny text=" << tag << "_pool0\n";

    struct RepoInfo {
        std::string id;
        std::vector<std::pair<std::string, std::int64_t>> commits;  // label, time
        std::vector<std::string> paths;
    };
    std::vector<RepoInfo> repos;
    int label_counter = 0;

    for (int r = 0; r < params.repos; ++r) {
        RepoInfo info;
        info.id = "r" + std::to_string(r);
        std::int64_t t = t0 + uniform(0, 400) * 86400;
        std::optional<std::string> head;
        if (r > 0 && chance(params.fork_probability)) {
            const RepoInfo& src = repos[static_cast<std::size_t>(uniform(0, r - 1))];
            if (!src.commits.empty()) {
                const auto& [label, when] = src.commits[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(src.commits.size()) - 1))];
                s << "fork " << info.id << " from " << src.id << "@" << label << "\n";
                head = label;
                t = std::max(t, when);
                info.commits.push_back({label, when});
            }
        }
        if (!head) s << "repo " << info.id << "\n";

        int n_commits = static_cast<int>(uniform(params.min_commits, params.max_commits));
        for (int k = 0; k < n_commits; ++k) {
            std::string label = "c" + std::to_string(label_counter++);
            t += uniform(0, 40) * 86400;
            std::string time = "@" + std::to_string(t);
            if (chance(params.anomaly_probability)) {
                switch (uniform(0, 2)) {
                    case 0: time = "@0"; break;
                    case 1: time = "@4102444800"; break;  // 2100
                    default: time = "@" + std::to_string(t - uniform(1, 90) * 86400); break;
                }
            }
            s << "commit " << label << " time=" << time;
            std::vector<std::string> own;
            for (const auto& c : info.commits) own.push_back(c.first);
            if (own.size() >= 2 && chance(params.merge_probability)) {
                const std::string& other = own[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(own.size()) - 2))];
                if (head && other != *head) s << " parent=" << *head << " parent=" << other;
            } else if (own.size() >= 2 && chance(0.15)) {
                s << " parent=" << own[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(own.size()) - 1))];
                info.paths.clear();  // tree unknown after branching; stop deleting
            } else if (!head) {
                s << " parent=none";
            }
            if (chance(0.3)) s << " author=dev" << uniform(0, 3);
            s << "\n";

            int files = static_cast<int>(uniform(1, 3));
            for (int f = 0; f < files; ++f) {
                std::string path = std::string(dirs[static_cast<std::size_t>(uniform(0, 3))]) + "f" +
                                   std::to_string(uniform(0, 30)) + exts[static_cast<std::size_t>(uniform(0, 19))];
                bool taken = false;
                for (const auto& p : info.paths) taken = taken || p.rfind(path + "/", 0) == 0;
                if (taken) continue;
                std::int64_t kind = uniform(0, 11);
                if (kind <= 3) {
                    s << "file " << path << " text=" << tag << "_pool" << uniform(0, params.shared_pool - 1) << "\n";
                } else if (kind == 4) {
                    static const char* digits = "0123456789abcdef";
                    std::string hex = "00";
                    for (int b = 0; b < 3; ++b) {
                        std::int64_t v = uniform(0, 255);
                        hex.push_back(digits[v / 16]);
                        hex.push_back(digits[v % 16]);
                    }
                    s << "file " << path << " hex=" << hex << "\n";
                } else if (kind == 5) {
                    s << "file " << path << " <<EOF\nEOF\n";
                } else if (kind == 6 && !info.paths.empty()) {
                    std::size_t victim = static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(info.paths.size()) - 1));
                    s << "delete " << info.paths[victim] << "\n";
                    info.paths.erase(info.paths.begin() + static_cast<std::ptrdiff_t>(victim));
                    continue;
                } else if (kind == 7) {
                    s << "symlink " << path << " target" << uniform(0, 3) << "\n";
                } else if (kind == 8 && chance(0.3)) {
                    s << "gitlink " << path << " " << std::string(39, 'a') << uniform(0, 9) << "\n";
                } else {
                    s << "file " << path << " text=" << tag << "_u" << label << "_" << f << "\n";
                }
                if (std::find(info.paths.begin(), info.paths.end(), path) == info.paths.end()) info.paths.push_back(path);
            }
            info.commits.push_back({label, t});
            head = label;
        }
        if (chance(0.12)) s << "churn 101 start=@" << t << " step=3600\n";
        if (chance(0.2) && head) s << "tag v" << r << " " << *head << "\n";
        s << "meta " << info.id << " stars=" << uniform(0, 20) << " forks=" << uniform(0, 5) << "\n";
        repos.push_back(std::move(info));
    }
    return s.str();
}

}  // namespace copytrace::synth
