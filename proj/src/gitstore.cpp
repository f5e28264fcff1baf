#include "copytrace/gitstore.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "copytrace/error.hpp"

namespace copytrace::git {

namespace {

constexpr std::size_t kMaxDeltaDepth = 4096;

std::uint32_t be32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
}

std::uint64_t be64(const std::uint8_t* p) { return std::uint64_t(be32(p)) << 32 | be32(p + 4); }

class MappedFile {
public:
    explicit MappedFile(const fs::path& path) {
        int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
        if (fd < 0) throw Error(Errc::IoError, "cannot open " + path.string());
        struct stat st {};
        if (::fstat(fd, &st) != 0) {
            ::close(fd);
            throw Error(Errc::IoError, "cannot stat " + path.string());
        }
        size_ = static_cast<std::size_t>(st.st_size);
        if (size_ > 0) {
            void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
            if (p == MAP_FAILED) {
                ::close(fd);
                throw Error(Errc::IoError, "cannot map " + path.string());
            }
            data_ = static_cast<const std::uint8_t*>(p);
        }
        ::close(fd);
    }
    ~MappedFile() {
        if (data_) ::munmap(const_cast<std::uint8_t*>(data_), size_);
    }
    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;

    std::span<const std::uint8_t> bytes() const noexcept { return {data_, size_}; }
    std::size_t size() const noexcept { return size_; }
    const std::uint8_t* data() const noexcept { return data_; }

private:
    const std::uint8_t* data_ = nullptr;
    std::size_t size_ = 0;
};

struct Decoded {
    ObjectKind kind;
    Bytes payload;
};

struct PackFile {
    fs::path pack_path;
    std::unique_ptr<MappedFile> idx;
    std::unique_ptr<MappedFile> pack;
    std::uint32_t count = 0;
    const std::uint8_t* fanout = nullptr;
    const std::uint8_t* ids = nullptr;
    const std::uint8_t* offsets = nullptr;
    const std::uint8_t* large_offsets = nullptr;
    std::size_t large_count = 0;

    std::optional<std::uint64_t> find(const ObjectId& id) const {
        std::uint32_t first = id[0];
        std::uint32_t lo = first == 0 ? 0 : be32(fanout + 4 * (first - 1));
        std::uint32_t hi = be32(fanout + 4 * first);
        while (lo < hi) {
            std::uint32_t mid = lo + (hi - lo) / 2;
            int c = std::memcmp(ids + std::size_t(mid) * 20, id.raw().data(), 20);
            if (c == 0) return offset_at(mid);
            if (c < 0)
                lo = mid + 1;
            else
                hi = mid;
        }
        return std::nullopt;
    }

    std::uint64_t offset_at(std::uint32_t i) const {
        std::uint32_t v = be32(offsets + 4 * std::size_t(i));
        if (!(v & 0x80000000u)) return v;
        std::size_t li = v & 0x7fffffffu;
        if (li >= large_count) throw Error(Errc::CorruptIndex, "large offset out of range in " + pack_path.string());
        return be64(large_offsets + 8 * li);
    }

    ObjectId id_at(std::uint32_t i) const { return ObjectId::from_raw(ids + std::size_t(i) * 20); }
};

std::unique_ptr<PackFile> load_pack(const fs::path& idx_path) {
    auto pf = std::make_unique<PackFile>();
    pf->pack_path = fs::path(idx_path).replace_extension(".pack");
    pf->idx = std::make_unique<MappedFile>(idx_path);
    auto idx = pf->idx->bytes();
    const std::string where = idx_path.string();

    if (idx.size() < 8 || std::memcmp(idx.data(), "\377tOc", 4) != 0)
        throw Error(Errc::UnsupportedFormat, "pack index v1 or unknown format: " + where);
    if (be32(idx.data() + 4) != 2) throw Error(Errc::UnsupportedFormat, "pack index version is not 2: " + where);
    if (idx.size() < 8 + 1024 + 40) throw Error(Errc::CorruptIndex, "truncated index " + where);

    pf->fanout = idx.data() + 8;
    std::uint32_t prev = 0;
    for (int i = 0; i < 256; ++i) {
        std::uint32_t v = be32(pf->fanout + 4 * i);
        if (v < prev) throw Error(Errc::CorruptIndex, "non-monotone fanout in " + where);
        prev = v;
    }
    pf->count = prev;
    const std::size_t n = pf->count;
    const std::size_t fixed = 8 + 1024 + n * (20 + 4 + 4);
    if (idx.size() < fixed + 40) throw Error(Errc::CorruptIndex, "truncated index " + where);
    pf->ids = idx.data() + 8 + 1024;
    pf->offsets = pf->ids + n * 24;
    pf->large_offsets = pf->offsets + n * 4;
    std::size_t tail = idx.size() - fixed - 40;
    if (tail % 8 != 0) throw Error(Errc::CorruptIndex, "bad large-offset table in " + where);
    pf->large_count = tail / 8;

    ObjectId stored = ObjectId::from_raw(idx.data() + idx.size() - 20);
    if (sha1(idx.first(idx.size() - 20)) != stored) throw Error(Errc::CorruptIndex, "index checksum mismatch in " + where);

    if (!fs::exists(pf->pack_path)) throw Error(Errc::CorruptIndex, "index without pack: " + where);
    pf->pack = std::make_unique<MappedFile>(pf->pack_path);
    auto pack = pf->pack->bytes();
    if (pack.size() < 12 + 20 || std::memcmp(pack.data(), "PACK", 4) != 0)
        throw Error(Errc::CorruptObject, "not a packfile: " + pf->pack_path.string());
    std::uint32_t version = be32(pack.data() + 4);
    if (version != 2)
        throw Error(Errc::UnsupportedPackVersion,
                    "pack version " + std::to_string(version) + " in " + pf->pack_path.string());
    if (be32(pack.data() + 8) != pf->count)
        throw Error(Errc::CorruptIndex, "object count disagrees with pack " + pf->pack_path.string());
    if (std::memcmp(pack.data() + pack.size() - 20, idx.data() + idx.size() - 40, 20) != 0)
        throw Error(Errc::CorruptIndex, "index does not belong to pack " + pf->pack_path.string());
    return pf;
}

std::size_t read_size_varint(std::span<const std::uint8_t> data, std::size_t& pos) {
    std::size_t value = 0;
    int shift = 0;
    while (true) {
        if (pos >= data.size()) throw Error(Errc::CorruptObject, "truncated delta header");
        std::uint8_t b = data[pos++];
        if (shift < 64) value |= std::size_t(b & 0x7f) << shift;
        shift += 7;
        if (!(b & 0x80)) break;
    }
    return value;
}

ObjectKind kind_from_name(std::string_view name) {
    if (name == "commit") return ObjectKind::Commit;
    if (name == "tree") return ObjectKind::Tree;
    if (name == "blob") return ObjectKind::Blob;
    if (name == "tag") return ObjectKind::Tag;
    throw Error(Errc::CorruptObject, "unknown object type '" + std::string(name) + "'");
}

}  // namespace

std::string_view kind_name(ObjectKind kind) noexcept {
    switch (kind) {
    case ObjectKind::Commit: return "commit";
    case ObjectKind::Tree: return "tree";
    case ObjectKind::Blob: return "blob";
    case ObjectKind::Tag: return "tag";
    }
    return "?";
}

Bytes apply_delta(std::span<const std::uint8_t> base, std::span<const std::uint8_t> delta) {
    std::size_t pos = 0;
    std::size_t src_size = read_size_varint(delta, pos);
    std::size_t dst_size = read_size_varint(delta, pos);
    if (src_size != base.size()) throw Error(Errc::CorruptObject, "delta base size mismatch");
    Bytes out;
    out.reserve(dst_size);
    while (pos < delta.size()) {
        std::uint8_t op = delta[pos++];
        if (op & 0x80) {
            std::size_t off = 0, len = 0;
            for (int i = 0; i < 4; ++i)
                if (op & (1 << i)) {
                    if (pos >= delta.size()) throw Error(Errc::CorruptObject, "truncated delta copy");
                    off |= std::size_t(delta[pos++]) << (8 * i);
                }
            for (int i = 0; i < 3; ++i)
                if (op & (0x10 << i)) {
                    if (pos >= delta.size()) throw Error(Errc::CorruptObject, "truncated delta copy");
                    len |= std::size_t(delta[pos++]) << (8 * i);
                }
            if (len == 0) len = 0x10000;
            if (off + len > base.size() || off + len < off) throw Error(Errc::CorruptObject, "delta copy out of range");
            out.insert(out.end(), base.begin() + off, base.begin() + off + len);
        } else if (op != 0) {
            if (pos + op > delta.size()) throw Error(Errc::CorruptObject, "truncated delta insert");
            out.insert(out.end(), delta.begin() + pos, delta.begin() + pos + op);
            pos += op;
        } else {
            throw Error(Errc::CorruptObject, "reserved delta opcode");
        }
    }
    if (out.size() != dst_size) throw Error(Errc::CorruptObject, "delta result size mismatch");
    return out;
}

struct ObjectStore::Impl {
    fs::path git_dir;
    StoreOptions options;
    std::vector<ObjectId> loose;  // sorted
    std::vector<std::unique_ptr<PackFile>> packs;
    std::size_t total = 0;

    mutable std::mutex cache_mu;
    mutable std::map<std::pair<std::size_t, std::uint64_t>, std::shared_ptr<const Decoded>> cache;
    mutable std::size_t cache_used = 0;

    bool has_loose(const ObjectId& id) const { return std::binary_search(loose.begin(), loose.end(), id); }

    fs::path loose_path(const ObjectId& id) const {
        std::string hex = id.hex();
        return git_dir / "objects" / hex.substr(0, 2) / hex.substr(2);
    }

    std::shared_ptr<const Decoded> cache_get(std::size_t pack, std::uint64_t off) const {
        if (options.cache_bytes == 0) return nullptr;
        std::lock_guard lock(cache_mu);
        auto it = cache.find({pack, off});
        return it == cache.end() ? nullptr : it->second;
    }

    void cache_put(std::size_t pack, std::uint64_t off, std::shared_ptr<const Decoded> obj) const {
        if (options.cache_bytes == 0 || obj->payload.size() > options.cache_bytes / 4) return;
        std::lock_guard lock(cache_mu);
        if (cache_used + obj->payload.size() > options.cache_bytes) {
            cache.clear();
            cache_used = 0;
        }
        cache_used += obj->payload.size();
        cache.emplace(std::pair{pack, off}, std::move(obj));
    }

    Decoded read_loose(const ObjectId& id) const {
        MappedFile file(loose_path(id));
        Bytes raw = zlib_inflate(file.bytes(), file.size() * 2);
        auto nul = std::find(raw.begin(), raw.end(), std::uint8_t{0});
        if (nul == raw.end()) throw Error(Errc::CorruptObject, "loose object without header: " + id.hex());
        std::string_view header(reinterpret_cast<const char*>(raw.data()), std::size_t(nul - raw.begin()));
        auto sp = header.find(' ');
        if (sp == std::string_view::npos) throw Error(Errc::CorruptObject, "bad loose header: " + id.hex());
        ObjectKind kind = kind_from_name(header.substr(0, sp));
        std::size_t size = 0;
        auto sz = header.substr(sp + 1);
        auto [p, ec] = std::from_chars(sz.data(), sz.data() + sz.size(), size);
        if (ec != std::errc{} || p != sz.data() + sz.size()) throw Error(Errc::CorruptObject, "bad loose size: " + id.hex());
        std::size_t body = std::size_t(nul - raw.begin()) + 1;
        if (raw.size() - body != size) throw Error(Errc::CorruptObject, "loose size mismatch: " + id.hex());
        raw.erase(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(body));
        return {kind, std::move(raw)};
    }

    // Resolves the pack entry at `off`, following delta bases iteratively.
    std::shared_ptr<const Decoded> read_packed(std::size_t pack_index, std::uint64_t off, std::size_t depth) const {
        std::vector<Bytes> deltas;
        std::vector<std::pair<std::size_t, std::uint64_t>> visited;
        std::shared_ptr<const Decoded> base;
        std::size_t cur_pack = pack_index;
        std::uint64_t cur = off;

        while (!base) {
            if (deltas.size() + depth > kMaxDeltaDepth)
                throw Error(Errc::DeltaDepthExceeded, "delta chain exceeds " + std::to_string(kMaxDeltaDepth));
            if (auto hit = cache_get(cur_pack, cur)) {
                base = std::move(hit);
                break;
            }
            const PackFile& pf = *packs[cur_pack];
            auto data = pf.pack->bytes();
            if (cur + 1 >= data.size() - 20) throw Error(Errc::CorruptObject, "pack offset out of range");
            std::size_t pos = static_cast<std::size_t>(cur);
            std::uint8_t c = data[pos++];
            int type = (c >> 4) & 7;
            std::size_t size = c & 15;
            int shift = 4;
            while (c & 0x80) {
                if (pos >= data.size()) throw Error(Errc::CorruptObject, "truncated pack entry header");
                c = data[pos++];
                if (shift < 64) size |= std::size_t(c & 0x7f) << shift;
                shift += 7;
            }
            if (type >= 1 && type <= 4) {
                Bytes payload = zlib_inflate(data.subspan(pos), size);
                if (payload.size() != size) throw Error(Errc::CorruptObject, "pack entry size mismatch");
                auto obj = std::make_shared<const Decoded>(Decoded{static_cast<ObjectKind>(type), std::move(payload)});
                cache_put(cur_pack, cur, obj);
                base = std::move(obj);
                break;
            }
            visited.emplace_back(cur_pack, cur);
            if (type == 6) {
                if (pos >= data.size()) throw Error(Errc::CorruptObject, "truncated ofs-delta");
                c = data[pos++];
                std::uint64_t rel = c & 0x7f;
                while (c & 0x80) {
                    if (pos >= data.size()) throw Error(Errc::CorruptObject, "truncated ofs-delta");
                    c = data[pos++];
                    rel = ((rel + 1) << 7) | (c & 0x7f);
                }
                if (rel == 0 || rel > cur) throw Error(Errc::CorruptObject, "ofs-delta base out of range");
                deltas.push_back(zlib_inflate(data.subspan(pos), size));
                cur -= rel;
            } else if (type == 7) {
                if (pos + 20 > data.size()) throw Error(Errc::CorruptObject, "truncated ref-delta");
                ObjectId base_id = ObjectId::from_raw(data.data() + pos);
                pos += 20;
                deltas.push_back(zlib_inflate(data.subspan(pos), size));
                bool found = false;
                for (std::size_t i = 0; i < packs.size() && !found; ++i) {
                    std::size_t probe = (cur_pack + i) % packs.size();
                    if (auto o = packs[probe]->find(base_id)) {
                        cur_pack = probe;
                        cur = *o;
                        found = true;
                    }
                }
                if (!found) {
                    if (!has_loose(base_id))
                        throw Error(Errc::DeltaBaseMissing, "ref-delta base " + base_id.hex() + " not in store");
                    base = std::make_shared<const Decoded>(read_loose(base_id));
                }
            } else {
                throw Error(Errc::CorruptObject, "invalid pack entry type " + std::to_string(type));
            }
        }

        if (deltas.empty()) return base;
        std::shared_ptr<const Decoded> result = base;
        for (std::size_t i = deltas.size(); i-- > 0;) {
            auto next = std::make_shared<const Decoded>(Decoded{result->kind, apply_delta(result->payload, deltas[i])});
            cache_put(visited[i].first, visited[i].second, next);
            result = std::move(next);
        }
        return result;
    }
};

fs::path find_git_dir(const fs::path& repo_path) {
    std::error_code ec;
    fs::path dotgit = repo_path / ".git";
    if (fs::is_directory(dotgit, ec) && fs::is_directory(dotgit / "objects", ec)) return dotgit;
    if (fs::is_regular_file(dotgit, ec)) {
        std::ifstream in(dotgit);
        std::string line;
        std::getline(in, line);
        if (line.rfind("gitdir: ", 0) == 0) {
            fs::path target = line.substr(8);
            if (target.is_relative()) target = repo_path / target;
            if (fs::is_directory(target / "objects", ec)) return target;
        }
    }
    if (fs::is_directory(repo_path / "objects", ec) && fs::exists(repo_path / "HEAD", ec)) return repo_path;
    return {};
}

ObjectStore ObjectStore::open(const fs::path& repo_path, StoreOptions options) {
    fs::path git_dir = find_git_dir(repo_path);
    if (git_dir.empty()) throw Error(Errc::NotAGitRepository, repo_path.string());

    auto impl = std::make_shared<Impl>();
    impl->git_dir = git_dir;
    impl->options = options;

    const fs::path objects = git_dir / "objects";
    std::error_code ec;
    for (const auto& dir : fs::directory_iterator(objects, ec)) {
        auto name = dir.path().filename().string();
        if (name.size() != 2 || !dir.is_directory()) continue;
        for (const auto& f : fs::directory_iterator(dir.path())) {
            auto rest = f.path().filename().string();
            if (rest.size() != 38) continue;
            if (auto id = ObjectId::try_from_hex(name + rest)) impl->loose.push_back(*id);
        }
    }
    if (ec) throw Error(Errc::NotAGitRepository, "cannot list " + objects.string());
    std::sort(impl->loose.begin(), impl->loose.end());

    const fs::path pack_dir = objects / "pack";
    if (fs::is_directory(pack_dir)) {
        if (fs::exists(pack_dir / "multi-pack-index"))
            throw Error(Errc::UnsupportedFormat, "multi-pack-index is not supported: " + pack_dir.string());
        std::vector<fs::path> idx_files;
        for (const auto& f : fs::directory_iterator(pack_dir))
            if (f.path().extension() == ".idx") idx_files.push_back(f.path());
        std::sort(idx_files.begin(), idx_files.end());
        for (const auto& p : idx_files) impl->packs.push_back(load_pack(p));
    }

    std::vector<ObjectId> all = impl->loose;
    for (const auto& p : impl->packs)
        for (std::uint32_t i = 0; i < p->count; ++i) all.push_back(p->id_at(i));
    std::sort(all.begin(), all.end());
    impl->total = static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
    return ObjectStore(std::move(impl));
}

const fs::path& ObjectStore::git_dir() const noexcept { return impl_->git_dir; }
std::size_t ObjectStore::object_count() const noexcept { return impl_->total; }
std::size_t ObjectStore::pack_count() const noexcept { return impl_->packs.size(); }

std::vector<ObjectId> ObjectStore::object_ids() const {
    std::vector<ObjectId> all = impl_->loose;
    for (const auto& p : impl_->packs)
        for (std::uint32_t i = 0; i < p->count; ++i) all.push_back(p->id_at(i));
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

bool ObjectStore::contains(const ObjectId& id) const noexcept {
    if (impl_->has_loose(id)) return true;
    for (const auto& p : impl_->packs)
        if (p->find(id)) return true;
    return false;
}

GitObject ObjectStore::read(const ObjectId& id) const {
    GitObject obj;
    bool found = false;
    for (std::size_t i = 0; i < impl_->packs.size() && !found; ++i) {
        if (auto off = impl_->packs[i]->find(id)) {
            auto decoded = impl_->read_packed(i, *off, 0);
            obj.kind = decoded->kind;
            obj.payload = decoded->payload;
            found = true;
        }
    }
    if (!found) {
        if (!impl_->has_loose(id)) throw Error(Errc::ObjectNotFound, id.hex() + " in " + impl_->git_dir.string());
        Decoded d = impl_->read_loose(id);
        obj.kind = d.kind;
        obj.payload = std::move(d.payload);
    }
    if (impl_->options.verify_hashes && git_object_id(kind_name(obj.kind), obj.payload) != id)
        throw Error(Errc::CorruptObject, "hash mismatch for " + id.hex());
    return obj;
}

std::vector<Ref> ObjectStore::refs() const {
    const fs::path& gd = impl_->git_dir;
    std::map<std::string, std::string> raw;  // name -> content (hex or "ref: x")

    if (std::ifstream packed(gd / "packed-refs"); packed) {
        std::string line;
        while (std::getline(packed, line)) {
            if (line.empty() || line[0] == '#' || line[0] == '^') continue;
            auto sp = line.find(' ');
            if (sp == std::string::npos) continue;
            raw[line.substr(sp + 1)] = line.substr(0, sp);
        }
    }
    std::error_code ec;
    if (fs::is_directory(gd / "refs")) {
        for (auto it = fs::recursive_directory_iterator(gd / "refs", ec); it != fs::recursive_directory_iterator();
             it.increment(ec)) {
            if (ec) break;
            if (!it->is_regular_file()) continue;
            std::ifstream in(it->path());
            std::string content;
            std::getline(in, content);
            raw[fs::relative(it->path(), gd).generic_string()] = content;
        }
    }
    if (std::ifstream head(gd / "HEAD"); head) {
        std::string content;
        std::getline(head, content);
        raw["HEAD"] = content;
    }

    std::vector<Ref> out;
    for (const auto& [name, first] : raw) {
        std::string content = first;
        for (int hops = 0; hops < 10 && content.rfind("ref: ", 0) == 0; ++hops) {
            auto it = raw.find(content.substr(5));
            content = it == raw.end() ? std::string{} : it->second;
        }
        while (!content.empty() && (content.back() == '\r' || content.back() == ' ')) content.pop_back();
        if (auto id = ObjectId::try_from_hex(content)) out.push_back({name, *id});
    }
    return out;
}

namespace {

// "Name <email> 1600000000 +0100"
void parse_identity(std::string_view line, std::string* who, std::int64_t& when, std::int32_t& tz) {
    auto gt = line.rfind('>');
    if (gt == std::string_view::npos) throw Error(Errc::MalformedCommitHeader, "identity without email");
    if (who) *who = std::string(line.substr(0, gt + 1));
    auto rest = line.substr(gt + 1);
    while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
    auto sp = rest.find(' ');
    auto ts = rest.substr(0, sp);
    auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), when);
    if (ec != std::errc{} || ts.empty()) throw Error(Errc::MalformedCommitHeader, "bad timestamp");
    tz = 0;
    if (sp != std::string_view::npos) {
        auto z = rest.substr(sp + 1);
        if (z.size() >= 5 && (z[0] == '+' || z[0] == '-')) {
            int v = 0;
            std::from_chars(z.data() + 1, z.data() + 5, v);
            int minutes = (v / 100) * 60 + v % 100;
            tz = z[0] == '-' ? -minutes : minutes;
        }
    }
}

}  // namespace

CommitRecord parse_commit(const GitObject& obj, const ObjectId& id) {
    if (obj.kind != ObjectKind::Commit) throw Error(Errc::MalformedCommitHeader, id.hex() + " is not a commit");
    CommitRecord rec;
    rec.id = id;
    bool has_tree = false, has_author = false, has_committer = false;
    std::string_view text = obj.text();
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) break;
        if (line.front() == ' ') continue;  // continuation of a multi-line header
        auto sp = line.find(' ');
        auto key = line.substr(0, sp);
        auto value = sp == std::string_view::npos ? std::string_view{} : line.substr(sp + 1);
        try {
            if (key == "tree") {
                rec.tree = ObjectId::from_hex(value);
                has_tree = true;
            } else if (key == "parent") {
                rec.parents.push_back(ObjectId::from_hex(value));
            } else if (key == "author") {
                parse_identity(value, &rec.author, rec.author_time, rec.author_tz_minutes);
                has_author = true;
            } else if (key == "committer") {
                parse_identity(value, nullptr, rec.raw_time, rec.committer_tz_minutes);
                has_committer = true;
            }
        } catch (const Error& e) {
            throw Error(Errc::MalformedCommitHeader, id.hex() + ": " + e.what());
        }
    }
    if (!has_tree || !has_author || !has_committer)
        throw Error(Errc::MalformedCommitHeader, id.hex() + ": missing tree/author/committer");
    rec.effective_time = rec.raw_time;
    return rec;
}

ObjectId parse_tag_target(const GitObject& obj) {
    std::string_view text = obj.text();
    if (obj.kind != ObjectKind::Tag || text.rfind("object ", 0) != 0 || text.size() < 47)
        throw Error(Errc::CorruptObject, "malformed tag");
    return ObjectId::from_hex(text.substr(7, 40));
}

std::vector<TreeEntry> parse_tree(const GitObject& obj) {
    if (obj.kind != ObjectKind::Tree) throw Error(Errc::CorruptTree, "object is not a tree");
    std::vector<TreeEntry> out;
    const auto& p = obj.payload;
    std::size_t pos = 0;
    while (pos < p.size()) {
        std::uint32_t mode = 0;
        std::size_t start = pos;
        while (pos < p.size() && p[pos] != ' ') {
            if (p[pos] < '0' || p[pos] > '7') throw Error(Errc::CorruptTree, "bad mode");
            mode = mode * 8 + (p[pos] - '0');
            ++pos;
        }
        if (pos == start || pos >= p.size()) throw Error(Errc::CorruptTree, "truncated mode");
        ++pos;
        std::size_t name_start = pos;
        while (pos < p.size() && p[pos] != 0) ++pos;
        if (pos >= p.size() || pos == name_start) throw Error(Errc::CorruptTree, "truncated name");
        std::string name(reinterpret_cast<const char*>(p.data() + name_start), pos - name_start);
        ++pos;
        if (pos + 20 > p.size()) throw Error(Errc::CorruptTree, "truncated entry id");
        out.push_back({mode, std::move(name), ObjectId::from_raw(p.data() + pos)});
        pos += 20;
    }
    return out;
}

std::vector<PathBlob> walk_tree(const ObjectStore& store, const ObjectId& tree_id) {
    std::vector<PathBlob> out;
    std::vector<std::pair<std::string, ObjectId>> stack{{std::string{}, tree_id}};
    while (!stack.empty()) {
        auto [prefix, id] = std::move(stack.back());
        stack.pop_back();
        GitObject obj = store.read(id);
        if (obj.kind != ObjectKind::Tree) throw Error(Errc::CorruptTree, id.hex() + " is not a tree");
        for (auto& e : parse_tree(obj)) {
            std::string path = prefix.empty() ? e.name : prefix + "/" + e.name;
            std::uint32_t type = e.mode & 0170000;
            if (type == kModeTree)
                stack.emplace_back(std::move(path), e.id);
            else if (type == kModeGitlink)
                continue;
            else
                out.push_back({std::move(path), e.id, e.mode});
        }
    }
    std::sort(out.begin(), out.end(), [](const PathBlob& a, const PathBlob& b) { return a.path < b.path; });
    out.erase(std::unique(out.begin(), out.end(), [](const PathBlob& a, const PathBlob& b) { return a.path == b.path; }),
              out.end());
    return out;
}

}  // namespace copytrace::git
