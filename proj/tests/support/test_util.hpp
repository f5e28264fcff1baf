#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "copytrace/codec.hpp"
#include "copytrace/object_id.hpp"

namespace testutil {

namespace fs = std::filesystem;
using copytrace::Bytes;
using copytrace::ObjectId;

/// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

struct CommandResult {
    int status = 0;
    std::string output;  // stdout and stderr
};

CommandResult run(const std::string& command);
std::string shell_quote(const std::string& s);
bool have_git();

/// Every regular file under root as relative path -> bytes.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& root);

/// Git delta stream: header sizes followed by copy/insert instructions.
class DeltaBuilder {
public:
    DeltaBuilder(std::size_t base_size, std::size_t result_size);
    DeltaBuilder& copy(std::size_t offset, std::size_t size);
    DeltaBuilder& insert(std::string_view data);
    const Bytes& bytes() const noexcept { return out_; }

private:
    Bytes out_;
};

struct PackEntry {
    int type = 3;  // 1..4 whole objects, 6 ofs-delta, 7 ref-delta
    Bytes data;    // payload or delta
    std::size_t ofs_base = 0;  // entry index for type 6
    ObjectId ref_base;         // for type 7
    ObjectId id;               // name recorded in the index
};

/// Writes objects/pack/pack-<sum>.pack and .idx (v2) into git_dir.
void write_pack(const fs::path& git_dir, const std::vector<PackEntry>& entries, std::uint32_t pack_version = 2);

/// Minimal bare repository skeleton (HEAD, objects/, refs/).
void init_bare(const fs::path& git_dir);
/// Writes a loose object and returns its id.
ObjectId write_loose(const fs::path& git_dir, std::string_view kind, std::string_view payload);

/// Splits text into lines without trailing newlines.
std::vector<std::string> lines(const std::string& text);

}  // namespace testutil
