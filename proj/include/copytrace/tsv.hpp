#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace copytrace::tsv {

/// Escapes '\\', '\t', '\n' (and '\r') so the field fits on one TSV line.
void append_escaped(std::string& out, std::string_view field);
std::string escape(std::string_view field);
/// Inverse of escape(); unknown escapes are kept verbatim.
std::string unescape(std::string_view field);

/// Splits on '\t' without unescaping. Views point into `line`.
std::vector<std::string_view> split(std::string_view line);
void split(std::string_view line, std::vector<std::string_view>& out);

std::int64_t parse_i64(std::string_view field);
std::uint64_t parse_u64(std::string_view field);
double parse_f64(std::string_view field);
void append_int(std::string& out, std::int64_t v);
void append_uint(std::string& out, std::uint64_t v);
/// Shortest round-trip representation.
void append_double(std::string& out, double v);
std::string format_double(double v);

/// Buffered line reader over a FILE*; keeps the trailing newline out of `line`.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path);
    ~LineReader();
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    bool next(std::string& line);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::FILE* f_ = nullptr;
    std::vector<char> buf_;
};

/// Buffered writer; throws Error(errc) on failure.
class FileWriter {
public:
    FileWriter(const std::filesystem::path& path, int errc_on_failure = -1);
    ~FileWriter();
    FileWriter(const FileWriter&) = delete;
    FileWriter& operator=(const FileWriter&) = delete;

    void write(std::string_view data);
    void close();
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::FILE* f_ = nullptr;
    int errc_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace copytrace::tsv
