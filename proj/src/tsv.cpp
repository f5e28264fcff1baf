#include "copytrace/tsv.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "copytrace/error.hpp"

namespace copytrace::tsv {

void append_escaped(std::string& out, std::string_view field) {
    for (char c : field) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c);
        }
    }
}

std::string escape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    append_escaped(out, field);
    return out;
}

std::string unescape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        char c = field[i];
        if (c != '\\' || i + 1 == field.size()) {
            out.push_back(c);
            continue;
        }
        char n = field[++i];
        switch (n) {
        case '\\': out.push_back('\\'); break;
        case 't': out.push_back('\t'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        default:
            out.push_back('\\');
            out.push_back(n);
        }
    }
    return out;
}

void split(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    split(line, out);
    return out;
}

template <typename T>
static T parse_number(std::string_view field) {
    T v{};
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || p != field.data() + field.size() || field.empty())
        throw Error(Errc::IoError, "not a number: '" + std::string(field) + "'");
    return v;
}

std::int64_t parse_i64(std::string_view field) { return parse_number<std::int64_t>(field); }
std::uint64_t parse_u64(std::string_view field) { return parse_number<std::uint64_t>(field); }
double parse_f64(std::string_view field) { return parse_number<double>(field); }

void append_int(std::string& out, std::int64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
}

void append_uint(std::string& out, std::uint64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
}

void append_double(std::string& out, double v) {
    if (v != v) {
        out += "NA";
        return;
    }
    if (v == 0) v = 0;  // drop negative zero
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
}

std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

LineReader::LineReader(const std::filesystem::path& path) : path_(path), buf_(1 << 16) {
    f_ = std::fopen(path.c_str(), "rb");
    if (!f_) throw Error(Errc::IoError, "cannot open " + path.string());
    std::setvbuf(f_, nullptr, _IOFBF, 1 << 20);
}

LineReader::~LineReader() {
    if (f_) std::fclose(f_);
}

bool LineReader::next(std::string& line) {
    line.clear();
    while (std::fgets(buf_.data(), static_cast<int>(buf_.size()), f_)) {
        std::size_t n = std::strlen(buf_.data());
        if (n > 0 && buf_[n - 1] == '\n') {
            line.append(buf_.data(), n - 1);
            return true;
        }
        line.append(buf_.data(), n);
    }
    if (std::ferror(f_)) throw Error(Errc::IoError, "read error on " + path_.string());
    return !line.empty();
}

FileWriter::FileWriter(const std::filesystem::path& path, int errc_on_failure)
    : path_(path), errc_(errc_on_failure) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_)
        throw Error(errc_ < 0 ? Errc::IoError : static_cast<Errc>(errc_), "cannot create " + path.string());
    std::setvbuf(f_, nullptr, _IOFBF, 1 << 20);
}

FileWriter::~FileWriter() {
    if (f_) std::fclose(f_);
}

void FileWriter::write(std::string_view data) {
    if (std::fwrite(data.data(), 1, data.size(), f_) != data.size())
        throw Error(errc_ < 0 ? Errc::IoError : static_cast<Errc>(errc_), "write failed on " + path_.string());
}

void FileWriter::close() {
    if (!f_) return;
    int rc = std::fclose(f_);
    f_ = nullptr;
    if (rc != 0) throw Error(errc_ < 0 ? Errc::IoError : static_cast<Errc>(errc_), "close failed on " + path_.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    FileWriter w(path);
    w.write(content);
    w.close();
}

}  // namespace copytrace::tsv
