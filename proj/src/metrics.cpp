#include "copytrace/metrics.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "copytrace/error.hpp"
#include "copytrace/timeutil.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace::metrics {

namespace {

constexpr std::array<std::string_view, kLanguageCount> kNames = {
    "C", "CSharp", "Go", "JavaScript", "Kotlin", "ObjectiveC", "Python", "R",
    "Rust", "Scala", "TypeScript", "Java", "PHP", "Perl", "Ruby", "Other",
};

std::string_view extension_of(std::string_view path) noexcept {
    auto slash = path.rfind('/');
    auto base = slash == std::string_view::npos ? path : path.substr(slash + 1);
    auto dot = base.rfind('.');
    if (dot == std::string_view::npos || dot == 0) return {};
    return base.substr(dot + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

}  // namespace

std::string_view language_name(Language lang) noexcept { return kNames[static_cast<std::size_t>(lang)]; }

std::optional<Language> language_from_name(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name) return static_cast<Language>(i);
    return std::nullopt;
}

const std::array<Language, kLanguageCount>& languages_by_name() noexcept {
    static const auto order = [] {
        std::array<Language, kLanguageCount> a{};
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<Language>(i);
        std::sort(a.begin(), a.end(), [](Language x, Language y) { return language_name(x) < language_name(y); });
        return a;
    }();
    return order;
}

Language classify_language(std::string_view path) noexcept {
    auto ext = extension_of(path);
    if (ext == "R" || ext == "r") return Language::R;
    if (ext == "m" || ext == "mm") return Language::ObjectiveC;
    static const std::unordered_map<std::string_view, Language> map = {
        {"c", Language::C},           {"h", Language::C},         {"cs", Language::CSharp},
        {"go", Language::Go},         {"js", Language::JavaScript}, {"mjs", Language::JavaScript},
        {"kt", Language::Kotlin},     {"py", Language::Python},   {"rs", Language::Rust},
        {"scala", Language::Scala},   {"ts", Language::TypeScript}, {"tsx", Language::TypeScript},
        {"java", Language::Java},     {"php", Language::PHP},     {"pl", Language::Perl},
        {"pm", Language::Perl},       {"rb", Language::Ruby},
    };
    auto it = map.find(ext);
    return it == map.end() ? Language::Other : it->second;
}

bool has_binary_extension(std::string_view path) noexcept {
    static const std::set<std::string, std::less<>> binary = {
        "jpg", "jpeg", "png", "gif", "zip", "tar", "gz", "pdf", "jar", "class", "so", "dll", "exe", "ico", "woff", "ttf",
    };
    auto ext = extension_of(path);
    return !ext.empty() && binary.count(lower(ext)) != 0;
}

bool has_nul_prefix(std::span<const std::uint8_t> prefix) noexcept {
    auto probe = prefix.first(std::min<std::size_t>(prefix.size(), 8000));
    return std::find(probe.begin(), probe.end(), std::uint8_t{0}) != probe.end();
}

bool classify_binary(std::span<const std::uint8_t> prefix, std::string_view path) noexcept {
    return has_nul_prefix(prefix) || has_binary_extension(path);
}

std::string_view size_class_name(SizeClass c) noexcept {
    switch (c) {
    case SizeClass::Small: return "Small";
    case SizeClass::Medium: return "Medium";
    case SizeClass::Big: return "Big";
    }
    return "?";
}

SizeClass size_class(std::uint64_t commits, std::uint64_t stars) noexcept {
    if (commits > 100 && stars > 10) return SizeClass::Big;
    if (stars == 0 && commits < 10) return SizeClass::Small;
    return SizeClass::Medium;
}

std::vector<OriginBlob> origin_blobs(std::span<const BlobEvent> timeline,
                                     const std::function<bool(const ObjectId&)>& has_nul,
                                     const std::function<bool(const ObjectId&)>& skip) {
    std::vector<OriginBlob> out;
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        const BlobEvent& e = timeline[i];
        if (i > 0 && timeline[i - 1].blob == e.blob) continue;
        if (skip && skip(e.blob)) continue;
        bool binary = (has_nul && has_nul(e.blob)) || has_binary_extension(e.path);
        out.push_back({e.blob, e.project, e.time, e.path, e.size, binary});
    }
    return out;
}

std::vector<TrendPoint> reuse_ratio_series(std::span<const OriginBlob> origins,
                                           std::span<const ReuseInstance> instances) {
    auto reused = reused_within(instances, std::nullopt);
    std::map<std::int64_t, TrendPoint> by_quarter;  // keyed by quarter start day for ordering
    for (const auto& o : origins) {
        std::int64_t days = o.time >= 0 ? o.time / timeutil::kDay : -((-o.time + timeutil::kDay - 1) / timeutil::kDay);
        auto civil = timeutil::civil_from_days(days);
        std::int64_t key = std::int64_t(civil.year) * 4 + (civil.month - 1) / 3;
        auto& p = by_quarter[key];
        if (p.quarter.empty()) p.quarter = timeutil::quarter_label(o.time);
        ++p.created;
        if (reused.count(o.blob)) ++p.reused;
    }
    std::vector<TrendPoint> out;
    for (auto& [k, p] : by_quarter) {
        p.ratio = static_cast<double>(p.reused) / static_cast<double>(p.created);
        out.push_back(std::move(p));
    }
    return out;
}

std::unordered_set<ObjectId> reused_within(std::span<const ReuseInstance> instances,
                                           std::optional<std::int64_t> window_seconds) {
    std::unordered_set<ObjectId> out;
    for (const auto& r : instances)
        if (!window_seconds || r.dest_time - r.origin_time <= *window_seconds) out.insert(r.blob);
    return out;
}

std::vector<WindowFlag> time_limited_flags(std::span<const OriginBlob> origins,
                                           std::span<const ReuseInstance> instances,
                                           std::optional<std::int64_t> window_seconds, std::int64_t horizon) {
    std::int64_t cutoff = horizon;
    if (window_seconds) {
        cutoff = horizon - *window_seconds;
        if (!origins.empty()) {
            auto first = std::min_element(origins.begin(), origins.end(),
                                          [](const auto& a, const auto& b) { return a.time < b.time; });
            if (cutoff < first->time)
                throw Error(Errc::WindowExceedsCorpusSpan,
                            "horizon - window (" + timeutil::format_iso8601(cutoff) + ") precedes the first creation (" +
                                timeutil::format_iso8601(first->time) + ")");
        }
    }
    auto reused = reused_within(instances, window_seconds);
    std::vector<WindowFlag> out;
    for (const auto& o : origins) {
        if (window_seconds && o.time > cutoff) continue;
        out.push_back({o.blob, reused.count(o.blob) != 0});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.blob < b.blob; });
    return out;
}

std::vector<BlobFeatureRow> blob_features(std::span<const OriginBlob> origins, std::span<const WindowFlag> flags) {
    std::unordered_map<ObjectId, bool> flag_of;
    for (const auto& f : flags) flag_of.emplace(f.blob, f.reused);
    std::vector<BlobFeatureRow> out;
    for (const auto& o : origins) {
        auto it = flag_of.find(o.blob);
        if (it == flag_of.end()) continue;
        BlobFeatureRow row;
        row.blob = o.blob;
        row.origin_project = o.project;
        row.language = o.binary ? Language::Other : classify_language(o.path);
        row.creation_time = o.time;
        row.is_binary = o.binary;
        row.size = o.size;
        row.reused_within_window = it->second;
        out.push_back(std::move(row));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.blob < b.blob; });
    return out;
}

std::vector<PropensityRow> propensity_by_language(std::span<const LabeledOutcome> items) {
    std::array<PropensityRow, kLanguageCount> acc{};
    for (const auto& it : items) {
        auto& row = acc[static_cast<std::size_t>(it.language)];
        ++row.total;
        if (it.reused) ++row.reused;
    }
    std::vector<PropensityRow> out;
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (acc[i].total == 0) continue;
        acc[i].language = static_cast<Language>(i);
        acc[i].ratio = static_cast<double>(acc[i].reused) / static_cast<double>(acc[i].total);
        out.push_back(acc[i]);
    }
    return out;
}

std::map<std::string, RepoMetadata> load_metadata(const std::filesystem::path& path) {
    std::map<std::string, RepoMetadata> out;
    tsv::LineReader reader(path);
    std::string line;
    std::size_t lineno = 0;
    while (reader.next(line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto f = tsv::split(line);
        if (f.size() < 3) throw Error(Errc::ConfigInvalid, path.string() + ":" + std::to_string(lineno) + ": expected repo, stars, forks");
        try {
            out[tsv::unescape(f[0])] = {tsv::parse_u64(f[1]), tsv::parse_u64(f[2])};
        } catch (const Error&) {
            throw Error(Errc::ConfigInvalid, path.string() + ":" + std::to_string(lineno) + ": bad count");
        }
    }
    return out;
}

std::vector<ProjectActivity> project_activity(std::span<const CommitRow> commits, const defork::ClusterMap& clusters,
                                              const std::map<std::string, RepoMetadata>& metadata) {
    struct Acc {
        std::unordered_set<ObjectId> commits;
        std::set<std::string> authors;
        bool any = false;
        std::int64_t first = 0, last = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& c : commits) {
        const std::string& project = clusters.project_of(c.repo);
        Acc& a = acc[project];
        if (!a.commits.insert(c.commit).second) continue;
        a.authors.insert(c.author);
        if (!a.any) {
            a.first = a.last = c.effective_time;
            a.any = true;
        } else {
            a.first = std::min(a.first, c.effective_time);
            a.last = std::max(a.last, c.effective_time);
        }
    }
    std::vector<ProjectActivity> out;
    for (const auto& cluster : clusters.clusters()) {
        ProjectActivity p;
        p.project = cluster.id;
        if (auto it = acc.find(cluster.id); it != acc.end()) {
            p.commits = it->second.commits.size();
            p.authors = it->second.authors.size();
            p.first_commit = it->second.first;
            p.last_commit = it->second.last;
        }
        for (const auto& m : cluster.members)
            if (auto it = metadata.find(m); it != metadata.end()) {
                p.stars = std::max(p.stars, it->second.stars);
                p.forks = std::max(p.forks, it->second.forks);
            }
        out.push_back(std::move(p));
    }
    return out;
}

std::uint64_t activity_months(std::int64_t first, std::int64_t last) noexcept {
    constexpr std::int64_t month = 30 * timeutil::kDay;
    std::int64_t span = std::max<std::int64_t>(0, last - first);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>((span + month - 1) / month));
}

std::vector<ProjectFeatureRow> project_features(std::span<const OriginBlob> origins,
                                                const std::unordered_set<ObjectId>& reused,
                                                std::span<const ProjectActivity> activity) {
    struct Acc {
        std::uint64_t c = 0, bc = 0, cc = 0, cbc = 0;
        std::array<std::uint64_t, kLanguageCount> lang{};
    };
    std::unordered_map<std::string, Acc> acc;
    for (const auto& o : origins) {
        Acc& a = acc[o.project];
        ++a.c;
        bool r = reused.count(o.blob) != 0;
        if (o.binary) ++a.bc;
        if (r) ++a.cc;
        if (r && o.binary) ++a.cbc;
        ++a.lang[static_cast<std::size_t>(classify_language(o.path))];
    }
    std::vector<ProjectFeatureRow> out;
    for (const auto& p : activity) {
        ProjectFeatureRow row;
        row.project = p.project;
        row.n_commits = p.commits;
        row.n_authors = p.authors;
        row.n_forks = p.forks;
        row.n_stars = p.stars;
        row.earliest_commit_time = p.first_commit;
        row.activity_months = p.commits > 0 ? activity_months(p.first_commit, p.last_commit) : 0;
        if (auto it = acc.find(p.project); it != acc.end()) {
            const Acc& a = it->second;
            row.n_blobs = a.c;
            row.n_binary = a.bc;
            row.n_reused = a.cc;
            row.n_binary_reused = a.cbc;
            row.binary_ratio = a.c ? static_cast<double>(a.bc) / static_cast<double>(a.c) : 0.0;
            row.has_reused_origin = a.cc > 0;
            std::uint64_t best = 0;
            for (Language l : languages_by_name()) {
                std::uint64_t n = a.lang[static_cast<std::size_t>(l)];
                if (n > best) {
                    best = n;
                    row.dominant_language = l;
                }
            }
        }
        out.push_back(std::move(row));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.project < b.project; });
    return out;
}

std::vector<PropensityRow> propensity_blob_mode(std::span<const BlobFeatureRow> rows) {
    std::vector<LabeledOutcome> items;
    items.reserve(rows.size());
    for (const auto& r : rows) items.push_back({r.language, r.reused_within_window});
    return propensity_by_language(items);
}

std::vector<PropensityRow> propensity_project_mode(std::span<const BlobFeatureRow> rows,
                                                   std::span<const ProjectFeatureRow> projects) {
    std::unordered_map<std::string, Language> dominant;
    for (const auto& p : projects) dominant.emplace(p.project, p.dominant_language);
    std::vector<LabeledOutcome> items;
    items.reserve(rows.size());
    for (const auto& r : rows) {
        auto it = dominant.find(r.origin_project);
        items.push_back({it == dominant.end() ? Language::Other : it->second, r.reused_within_window});
    }
    return propensity_by_language(items);
}

std::vector<PropensityRow> propensity_project_share(std::span<const ProjectFeatureRow> projects) {
    std::vector<LabeledOutcome> items;
    for (const auto& p : projects)
        if (p.n_blobs > 0) items.push_back({p.dominant_language, p.has_reused_origin});
    return propensity_by_language(items);
}

ContingencyTable contingency_table(std::span<const ReuseInstance> instances,
                                   const std::function<SizeClass(const std::string&)>& class_of) {
    std::unordered_map<ObjectId, std::pair<SizeClass, SizeClass>> per_blob;
    for (const auto& r : instances) {
        SizeClass dest = class_of(r.dest_project);
        auto [it, fresh] = per_blob.try_emplace(r.blob, class_of(r.origin_project), dest);
        if (!fresh) it->second.second = std::max(it->second.second, dest);
    }
    ContingencyTable table{};
    for (const auto& [blob, cell] : per_blob)
        ++table[static_cast<std::size_t>(cell.first)][static_cast<std::size_t>(cell.second)];
    return table;
}

NormalizedBinaryMetric normalized_binary_metric(std::uint64_t cbc, std::uint64_t cc, std::uint64_t bc,
                                                std::uint64_t c) {
    if (cc == 0 || bc == 0 || c == 0) throw Error(Errc::Undefined, "normalized binary metric needs cc > 0 and bc > 0");
    NormalizedBinaryMetric out{cbc, cc, bc, c, 0, 0, 0};
    out.cbr = static_cast<double>(cbc) / static_cast<double>(cc);
    out.br = static_cast<double>(bc) / static_cast<double>(c);
    out.m = out.cbr / out.br;
    return out;
}

NormalizedBinaryMetric normalized_binary_metric(const ProjectFeatureRow& row) {
    return normalized_binary_metric(row.n_binary_reused, row.n_reused, row.n_binary, row.n_blobs);
}

}  // namespace copytrace::metrics
