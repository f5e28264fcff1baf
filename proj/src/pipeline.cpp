#include "copytrace/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "copytrace/codec.hpp"
#include "copytrace/error.hpp"
#include "copytrace/extract.hpp"
#include "copytrace/gitstore.hpp"
#include "copytrace/timeline.hpp"
#include "copytrace/timeutil.hpp"
#include "copytrace/tsv.hpp"

namespace copytrace::pipeline {

using json = nlohmann::json;

namespace {

constexpr double kSecondsPerYear = 365.25 * 86400.0;

std::uint64_t to_u64(std::string_view key, std::string_view value) {
    try {
        return tsv::parse_u64(value);
    } catch (const Error&) {
        throw Error(Errc::ConfigInvalid, std::string(key) + ": expected a non-negative integer, got '" +
                                             std::string(value) + "'");
    }
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

std::string file_digest(const fs::path& path) { return sha1(tsv::read_file(path)).hex(); }

/// Runs f(i) for i in [0, n) on up to `jobs` threads. The exception of the lowest
/// failing index is rethrown, so failures are reported deterministically.
template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

class SyncLog {
public:
    explicit SyncLog(const Logger& log) : log_(log) {}
    void operator()(const std::string& msg) {
        if (!log_) return;
        std::lock_guard lock(mu_);
        log_(msg);
    }

private:
    const Logger& log_;
    std::mutex mu_;
};

void write_json(const fs::path& path, const json& j) { tsv::write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    try {
        return json::parse(tsv::read_file(path));
    } catch (const json::exception& e) {
        throw Error(Errc::IoError, path.string() + ": " + e.what());
    }
}

fs::path require(const fs::path& path, std::string_view stage) {
    if (!fs::exists(path))
        throw Error(Errc::MissingStageOutput, path.string() + " not found; run `" + std::string(stage) + "` first");
    return path;
}

struct RepoInput {
    std::string id;
    fs::path path;
};

std::vector<RepoInput> discover_repos(const std::vector<fs::path>& roots) {
    std::vector<RepoInput> repos;
    for (const auto& root : roots) {
        std::error_code ec;
        if (!fs::is_directory(root, ec)) throw Error(Errc::IoError, "corpus root " + root.string() + " is not a directory");
        std::vector<RepoInput> found;
        for (const auto& entry : fs::directory_iterator(root, ec)) {
            std::string name = entry.path().filename().string();
            if (name.empty() || name[0] == '.') continue;
            if (!entry.is_directory(ec)) continue;
            found.push_back({name, entry.path()});
        }
        if (ec) throw Error(Errc::IoError, "cannot list " + root.string() + ": " + ec.message());
        std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        repos.insert(repos.end(), found.begin(), found.end());
    }
    std::vector<std::string> ids;
    for (const auto& r : repos) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
        throw Error(Errc::ConfigInvalid, "repository id '" + *dup + "' occurs in more than one corpus root");
    return repos;
}

std::string refs_digest(const git::ObjectStore& store) {
    Sha1 h;
    for (const auto& r : store.refs()) h.update(r.name + " " + r.target.hex() + "\n");
    return h.finish().hex();
}

std::vector<metrics::CommitRow> read_commit_rows(const fs::path& path) {
    std::vector<metrics::CommitRow> rows;
    tsv::LineReader reader(path);
    std::string line;
    std::vector<std::string_view> f;
    while (reader.next(line)) {
        if (line.empty()) continue;
        tsv::split(line, f);
        if (f.size() != 6) throw Error(Errc::IoError, path.string() + ": expected 6 fields");
        metrics::CommitRow row;
        row.repo = tsv::unescape(f[0]);
        row.commit = ObjectId::from_hex(f[1]);
        row.raw_time = tsv::parse_i64(f[2]);
        row.effective_time = tsv::parse_i64(f[3]);
        row.repaired = f[4] == "1";
        row.author = tsv::unescape(f[5]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::unordered_map<ObjectId, bool> read_blob_nul(const fs::path& path) {
    std::unordered_map<ObjectId, bool> out;
    tsv::LineReader reader(path);
    std::string line;
    std::vector<std::string_view> f;
    while (reader.next(line)) {
        if (line.empty()) continue;
        tsv::split(line, f);
        if (f.size() != 3) throw Error(Errc::IoError, path.string() + ": expected 3 fields");
        out[ObjectId::from_hex(f[0])] = f[2] == "1";
    }
    return out;
}

timeline::Denylist load_denylist(const RunConfig& config) {
    timeline::Denylist d;
    if (config.denylist) d.load(*config.denylist);
    return d;
}

unsigned scanned_shards(const RunConfig& config) {
    json m = read_json(require(scan_dir(config) / "manifest.json", "scan"));
    return m.at("shards").get<unsigned>();
}

double years(std::int64_t t) { return static_cast<double>(t) / kSecondsPerYear; }

std::vector<std::string> language_levels() {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < metrics::kLanguageCount; ++i)
        out.emplace_back(metrics::language_name(static_cast<metrics::Language>(i)));
    return out;
}

Table<ModelReport> fit_model(stats::DesignMatrix x, const std::vector<double>& y, std::string_view label,
                             std::vector<std::string>& warnings) {
    Table<ModelReport> out;
    try {
        if (y.empty()) throw Error(Errc::InsufficientData, "no rows");
        ModelReport report;
        report.dropped = x.drop_constant_columns();
        for (const auto& d : report.dropped) warnings.push_back(std::string(label) + ": dropped constant column " + d);
        std::vector<std::string> terms;
        for (const auto& t : x.terms())
            if (t != "(Intercept)") terms.push_back(t);
        report.fit = stats::fit_logistic(x, y);
        if (report.fit.separation) warnings.push_back(std::string(label) + ": Separation: coefficients diverge");
        report.anova = stats::anova_sequential(x, y, terms);
        out.value = std::move(report);
    } catch (const Error& e) {
        out.error = e.code() == Errc::InsufficientData ? e.what() : "InsufficientData: " + std::string(e.what());
        warnings.push_back(std::string(label) + ": " + out.error);
    }
    return out;
}

Table<ModelReport> blob_model(const std::vector<metrics::BlobFeatureRow>& rows, std::vector<std::string>& warnings) {
    std::vector<double> y, binary, time;
    std::vector<std::string> lang;
    for (const auto& r : rows) {
        y.push_back(r.reused_within_window ? 1.0 : 0.0);
        binary.push_back(r.is_binary ? 1.0 : 0.0);
        time.push_back(years(r.creation_time));
        lang.emplace_back(metrics::language_name(r.language));
    }
    stats::DesignMatrix x(rows.size());
    x.add_intercept();
    x.add_numeric("Binary", binary);
    x.add_numeric("CreationTime", time);
    x.add_factor("Language", lang, language_levels(), "Other");
    return fit_model(std::move(x), y, "blob model", warnings);
}

std::vector<const metrics::ProjectFeatureRow*> modeled_projects(const std::vector<metrics::ProjectFeatureRow>& rows) {
    std::vector<const metrics::ProjectFeatureRow*> out;
    for (const auto& r : rows)
        if (r.n_blobs > 0 && r.n_commits > 0) out.push_back(&r);
    return out;
}

Table<ModelReport> project_model(const std::vector<metrics::ProjectFeatureRow>& all, std::vector<std::string>& warnings) {
    auto rows = modeled_projects(all);
    std::vector<double> y, blobs, ratio, authors, forks, stars, time, activity;
    std::vector<std::string> lang;
    for (const auto* r : rows) {
        y.push_back(r->has_reused_origin ? 1.0 : 0.0);
        blobs.push_back(std::log1p(static_cast<double>(r->n_blobs)));
        ratio.push_back(r->binary_ratio);
        authors.push_back(std::log1p(static_cast<double>(r->n_authors)));
        forks.push_back(std::log1p(static_cast<double>(r->n_forks)));
        stars.push_back(std::log1p(static_cast<double>(r->n_stars)));
        time.push_back(years(r->earliest_commit_time));
        activity.push_back(std::log1p(static_cast<double>(r->activity_months)));
        lang.emplace_back(metrics::language_name(r->dominant_language));
    }
    stats::DesignMatrix x(rows.size());
    x.add_intercept();
    x.add_numeric("Blobs", blobs);
    x.add_numeric("BinaryRatio", ratio);
    x.add_numeric("Authors", authors);
    x.add_numeric("Forks", forks);
    x.add_numeric("Stars", stars);
    x.add_numeric("Time", time);
    x.add_numeric("Activity", activity);
    x.add_factor("Language", lang, language_levels(), "Other");
    return fit_model(std::move(x), y, "project model", warnings);
}

Table<SpearmanMatrix> spearman_matrix(const std::vector<metrics::ProjectFeatureRow>& all,
                                      std::vector<std::string>& warnings) {
    auto rows = modeled_projects(all);
    Table<SpearmanMatrix> out;
    if (rows.size() < 2) {
        out.error = "InsufficientData: fewer than 2 projects";
        warnings.push_back("spearman: " + out.error);
        return out;
    }
    SpearmanMatrix m;
    m.names = {"Blobs", "Binary", "Commits", "Authors", "Forks", "Stars", "Time", "Activity"};
    std::vector<std::vector<double>> cols(m.names.size());
    for (const auto* r : rows) {
        cols[0].push_back(static_cast<double>(r->n_blobs));
        cols[1].push_back(r->binary_ratio);
        cols[2].push_back(static_cast<double>(r->n_commits));
        cols[3].push_back(static_cast<double>(r->n_authors));
        cols[4].push_back(static_cast<double>(r->n_forks));
        cols[5].push_back(static_cast<double>(r->n_stars));
        cols[6].push_back(static_cast<double>(r->earliest_commit_time));
        cols[7].push_back(static_cast<double>(r->activity_months));
    }
    m.rho.assign(cols.size(), std::vector<double>(cols.size(), std::nan("")));
    for (std::size_t i = 0; i < cols.size(); ++i)
        for (std::size_t j = i; j < cols.size(); ++j) {
            try {
                double r = stats::spearman(cols[i], cols[j]);
                m.rho[i][j] = m.rho[j][i] = r;
            } catch (const Error&) {
            }
        }
    out.value = std::move(m);
    return out;
}

std::vector<SizeTest> size_tests(const std::vector<metrics::BlobFeatureRow>& rows, std::vector<std::string>& warnings) {
    std::vector<SizeTest> out;
    auto run = [&](const std::string& group, std::optional<metrics::Language> lang) {
        std::vector<double> reused, other;
        for (const auto& r : rows) {
            if (r.is_binary || (lang && r.language != *lang)) continue;
            (r.reused_within_window ? reused : other).push_back(static_cast<double>(r.size));
        }
        try {
            out.push_back({group, stats::welch_t(reused, other)});
        } catch (const Error& e) {
            if (!lang) warnings.push_back("size t-test: InsufficientData: " + std::string(e.what()));
        }
    };
    run("All", std::nullopt);
    for (std::size_t i = 0; i < metrics::kLanguageCount; ++i) {
        auto lang = static_cast<metrics::Language>(i);
        if (lang == metrics::Language::Other) continue;
        run(std::string(metrics::language_name(lang)), lang);
    }
    return out;
}

std::string fmt(double v) { return tsv::format_double(v); }

std::string model_csv(const ModelReport& m) {
    std::string s = "term,estimate,std_error,z_value,p_value,odds_ratio\n";
    const auto& f = m.fit;
    for (std::size_t i = 0; i < f.names.size(); ++i)
        s += csv_field(f.names[i]) + "," + fmt(f.coefficients[i]) + "," + fmt(f.std_errors[i]) + "," +
             fmt(f.z_values[i]) + "," + fmt(f.p_values[i]) + "," + fmt(f.odds_ratios[i]) + "\n";
    return s;
}

std::string anova_csv(const ModelReport& m) {
    std::string s = "term,df,deviance,resid_df,resid_deviance,p_value\n";
    for (const auto& r : m.anova)
        s += csv_field(r.term) + "," + std::to_string(r.df) + "," + fmt(r.deviance) + "," + std::to_string(r.resid_df) +
             "," + fmt(r.resid_deviance) + "," + fmt(r.p_value) + "\n";
    return s;
}

json model_json(const Table<ModelReport>& t) {
    if (!t.value) return json{{"error", t.error}};
    const auto& f = t.value->fit;
    json coef = json::object();
    for (std::size_t i = 0; i < f.names.size(); ++i)
        coef[f.names[i]] = {{"estimate", f.coefficients[i]}, {"std_error", f.std_errors[i]}, {"z_value", f.z_values[i]},
                            {"p_value", f.p_values[i]},      {"odds_ratio", f.odds_ratios[i]}};
    json anova = json::array();
    for (const auto& r : t.value->anova)
        anova.push_back({{"term", r.term}, {"df", r.df}, {"deviance", r.deviance}, {"resid_df", r.resid_df},
                         {"resid_deviance", r.resid_deviance}, {"p_value", r.p_value}});
    return json{{"coefficients", coef},
                {"null_deviance", f.null_deviance},
                {"residual_deviance", f.residual_deviance},
                {"n", f.n},
                {"iterations", f.iterations},
                {"converged", f.converged},
                {"separation", f.separation},
                {"dropped_columns", t.value->dropped},
                {"anova", anova}};
}

std::string propensity_rows(std::string_view mode, const std::vector<metrics::PropensityRow>& rows) {
    std::string s;
    for (const auto& r : rows)
        s += std::string(mode) + "," + std::string(metrics::language_name(r.language)) + "," + std::to_string(r.total) +
             "," + std::to_string(r.reused) + "," + fmt(r.ratio) + "\n";
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::set(std::string_view key_in, std::string_view value_in) {
    std::string key = trim(key_in), value = trim(value_in);
    for (auto& c : key)
        if (c == '-') c = '_';
    auto time_of = [&](std::string_view v) {
        try {
            return timeutil::parse_iso8601(v);
        } catch (const Error& e) {
            throw Error(Errc::ConfigInvalid, key + ": " + e.detail());
        }
    };
    if (key == "corpus")
        corpora.emplace_back(value);
    else if (key == "out")
        out = value;
    else if (key == "shards")
        shards = static_cast<unsigned>(to_u64(key, value));
    else if (key == "window_days")
        window_days = static_cast<std::int64_t>(to_u64(key, value));
    else if (key == "floor")
        floor = time_of(value);
    else if (key == "horizon")
        horizon = time_of(value);
    else if (key == "denylist")
        denylist = value.empty() ? std::nullopt : std::optional<fs::path>(value);
    else if (key == "metadata")
        metadata = value.empty() ? std::nullopt : std::optional<fs::path>(value);
    else if (key == "jobs")
        jobs = static_cast<unsigned>(to_u64(key, value));
    else if (key == "seed")
        seed = to_u64(key, value);
    else if (key == "defork_threshold")
        defork_threshold = to_u64(key, value);
    else if (key == "sort_run_rows")
        sort_run_rows = to_u64(key, value);
    else if (key == "spill_dir")
        spill_dir = value.empty() ? std::nullopt : std::optional<fs::path>(value);
    else
        throw Error(Errc::ConfigInvalid, "unknown setting '" + key + "'");
}

void RunConfig::load(const fs::path& path) {
    if (!fs::exists(path)) throw Error(Errc::ConfigInvalid, "config file " + path.string() + " not found");
    tsv::LineReader reader(path);
    std::string line;
    std::size_t lineno = 0;
    while (reader.next(line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::ConfigInvalid, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        set(std::string_view(t).substr(0, eq), std::string_view(t).substr(eq + 1));
    }
}

void RunConfig::validate() const {
    timeline::validate_shard_count(shards);
    if (window_days < 0) throw Error(Errc::ConfigInvalid, "window_days must be non-negative");
    if (horizon && floor >= *horizon) throw Error(Errc::ConfigInvalid, "floor must precede horizon");
    if (defork_threshold == 0) throw Error(Errc::ConfigInvalid, "defork_threshold must be at least 1");
    if (out.empty()) throw Error(Errc::ConfigInvalid, "output directory not set");
    if (denylist && !fs::exists(*denylist)) throw Error(Errc::ConfigInvalid, "denylist " + denylist->string() + " not found");
    if (metadata && !fs::exists(*metadata)) throw Error(Errc::ConfigInvalid, "metadata " + metadata->string() + " not found");
}

std::string RunConfig::canonical() const {
    std::string s;
    for (const auto& c : corpora) s += "corpus=" + c.string() + "\n";
    s += "shards=" + std::to_string(shards) + "\n";
    s += "window_days=" + std::to_string(window_days) + "\n";
    s += "floor=@" + std::to_string(floor) + "\n";
    if (horizon) s += "horizon=@" + std::to_string(*horizon) + "\n";
    if (denylist) s += "denylist=" + denylist->string() + "\n";
    if (metadata) s += "metadata=" + metadata->string() + "\n";
    s += "seed=" + std::to_string(seed) + "\n";
    s += "defork_threshold=" + std::to_string(defork_threshold) + "\n";
    return s;
}

std::string RunConfig::hash() const { return sha1(canonical()).hex(); }

std::optional<std::int64_t> RunConfig::window_seconds() const {
    if (window_days == 0) return std::nullopt;
    return window_days * timeutil::kDay;
}

unsigned RunConfig::effective_jobs() const {
    if (jobs) return jobs;
    return std::max(1u, std::thread::hardware_concurrency());
}

fs::path RunConfig::effective_spill_dir() const {
    if (spill_dir) return *spill_dir;
    if (const char* env = std::getenv("COPYTRACE_TMP"); env && *env) return env;
    return out / "tmp";
}

fs::path scan_dir(const RunConfig& config) { return config.out / "scan"; }
fs::path reuse_dir(const RunConfig& config) { return config.out / "reuse"; }
fs::path report_dir(const RunConfig& config) { return config.out / "report"; }

// ---------------------------------------------------------------------------
// scan

StageResult cmd_scan(RunConfig config, const Logger& log) {
    config.validate();
    if (!config.horizon) {
        auto now = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch());
        config.horizon = now.count() + timeutil::kDay;
        if (config.floor >= *config.horizon) throw Error(Errc::ConfigInvalid, "floor must precede horizon");
    }
    SyncLog say(log);
    auto repos = discover_repos(config.corpora);
    say("scan: " + std::to_string(repos.size()) + " repositories");

    fs::path dir = scan_dir(config);
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::vector<extract::RepoHistory> histories(repos.size());
    std::vector<std::string> digests(repos.size());
    std::atomic<std::size_t> done{0};
    parallel_for(repos.size(), config.effective_jobs(), [&](std::size_t i) {
        const auto& repo = repos[i];
        try {
            auto store = git::open_store(repo.path);
            digests[i] = refs_digest(store);
            histories[i] = extract::extract_blob_creations(store, repo.id, config.floor, *config.horizon);
        } catch (const Error& e) {
            throw Error(e.code(), "repository '" + repo.id + "' (" + repo.path.string() + "): " + e.detail());
        } catch (const std::exception& e) {
            throw Error(Errc::IoError, "repository '" + repo.id + "' (" + repo.path.string() + "): " + e.what());
        }
        std::size_t n = ++done;
        if (n % 100 == 0 || n == repos.size()) say("scan: extracted " + std::to_string(n) + "/" + std::to_string(repos.size()));
    });

    std::vector<defork::RepoCommits> rc;
    rc.reserve(repos.size());
    for (const auto& h : histories) {
        defork::RepoCommits r{h.repo, {}};
        for (const auto& c : h.commits) r.commits.push_back(c.id);
        rc.push_back(std::move(r));
    }
    auto clusters = defork::build_clusters(rc, config.defork_threshold);
    rc.clear();
    tsv::write_file(dir / "p2P.tsv", clusters.to_tsv());
    say("scan: " + std::to_string(clusters.clusters().size()) + " projects");

    std::uint64_t commits = 0, repaired = 0, events = 0;
    {
        tsv::FileWriter w(dir / "commits.tsv");
        std::string buf;
        for (const auto& h : histories)
            for (const auto& c : h.commits) {
                extract::append_commit_tsv(buf, h.repo, c);
                ++commits;
                repaired += c.repaired ? 1 : 0;
                if (buf.size() > (1u << 20)) {
                    w.write(buf);
                    buf.clear();
                }
            }
        w.write(buf);
        w.close();
    }
    std::map<ObjectId, extract::BlobInfo> blobs;
    for (const auto& h : histories)
        for (const auto& b : h.blobs) blobs.emplace(b.blob, b);
    {
        tsv::FileWriter w(dir / "blobs.tsv");
        std::string buf;
        for (const auto& [id, b] : blobs) {
            id.append_hex(buf);
            buf += "\t" + std::to_string(b.size) + "\t" + (b.has_nul ? "1" : "0") + "\n";
            if (buf.size() > (1u << 20)) {
                w.write(buf);
                buf.clear();
            }
        }
        w.write(buf);
        w.close();
    }
    timeline::ShardWriter shards(dir, config.shards, "events");
    for (const auto& h : histories) {
        extract::emit_events(h.creations, clusters, [&](const BlobEvent& e) { shards.write(e); });
        events += h.creations.size();
    }
    shards.close();

    tsv::write_file(dir / "config.txt", config.canonical());
    json inputs = json::object();
    for (std::size_t i = 0; i < repos.size(); ++i) inputs[repos[i].id] = digests[i];
    json manifest = {{"stage", "scan"},
                     {"config_hash", config.hash()},
                     {"floor", config.floor},
                     {"horizon", *config.horizon},
                     {"repos", repos.size()},
                     {"projects", clusters.clusters().size()},
                     {"commits", commits},
                     {"repaired_commits", repaired},
                     {"events", events},
                     {"blobs", blobs.size()},
                     {"shards", config.shards},
                     {"shard_rows", shards.row_counts()},
                     {"inputs", inputs}};
    write_json(dir / "manifest.json", manifest);
    say("scan: " + std::to_string(events) + " creation events in " + std::to_string(config.shards) + " shards");
    return {};
}

// ---------------------------------------------------------------------------
// reuse

StageResult cmd_reuse(const RunConfig& config, const Logger& log) {
    config.validate();
    SyncLog say(log);
    fs::path in = scan_dir(config);
    unsigned n = scanned_shards(config);
    auto denylist = load_denylist(config);

    fs::path dir = reuse_dir(config);
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::path spill = config.effective_spill_dir();

    std::vector<std::uint64_t> b2tp_rows(n), instances(n);
    parallel_for(n, config.effective_jobs(), [&](std::size_t k) {
        unsigned shard = static_cast<unsigned>(k);
        fs::path src = require(timeline::shard_path(in, "events", shard), "scan");
        tsv::FileWriter b2tp(timeline::shard_path(dir, "b2tP", shard), static_cast<int>(Errc::ShardIOFailure));
        tsv::FileWriter reuse(timeline::shard_path(dir, "reuse", shard), static_cast<int>(Errc::ShardIOFailure));
        std::string b2tp_buf, reuse_buf;
        timeline::ReuseDeriver deriver(denylist, [&](const ReuseInstance& r) {
            append_instance_tsv(reuse_buf, r);
            ++instances[k];
            if (reuse_buf.size() > (1u << 20)) {
                reuse.write(reuse_buf);
                reuse_buf.clear();
            }
        });
        timeline::FirstPerProject dedupe([&](const BlobEvent& e) {
            append_event_tsv(b2tp_buf, e);
            ++b2tp_rows[k];
            if (b2tp_buf.size() > (1u << 20)) {
                b2tp.write(b2tp_buf);
                b2tp_buf.clear();
            }
            deriver.push(e);
        });
        timeline::SortOptions opts;
        opts.run_rows = config.sort_run_rows;
        opts.spill_dir = spill / ("shard-" + std::to_string(shard));
        timeline::sort_shard(src, opts, [&](const BlobEvent& e) { dedupe.push(e); });
        deriver.finish();
        b2tp.write(b2tp_buf);
        reuse.write(reuse_buf);
        b2tp.close();
        reuse.close();
        std::error_code ec;
        fs::remove(opts.spill_dir, ec);
    });
    std::error_code ec;
    if (!config.spill_dir && !std::getenv("COPYTRACE_TMP")) fs::remove_all(spill, ec);

    std::uint64_t total = 0;
    for (auto v : instances) total += v;
    json manifest = {{"stage", "reuse"},
                     {"config_hash", config.hash()},
                     {"scan_manifest", file_digest(in / "manifest.json")},
                     {"denylist", config.denylist ? json(file_digest(*config.denylist)) : json(nullptr)},
                     {"denylist_size", denylist.size()},
                     {"shards", n},
                     {"b2tP_rows", b2tp_rows},
                     {"instance_rows", instances},
                     {"instances", total}};
    write_json(dir / "manifest.json", manifest);
    say("reuse: " + std::to_string(total) + " reuse instances");
    return {};
}

// ---------------------------------------------------------------------------
// report

ReportTables compute_report(const RunConfig& config) {
    config.validate();
    require(reuse_dir(config) / "manifest.json", "reuse");
    fs::path scan = scan_dir(config), reuse = reuse_dir(config);
    RunConfig scanned;
    scanned.load(require(scan / "config.txt", "scan"));
    unsigned n = scanned_shards(config);

    ReportTables t;
    t.horizon = *scanned.horizon;
    t.window_seconds = config.window_seconds();
    t.clusters = defork::ClusterMap::from_tsv(require(scan / "p2P.tsv", "scan"));
    auto commits = read_commit_rows(require(scan / "commits.tsv", "scan"));
    auto nul = read_blob_nul(require(scan / "blobs.tsv", "scan"));
    std::map<std::string, metrics::RepoMetadata> meta;
    if (config.metadata) meta = metrics::load_metadata(*config.metadata);
    auto denylist = load_denylist(config);

    std::vector<BlobEvent> b2tp;
    for (unsigned k = 0; k < n; ++k) {
        timeline::read_events(require(timeline::shard_path(reuse, "b2tP", k), "reuse"),
                              [&](const BlobEvent& e) { b2tp.push_back(e); });
        auto inst = timeline::read_instances(require(timeline::shard_path(reuse, "reuse", k), "reuse"));
        t.instances.insert(t.instances.end(), inst.begin(), inst.end());
    }
    t.origins = metrics::origin_blobs(
        b2tp,
        [&](const ObjectId& id) {
            auto it = nul.find(id);
            return it != nul.end() && it->second;
        },
        [&](const ObjectId& id) { return denylist.contains(id); });
    std::sort(t.origins.begin(), t.origins.end(), [](const auto& a, const auto& b) { return a.blob < b.blob; });
    b2tp.clear();
    b2tp.shrink_to_fit();

    t.trends = metrics::reuse_ratio_series(t.origins, t.instances);
    try {
        t.flags.value = metrics::time_limited_flags(t.origins, t.instances, t.window_seconds, t.horizon);
    } catch (const Error& e) {
        t.flags.error = e.what();
        t.warnings.push_back("window flags: " + t.flags.error);
    }
    if (t.flags.value) t.blob_rows = metrics::blob_features(t.origins, *t.flags.value);

    auto activity = metrics::project_activity(commits, t.clusters, meta);
    auto reused = metrics::reused_within(t.instances, t.window_seconds);
    t.project_rows = metrics::project_features(t.origins, reused, activity);
    t.propensity_blob = metrics::propensity_blob_mode(t.blob_rows);
    t.propensity_project = metrics::propensity_project_mode(t.blob_rows, t.project_rows);
    t.propensity_project_share = metrics::propensity_project_share(t.project_rows);

    std::unordered_map<std::string, metrics::SizeClass> class_of;
    for (const auto& p : t.project_rows) class_of[p.project] = metrics::size_class(p.n_commits, p.n_stars);
    t.contingency = metrics::contingency_table(t.instances, [&](const std::string& p) { return class_of.at(p); });
    for (const auto& p : t.project_rows) {
        try {
            t.binary_metric[p.project] = metrics::normalized_binary_metric(p);
        } catch (const Error&) {
        }
    }

    t.blob_model = blob_model(t.blob_rows, t.warnings);
    t.project_model = project_model(t.project_rows, t.warnings);
    t.spearman = spearman_matrix(t.project_rows, t.warnings);
    t.size_tests = size_tests(t.blob_rows, t.warnings);
    return t;
}

std::string csv_field(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string s = "\"";
    for (char c : field) {
        if (c == '"') s.push_back('"');
        s.push_back(c);
    }
    s.push_back('"');
    return s;
}

std::string contingency_csv(const metrics::ContingencyTable& table) {
    std::string s = "origin_class,Small,Medium,Big\n";
    for (std::size_t i = 0; i < 3; ++i) {
        s += metrics::size_class_name(static_cast<metrics::SizeClass>(i));
        for (std::size_t j = 0; j < 3; ++j) s += "," + std::to_string(table[i][j]);
        s += "\n";
    }
    return s;
}

std::string trend_svg(const std::vector<metrics::TrendPoint>& trends) {
    constexpr double width = 720, height = 360, left = 60, right = 20, top = 30, bottom = 50;
    double plot_w = width - left - right, plot_h = height - top - bottom;
    double ymax = 0;
    for (const auto& p : trends) ymax = std::max(ymax, p.ratio);
    ymax = ymax > 0 ? std::ceil(ymax * 10.0) / 10.0 : 1.0;

    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    std::string points;
    for (std::size_t i = 0; i < trends.size(); ++i) {
        double x = trends.size() == 1 ? left + plot_w / 2
                                      : left + plot_w * static_cast<double>(i) / static_cast<double>(trends.size() - 1);
        double y = top + plot_h * (1.0 - trends[i].ratio / ymax);
        if (!points.empty()) points += " ";
        points += num(x) + "," + num(y);
    }
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"360\" viewBox=\"0 0 720 360\">\n";
    s += "  <title>Quarterly reuse ratio</title>\n";
    s += "  <rect x=\"0\" y=\"0\" width=\"720\" height=\"360\" fill=\"white\"/>\n";
    s += "  <line x1=\"" + num(left) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" + num(left + plot_w) + "\" y2=\"" +
         num(top + plot_h) + "\" stroke=\"black\"/>\n";
    s += "  <line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" + num(top + plot_h) +
         "\" stroke=\"black\"/>\n";
    s += "  <text x=\"" + num(left - 8) + "\" y=\"" + num(top + 4) + "\" font-size=\"11\" text-anchor=\"end\">" +
         num(ymax) + "</text>\n";
    s += "  <text x=\"" + num(left - 8) + "\" y=\"" + num(top + plot_h + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">0.00</text>\n";
    if (!trends.empty()) {
        s += "  <text x=\"" + num(left) + "\" y=\"" + num(height - bottom + 20) + "\" font-size=\"11\">" +
             trends.front().quarter + "</text>\n";
        s += "  <text x=\"" + num(left + plot_w) + "\" y=\"" + num(height - bottom + 20) +
             "\" font-size=\"11\" text-anchor=\"end\">" + trends.back().quarter + "</text>\n";
    }
    s += "  <text x=\"" + num(width / 2) + "\" y=\"" + num(height - 10) +
         "\" font-size=\"12\" text-anchor=\"middle\">quarter of creation</text>\n";
    s += "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    s += "</svg>\n";
    return s;
}

StageResult cmd_report(const RunConfig& config, const Logger& log) {
    SyncLog say(log);
    ReportTables t = compute_report(config);
    fs::path dir = report_dir(config);
    fs::remove_all(dir);
    fs::create_directories(dir);

    {
        std::string s = "quarter,created,reused,ratio\n";
        for (const auto& p : t.trends)
            s += p.quarter + "," + std::to_string(p.created) + "," + std::to_string(p.reused) + "," + fmt(p.ratio) + "\n";
        tsv::write_file(dir / "trends.csv", s);
    }
    tsv::write_file(dir / "propensity.csv", "mode,language,total,reused,ratio\n" +
                                                propensity_rows("blob", t.propensity_blob) +
                                                propensity_rows("project", t.propensity_project) +
                                                propensity_rows("project_share", t.propensity_project_share));
    tsv::write_file(dir / "contingency.csv", contingency_csv(t.contingency));
    {
        std::string s =
            "project,n_blobs,n_binary,n_reused,n_binary_reused,binary_ratio,n_commits,n_authors,n_forks,n_stars,"
            "earliest_commit_time,activity_months,dominant_language,has_reused_origin,size_class\n";
        for (const auto& p : t.project_rows)
            s += csv_field(p.project) + "," + std::to_string(p.n_blobs) + "," + std::to_string(p.n_binary) + "," +
                 std::to_string(p.n_reused) + "," + std::to_string(p.n_binary_reused) + "," + fmt(p.binary_ratio) + "," +
                 std::to_string(p.n_commits) + "," + std::to_string(p.n_authors) + "," + std::to_string(p.n_forks) + "," +
                 std::to_string(p.n_stars) + "," + std::to_string(p.earliest_commit_time) + "," +
                 std::to_string(p.activity_months) + "," + std::string(metrics::language_name(p.dominant_language)) +
                 "," + (p.has_reused_origin ? "1" : "0") + "," +
                 std::string(metrics::size_class_name(metrics::size_class(p.n_commits, p.n_stars))) + "\n";
        tsv::write_file(dir / "project_features.csv", s);
    }
    {
        std::string s = "blob,origin_project,language,creation_time,is_binary,size,reused_within_window\n";
        for (const auto& r : t.blob_rows)
            s += r.blob.hex() + "," + csv_field(r.origin_project) + "," + std::string(metrics::language_name(r.language)) +
                 "," + std::to_string(r.creation_time) + "," + (r.is_binary ? "1" : "0") + "," + std::to_string(r.size) +
                 "," + (r.reused_within_window ? "1" : "0") + "\n";
        tsv::write_file(dir / "blob_features.csv", s);
    }
    {
        std::string s = "project,cbc,cc,bc,c,cbr,br,m\n";
        for (const auto& [p, m] : t.binary_metric)
            s += csv_field(p) + "," + std::to_string(m.cbc) + "," + std::to_string(m.cc) + "," + std::to_string(m.bc) +
                 "," + std::to_string(m.c) + "," + fmt(m.cbr) + "," + fmt(m.br) + "," + fmt(m.m) + "\n";
        tsv::write_file(dir / "binary_metric.csv", s);
    }
    if (t.blob_model.value) {
        tsv::write_file(dir / "blob_model.csv", model_csv(*t.blob_model.value));
        tsv::write_file(dir / "blob_anova.csv", anova_csv(*t.blob_model.value));
    }
    if (t.project_model.value) {
        tsv::write_file(dir / "project_model.csv", model_csv(*t.project_model.value));
        tsv::write_file(dir / "project_anova.csv", anova_csv(*t.project_model.value));
    }
    json spearman;
    if (t.spearman.value) {
        const auto& m = *t.spearman.value;
        std::string s = "variable";
        for (const auto& name : m.names) s += "," + name;
        s += "\n";
        json rows = json::object();
        for (std::size_t i = 0; i < m.names.size(); ++i) {
            s += m.names[i];
            json row = json::object();
            for (std::size_t j = 0; j < m.names.size(); ++j) {
                s += "," + fmt(m.rho[i][j]);
                row[m.names[j]] = std::isnan(m.rho[i][j]) ? json(nullptr) : json(m.rho[i][j]);
            }
            s += "\n";
            rows[m.names[i]] = row;
        }
        tsv::write_file(dir / "spearman.csv", s);
        spearman = rows;
    } else {
        spearman = json{{"error", t.spearman.error}};
    }
    json ttests = json::array();
    {
        std::string s = "group,n_reused,n_other,mean_reused,mean_other,t,df,p\n";
        for (const auto& st : t.size_tests) {
            const auto& w = st.result;
            s += st.group + "," + std::to_string(w.n_a) + "," + std::to_string(w.n_b) + "," + fmt(w.mean_a) + "," +
                 fmt(w.mean_b) + "," + fmt(w.t) + "," + fmt(w.df) + "," + fmt(w.p) + "\n";
            ttests.push_back({{"group", st.group}, {"n_reused", w.n_a}, {"n_other", w.n_b}, {"mean_reused", w.mean_a},
                              {"mean_other", w.mean_b}, {"t", w.t}, {"df", w.df}, {"p", w.p}});
        }
        tsv::write_file(dir / "size_ttest.csv", s);
    }
    write_json(dir / "stats.json", {{"blob_model", model_json(t.blob_model)},
                                    {"project_model", model_json(t.project_model)},
                                    {"spearman", spearman},
                                    {"size_ttests", ttests}});

    std::uint64_t reused_blobs = 0;
    for (const auto& p : t.trends) reused_blobs += p.reused;
    json metric = json::object();
    for (const auto& [p, m] : t.binary_metric) metric[p] = m.m;
    json summary = {{"config_hash", config.hash()},
                    {"reuse_manifest", file_digest(reuse_dir(config) / "manifest.json")},
                    {"horizon", t.horizon},
                    {"window_days", config.window_days},
                    {"projects", t.clusters.clusters().size()},
                    {"origin_blobs", t.origins.size()},
                    {"reused_blobs", reused_blobs},
                    {"instances", t.instances.size()},
                    {"model_sample", t.blob_rows.size()},
                    {"binary_metric", metric},
                    {"warnings", t.warnings}};
    write_json(dir / "summary.json", summary);
    tsv::write_file(dir / "trend.svg", trend_svg(t.trends));

    for (const auto& w : t.warnings) say("warning: " + w);
    say("report: " + std::to_string(t.origins.size()) + " blobs, " + std::to_string(t.instances.size()) + " instances");
    return {t.warnings};
}

}  // namespace copytrace::pipeline
