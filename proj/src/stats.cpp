#include "copytrace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <numeric>
#include <set>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "copytrace/error.hpp"

namespace copytrace::stats {

namespace {

const std::string kIntercept = "(Intercept)";

// log(1 + exp(eta)) without overflow.
double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double logistic(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    double e = std::exp(eta);
    return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// DesignMatrix
// ---------------------------------------------------------------------------

void DesignMatrix::add_intercept() {
    names_.push_back(kIntercept);
    terms_.push_back(kIntercept);
    columns_.emplace_back(rows_, 1.0);
}

void DesignMatrix::add_numeric(const std::string& term, std::span<const double> values) {
    if (values.size() != rows_) throw Error(Errc::InsufficientData, "column " + term + " has wrong length");
    names_.push_back(term);
    terms_.push_back(term);
    columns_.emplace_back(values.begin(), values.end());
}

void DesignMatrix::add_factor(const std::string& term, std::span<const std::string> labels,
                              std::span<const std::string> levels, const std::string& reference) {
    if (labels.size() != rows_) throw Error(Errc::InsufficientData, "factor " + term + " has wrong length");
    std::set<std::string> present(labels.begin(), labels.end());
    for (const auto& level : levels) {
        if (level == reference || !present.count(level)) continue;
        std::vector<double> col(rows_);
        for (std::size_t i = 0; i < rows_; ++i) col[i] = labels[i] == level ? 1.0 : 0.0;
        names_.push_back(term + ":" + level);
        terms_.push_back(term);
        columns_.push_back(std::move(col));
    }
}

std::vector<std::string> DesignMatrix::drop_constant_columns() {
    std::vector<std::string> dropped;
    for (std::size_t j = columns_.size(); j-- > 0;) {
        if (terms_[j] == kIntercept) continue;
        const auto& c = columns_[j];
        bool constant = std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
        if (!constant) continue;
        dropped.push_back(names_[j]);
        names_.erase(names_.begin() + static_cast<std::ptrdiff_t>(j));
        terms_.erase(terms_.begin() + static_cast<std::ptrdiff_t>(j));
        columns_.erase(columns_.begin() + static_cast<std::ptrdiff_t>(j));
    }
    std::reverse(dropped.begin(), dropped.end());
    return dropped;
}

std::vector<std::string> DesignMatrix::terms() const {
    std::vector<std::string> out;
    for (const auto& t : terms_)
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return out;
}

bool DesignMatrix::has_intercept() const noexcept {
    return std::find(terms_.begin(), terms_.end(), kIntercept) != terms_.end();
}

Eigen::MatrixXd DesignMatrix::matrix() const {
    Eigen::MatrixXd m(rows_, columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j)
        for (std::size_t i = 0; i < rows_; ++i) m(Eigen::Index(i), Eigen::Index(j)) = columns_[j][i];
    return m;
}

DesignMatrix DesignMatrix::select(std::span<const std::string> terms) const {
    DesignMatrix out(rows_);
    auto take = [&](const std::string& term) {
        for (std::size_t j = 0; j < columns_.size(); ++j)
            if (terms_[j] == term) {
                out.names_.push_back(names_[j]);
                out.terms_.push_back(terms_[j]);
                out.columns_.push_back(columns_[j]);
            }
    };
    take(kIntercept);
    for (const auto& t : terms)
        if (t != kIntercept) take(t);
    return out;
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = x * beta;
    double ll = 0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
    return ll;
}

Eigen::VectorXd score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = y[i] - logistic(eta[i]);
    return x.transpose() * resid;
}

RegressionResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> names,
                              const FitOptions& options) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (y.size() != n) throw Error(Errc::InsufficientData, "response length differs from design rows");
    if (names.size() != static_cast<std::size_t>(p)) throw Error(Errc::InsufficientData, "column names do not match design");
    double ones = y.sum();
    if (ones < 1 || ones > double(n) - 1) throw Error(Errc::ClassMissing, "response needs at least one row of each class");
    for (Eigen::Index i = 0; i < n; ++i)
        if (y[i] != 0 && y[i] != 1) throw Error(Errc::InsufficientData, "response must be 0/1");

    std::optional<Eigen::Index> intercept;
    for (Eigen::Index j = 0; j < p; ++j) {
        double first = x(0, j);
        bool constant = (x.col(j).array() == first).all();
        if (constant && first == 1.0 && !intercept) {
            intercept = j;
        } else if (constant) {
            throw Error(Errc::Singular, "constant column " + names[std::size_t(j)]);
        }
    }
    if (p == 0) throw Error(Errc::Singular, "empty design");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) throw Error(Errc::Singular, "design matrix is rank deficient");

    RegressionResult res;
    res.names = std::move(names);
    res.n = static_cast<std::size_t>(n);
    double ybar = ones / double(n);
    res.null_deviance = intercept ? -2.0 * (ones * std::log(ybar) + (double(n) - ones) * std::log1p(-ybar))
                                  : 2.0 * double(n) * std::log(2.0);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (intercept) beta[*intercept] = std::log(ybar / (1 - ybar));
    double dev = -2.0 * log_likelihood(x, y, beta);
    Eigen::VectorXd w(n), resid(n);

    auto information = [&](const Eigen::VectorXd& b) {
        Eigen::VectorXd eta = x * b;
        for (Eigen::Index i = 0; i < n; ++i) {
            double mu = logistic(eta[i]);
            w[i] = mu * (1 - mu);
            resid[i] = y[i] - mu;
        }
        return Eigen::MatrixXd(x.transpose() * w.asDiagonal() * x);
    };

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        Eigen::MatrixXd info = information(beta);
        Eigen::VectorXd grad = x.transpose() * resid;
        res.iterations = iter;
        if (grad.cwiseAbs().maxCoeff() < options.score_tolerance) {
            res.converged = true;
            res.iterations = iter - 1;
            break;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd step = ldlt.solve(grad);
        if (!step.allFinite()) break;

        // Step halving guards against overshooting on flat or separated likelihoods.
        Eigen::VectorXd next = beta + step;
        double next_dev = -2.0 * log_likelihood(x, y, next);
        for (int h = 0; h < 30 && !(next_dev <= dev + 1e-12 * std::abs(dev)); ++h) {
            step *= 0.5;
            next = beta + step;
            next_dev = -2.0 * log_likelihood(x, y, next);
        }
        double change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
        beta = next;
        dev = next_dev;
        if (change < options.deviance_tolerance) {
            res.converged = true;
            break;
        }
    }

    Eigen::MatrixXd info = information(beta);
    Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    res.residual_deviance = dev;
    for (Eigen::Index j = 0; j < p; ++j) {
        double b = beta[j];
        double se = std::sqrt(std::max(0.0, cov(j, j)));
        double z = b / se;
        res.coefficients.push_back(b);
        res.std_errors.push_back(se);
        res.z_values.push_back(z);
        res.p_values.push_back(normal_two_sided_p(z));
        res.odds_ratios.push_back(std::exp(b));
        if (std::abs(b) > options.separation_threshold) res.separation = true;
    }
    if (res.separation) res.converged = false;
    return res;
}

RegressionResult fit_logistic(const DesignMatrix& x, std::span<const double> y, const FitOptions& options) {
    Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), Eigen::Index(y.size()));
    return fit_logistic(x.matrix(), yy, x.names(), options);
}

std::vector<AnovaRow> anova_sequential(const DesignMatrix& x, std::span<const double> y,
                                       std::span<const std::string> term_order, const FitOptions& options) {
    std::vector<AnovaRow> rows;
    std::vector<std::string> included;
    double prev_dev = 0;
    std::size_t prev_df = 0;
    {
        DesignMatrix base = x.select(included);
        RegressionResult fit = fit_logistic(base, y, options);
        prev_dev = fit.residual_deviance;
        prev_df = y.size() - base.cols();
        rows.push_back({"NULL", 0, 0.0, prev_df, prev_dev, std::nan("")});
    }
    for (const auto& term : term_order) {
        if (term == "(Intercept)") continue;
        included.push_back(term);
        DesignMatrix sub = x.select(included);
        RegressionResult fit = fit_logistic(sub, y, options);
        std::size_t df = y.size() - sub.cols();
        AnovaRow row;
        row.term = term;
        row.df = prev_df - df;
        row.deviance = prev_dev - fit.residual_deviance;
        row.resid_df = df;
        row.resid_deviance = fit.residual_deviance;
        row.p_value = row.df > 0 ? chi_square_sf(std::max(0.0, row.deviance), double(row.df)) : std::nan("");
        rows.push_back(row);
        prev_dev = fit.residual_deviance;
        prev_df = df;
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Rank correlation and t-test
// ---------------------------------------------------------------------------

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        double mid = (double(i + 1) + double(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = mid;
        i = j;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(Errc::DegenerateInput, "spearman needs two equal samples of size >= 2");
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    const double n = double(rx.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mx, dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) throw Error(Errc::DegenerateInput, "zero variance in ranks");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw Error(Errc::DegenerateInput, "welch t-test needs at least 2 observations per sample");
    auto moments = [](std::span<const double> s) {
        double mean = std::accumulate(s.begin(), s.end(), 0.0) / double(s.size());
        double ss = 0;
        for (double v : s) ss += (v - mean) * (v - mean);
        return std::pair{mean, ss / double(s.size() - 1)};
    };
    auto [ma, va] = moments(a);
    auto [mb, vb] = moments(b);
    if (va == 0 && vb == 0) throw Error(Errc::DegenerateInput, "both samples have zero variance");
    double qa = va / double(a.size()), qb = vb / double(b.size());
    double se2 = qa + qb;
    WelchResult r;
    r.mean_a = ma;
    r.mean_b = mb;
    r.n_a = a.size();
    r.n_b = b.size();
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (qa * qa / double(a.size() - 1) + qb * qb / double(b.size() - 1));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double student_t_two_sided_p(double t, double df) {
    if (t == 0) return 1.0;
    return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

double chi_square_sf(double x, double df) {
    if (x <= 0) return 1.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

}  // namespace copytrace::stats
