#include <doctest.h>

#include <cmath>
#include <random>

#include "copytrace/error.hpp"
#include "copytrace/stats.hpp"
#include "oracles.hpp"

using namespace copytrace;
using namespace copytrace::stats;

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    return m;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())); }

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return Errc::IoError;
}

// scipy.stats.ttest_ind(equal_var=False) on the three textbook examples of
// Welch's test (Wikipedia); published values t = -2.46, -1.57, -2.22.
struct WelchFixture {
    std::vector<double> a, b;
    double t, df, p;
};
const std::vector<WelchFixture>& welch_fixtures() {
    static const std::vector<WelchFixture> f{
        {{27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4},
         {27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4},
         -2.455356398286006, 24.988529290231416, 0.021378001462866985},
        {{17.2, 20.9, 22.6, 18.1, 21.7, 21.4, 23.5, 24.2, 14.7, 21.8},
         {21.5, 22.8, 21.0, 23.0, 21.6, 23.6, 22.5, 20.7, 23.4, 21.8, 20.7, 21.7, 21.5, 22.5, 23.6, 21.5, 22.5, 23.5, 21.5,
          21.8},
         -1.5654335235985037, 9.904741248650831, 0.14884169660532834},
        {{19.8, 20.4, 19.6, 17.8, 18.5, 18.9, 18.3, 18.9, 19.5, 22.0},
         {28.2, 26.6, 20.1, 23.3, 25.2, 22.1, 17.7, 27.6, 20.6, 13.7, 23.2, 17.5, 20.6, 18.0, 23.9, 21.6, 24.3, 20.4, 23.9,
          13.3},
         -2.225512039969852, 24.524634944257343, 0.035484530830010325},
    };
    return f;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("IRLS matches the long-double Newton oracle on the fixtures") {
    for (const auto& f : oracle::logistic_fixtures()) {
        auto fit = fit_logistic(to_matrix(f.rows), to_vector(f.y), f.columns);
        auto want = oracle::newton_logistic(f.rows, f.y);
        CAPTURE(f.name);
        REQUIRE(want.converged);
        CHECK(fit.converged);
        CHECK_FALSE(fit.separation);
        for (std::size_t k = 0; k < want.beta.size(); ++k)
            CHECK(std::fabs(fit.coefficients[k] - double(want.beta[k])) < 1e-6);
        CHECK(std::fabs(fit.residual_deviance - double(want.deviance)) < 1e-6);
        CHECK(std::fabs(fit.null_deviance - double(want.null_deviance)) < 1e-6);
        for (std::size_t k = 0; k < fit.coefficients.size(); ++k) {
            CHECK(fit.odds_ratios[k] == doctest::Approx(std::exp(fit.coefficients[k])));
            CHECK(fit.z_values[k] == doctest::Approx(fit.coefficients[k] / fit.std_errors[k]));
        }
    }
}

TEST_CASE("intercept-only model has the closed form log(k/(n-k))") {
    for (auto [n, k] : {std::pair{10, 3}, {1000, 1}, {57, 56}, {400, 200}}) {
        std::vector<double> y(n, 0.0);
        for (int i = 0; i < k; ++i) y[i] = 1;
        DesignMatrix x(n);
        x.add_intercept();
        auto fit = fit_logistic(x, y);
        CHECK(std::fabs(fit.coefficients[0] - std::log(double(k) / (n - k))) < 1e-10);
        CHECK(std::fabs(fit.residual_deviance - fit.null_deviance) < 1e-8);
    }
}

TEST_CASE("analytic score equals central finite differences") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0, 0.5);
    for (const auto& f : oracle::logistic_fixtures()) {
        Eigen::MatrixXd x = to_matrix(f.rows);
        Eigen::VectorXd y = to_vector(f.y);
        Eigen::VectorXd beta(x.cols());
        for (Eigen::Index k = 0; k < beta.size(); ++k) beta[k] = g(rng);
        Eigen::VectorXd s = score(x, y, beta);
        for (Eigen::Index k = 0; k < beta.size(); ++k) {
            double h = 1e-5;
            Eigen::VectorXd up = beta, down = beta;
            up[k] += h;
            down[k] -= h;
            double fd = (log_likelihood(x, y, up) - log_likelihood(x, y, down)) / (2 * h);
            CHECK(std::fabs(fd - s[k]) <= 1e-4 * std::max(1.0, std::fabs(s[k])));
        }
        // the library log-likelihood agrees with the oracle's
        std::vector<double> b(beta.data(), beta.data() + beta.size());
        CHECK(log_likelihood(x, y, beta) == doctest::Approx(double(oracle::log_likelihood(f.rows, f.y, b))).epsilon(1e-12));
    }
}

TEST_CASE("affine rescaling of a predictor rescales its coefficient") {
    auto f = oracle::logistic_fixtures()[2];
    auto base = fit_logistic(to_matrix(f.rows), to_vector(f.y), f.columns);
    auto rows = f.rows;
    for (auto& r : rows) r[1] = 4.0 * r[1] - 7.0;
    auto scaled = fit_logistic(to_matrix(rows), to_vector(f.y), f.columns);
    CHECK(scaled.coefficients[1] == doctest::Approx(base.coefficients[1] / 4.0).epsilon(1e-8));
    CHECK(scaled.coefficients[2] == doctest::Approx(base.coefficients[2]).epsilon(1e-8));
    CHECK(scaled.residual_deviance == doctest::Approx(base.residual_deviance).epsilon(1e-10));
    CHECK(scaled.z_values[1] == doctest::Approx(base.z_values[1]).epsilon(1e-6));
}

TEST_CASE("sequential deviance table") {
    auto f = oracle::logistic_fixtures()[4];
    // keep an even number of rows per class so the balanced column below is exact
    for (int cls = 0; cls < 2; ++cls) {
        std::size_t count = 0, last = 0;
        for (std::size_t i = 0; i < f.y.size(); ++i)
            if (int(f.y[i]) == cls) ++count, last = i;
        if (count % 2) {
            f.rows.erase(f.rows.begin() + long(last));
            f.y.erase(f.y.begin() + long(last));
        }
    }
    std::size_t n = f.rows.size();
    DesignMatrix x(n);
    x.add_intercept();
    std::vector<std::vector<double>> cols(f.columns.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < f.columns.size(); ++k) cols[k][i] = f.rows[i][k];
    // balanced within each response class, so its fitted effect is exactly null
    std::vector<double> noise(n);
    std::size_t seen[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) noise[i] = double(seen[int(f.y[i])]++ % 2);
    std::vector<std::string> lab(n);
    for (std::size_t i = 0; i < n; ++i) lab[i] = i % 3 == 0 ? "a" : i % 3 == 1 ? "b" : "c";
    x.add_numeric("noise", noise);
    for (std::size_t k = 1; k < f.columns.size(); ++k) x.add_numeric(f.columns[k], cols[k]);
    std::vector<std::string> levels{"a", "b", "c"};
    x.add_factor("group", lab, levels, "a");
    CHECK(x.names().back() == "group:c");

    std::vector<std::string> order{"noise", "x1", "flag", "x3", "x4", "group"};
    auto table = anova_sequential(x, f.y, order);
    REQUIRE(table.size() == order.size() + 1);
    CHECK(table[0].term == "NULL");
    CHECK(std::fabs(table[1].deviance) < 1e-9);
    CHECK(table[6].df == 2);
    auto full = fit_logistic(x, f.y);
    double total = 0;
    for (std::size_t i = 1; i < table.size(); ++i) total += table[i].deviance;
    CHECK(total == doctest::Approx(full.null_deviance - full.residual_deviance).epsilon(1e-9));

    // each nested model matches the oracle refit on the same columns
    for (std::size_t upto = 1; upto <= 4; ++upto) {
        std::vector<std::string> terms(order.begin() + 1, order.begin() + 1 + long(upto));
        DesignMatrix sub = x.select(terms);
        auto m = sub.matrix();
        std::vector<std::vector<double>> rows(n, std::vector<double>(std::size_t(m.cols())));
        for (std::size_t i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) rows[i][std::size_t(j)] = m(Eigen::Index(i), j);
        CHECK(fit_logistic(sub, f.y).residual_deviance ==
              doctest::Approx(double(oracle::newton_logistic(rows, f.y).deviance)).epsilon(1e-9));
    }

    // total reduction does not depend on term order
    std::vector<std::string> permuted{"group", "x4", "flag", "noise", "x3", "x1"};
    auto other = anova_sequential(x, f.y, permuted);
    double total2 = 0;
    for (std::size_t i = 1; i < other.size(); ++i) total2 += other[i].deviance;
    CHECK(total2 == doctest::Approx(total).epsilon(1e-9));
    CHECK(other.back().resid_deviance == doctest::Approx(table.back().resid_deviance).epsilon(1e-9));
}

TEST_CASE("simulated odds ratio is recovered") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0, 1);
    std::size_t n = 10000;
    std::vector<double> flag(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        flag[i] = u(rng) < 0.5 ? 1 : 0;
        double eta = -1.0 + std::log(3.0) * flag[i];
        y[i] = u(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0;
    }
    DesignMatrix x(n);
    x.add_intercept();
    x.add_numeric("flag", flag);
    auto fit = fit_logistic(x, y);
    CHECK(fit.odds_ratios[1] >= 2.7);
    CHECK(fit.odds_ratios[1] <= 3.3);
}

TEST_CASE("degenerate designs") {
    DesignMatrix x(6);
    x.add_intercept();
    std::vector<double> v{1, 2, 3, 4, 5, 6};
    x.add_numeric("v", v);
    CHECK(code_of([&] { fit_logistic(x, std::vector<double>(6, 1.0)); }) == Errc::ClassMissing);

    std::vector<double> sep_y{0, 0, 0, 1, 1, 1};
    auto sep = fit_logistic(x, sep_y);
    CHECK(sep.separation);
    CHECK_FALSE(sep.converged);

    DesignMatrix dup(6);
    dup.add_intercept();
    dup.add_numeric("v", v);
    dup.add_numeric("w", v);
    std::vector<double> y{0, 1, 0, 1, 1, 0};
    CHECK(code_of([&] { fit_logistic(dup, y); }) == Errc::Singular);

    DesignMatrix c(6);
    c.add_intercept();
    std::vector<double> constant(6, 2.0);
    c.add_numeric("k", constant);
    c.add_numeric("v", v);
    CHECK(c.drop_constant_columns() == std::vector<std::string>{"k"});
    CHECK(c.names() == std::vector<std::string>{"(Intercept)", "v"});
}

TEST_CASE("mid-ranks and Spearman against the quadratic oracle") {
    std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3, 8, 4};
    std::vector<double> y{2, 7, 1, 8, 2, 8, 1, 8, 2, 8, 4, 5, 9, 0, 4, 5, 2, 3, 5, 3};
    auto r = average_ranks(x);
    auto q = oracle::quadratic_ranks(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(r[i] == double(q[i]));
    CHECK(std::fabs(spearman(x, y) - double(oracle::spearman(x, y))) < 1e-12);
    CHECK(spearman(x, y) == doctest::Approx(0.19073187020980284).epsilon(1e-12));  // scipy.stats.spearmanr

    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng() % 60;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = double(rng() % 7);
            b[i] = double(rng() % 5) + 0.5 * a[i];
        }
        double want;
        try {
            want = double(oracle::spearman(a, b));
        } catch (...) {
            continue;
        }
        if (std::isnan(want)) {
            CHECK_THROWS_AS(spearman(a, b), Error);
            continue;
        }
        CHECK(std::fabs(spearman(a, b) - want) < 1e-12);
        CHECK(std::fabs(spearman(a, b) - spearman(b, a)) < 1e-15);
    }
    CHECK(code_of([] { spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); }) ==
          Errc::DegenerateInput);
    CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{10, 20, 30, 40}) == 1.0);
}

TEST_CASE("Welch t-test on textbook fixtures") {
    for (const auto& f : welch_fixtures()) {
        auto w = welch_t(f.a, f.b);
        CHECK(std::fabs(w.t - f.t) < 1e-6);
        CHECK(std::fabs(w.df - f.df) < 1e-6);
        CHECK(std::fabs(w.p - f.p) < 1e-6);
        auto r = welch_t(f.b, f.a);
        CHECK(r.t == -w.t);
        CHECK(r.p == doctest::Approx(w.p).epsilon(1e-14));
    }
    std::vector<double> s{1.5, 2.5, 9.0, 4.0};
    auto same = welch_t(s, s);
    CHECK(same.t == 0.0);
    CHECK(same.p == doctest::Approx(1.0));
    CHECK(code_of([] { welch_t(std::vector<double>{1}, std::vector<double>{1, 2}); }) == Errc::DegenerateInput);
    CHECK(code_of([] { welch_t(std::vector<double>{2, 2}, std::vector<double>{1, 1}); }) == Errc::DegenerateInput);
}

TEST_CASE("distribution tails (scipy reference values)") {
    CHECK(student_t_two_sided_p(2.0, 10) == doctest::Approx(0.07338803477074039).epsilon(1e-12));
    CHECK(student_t_two_sided_p(1.5, 3.7) == doctest::Approx(0.2135981692020133).epsilon(1e-10));
    CHECK(chi_square_sf(3.0, 2) == doctest::Approx(0.22313016014842982).epsilon(1e-12));
    CHECK(chi_square_sf(10.5, 4) == doctest::Approx(0.03279698999488366).epsilon(1e-12));
    CHECK(normal_two_sided_p(1.0) == doctest::Approx(0.31731050786291415).epsilon(1e-12));
}

}
