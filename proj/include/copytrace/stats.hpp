#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace copytrace::stats {

/// Named design matrix. Columns belong to terms; a factor contributes one
/// indicator column per non-reference level.
class DesignMatrix {
public:
    explicit DesignMatrix(std::size_t rows) : rows_(rows) {}

    void add_intercept();
    void add_numeric(const std::string& term, std::span<const double> values);
    /// Adds indicators "<term>:<level>" for every level in `levels` other than
    /// `reference` that occurs at least once.
    void add_factor(const std::string& term, std::span<const std::string> labels, std::span<const std::string> levels,
                    const std::string& reference);
    /// Drops non-intercept columns with a single distinct value; returns their names.
    std::vector<std::string> drop_constant_columns();

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<std::string>& column_terms() const noexcept { return terms_; }
    /// Term names in insertion order (the intercept is "(Intercept)").
    std::vector<std::string> terms() const;
    bool has_intercept() const noexcept;

    Eigen::MatrixXd matrix() const;
    /// Sub-design containing the intercept plus the listed terms, in order.
    DesignMatrix select(std::span<const std::string> terms) const;

private:
    std::size_t rows_;
    std::vector<std::string> names_;
    std::vector<std::string> terms_;
    std::vector<std::vector<double>> columns_;
};

struct FitOptions {
    int max_iterations = 50;
    double score_tolerance = 1e-8;
    double deviance_tolerance = 1e-10;
    double separation_threshold = 30.0;
};

struct RegressionResult {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> z_values;
    std::vector<double> p_values;
    std::vector<double> odds_ratios;
    double null_deviance = 0;
    double residual_deviance = 0;
    std::size_t n = 0;
    int iterations = 0;
    bool converged = false;
    /// Some |coefficient| exceeded the separation threshold; converged is false.
    bool separation = false;
};

/// Logistic regression by iteratively reweighted least squares.
/// Throws Error(ClassMissing) when y has a single class, Error(Singular) for
/// rank-deficient X or a constant non-intercept column.
RegressionResult fit_logistic(const DesignMatrix& x, std::span<const double> y, const FitOptions& options = {});
RegressionResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> names,
                              const FitOptions& options = {});

double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta);
/// Gradient of the log-likelihood: X^T (y - mu).
Eigen::VectorXd score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

struct AnovaRow {
    std::string term;
    std::size_t df = 0;
    double deviance = 0;  // reduction from adding the term
    std::size_t resid_df = 0;
    double resid_deviance = 0;
    double p_value = 1;
};

/// Nested fits adding one term at a time in `term_order`; the first row is the
/// intercept-only ("NULL") model.
std::vector<AnovaRow> anova_sequential(const DesignMatrix& x, std::span<const double> y,
                                       std::span<const std::string> term_order, const FitOptions& options = {});

/// Mid-ranks (1-based, ties share the mean rank).
std::vector<double> average_ranks(std::span<const double> values);
/// Pearson correlation of mid-ranks. Throws Error(DegenerateInput).
double spearman(std::span<const double> x, std::span<const double> y);

struct WelchResult {
    double t = 0;
    double df = 0;
    double p = 1;
    double mean_a = 0;
    double mean_b = 0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

/// Welch's unequal-variance t-test of mean(a) - mean(b), two-sided.
/// Throws Error(DegenerateInput) for samples under 2 or zero variance in both.
WelchResult welch_t(std::span<const double> a, std::span<const double> b);

double normal_two_sided_p(double z);
double student_t_two_sided_p(double t, double df);
double chi_square_sf(double x, double df);

}  // namespace copytrace::stats
