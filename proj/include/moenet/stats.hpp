#pragma once

#include <Eigen/Dense>

#include <vector>

namespace moenet {

struct BhResult {
    std::vector<double> adjusted;
    std::vector<bool> selected;  // adjusted < level
};

/// Benjamini-Hochberg step-up adjustment, returned in input order.
BhResult benjamini_hochberg(const std::vector<double>& pvalues, double level);

struct MannWhitneyResult {
    /// Pairs (a_i, b_j) with a_i > b_j, ties counted one half.
    double u = 0.0;
    /// Two-sided normal approximation with tie and continuity correction.
    double p_normal = 1.0;
    /// Two-sided exact permutation p-value; NaN when the groups are too large to enumerate.
    double p_exact = 0.0;
};

/// Two-sided Mann-Whitney U test of group `a` against group `b`. The exact
/// p-value (mid-ranks for ties) is computed when n_a + n_b <= `max_exact_n`.
MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b, int max_exact_n = 20);

struct LogisticFit {
    Eigen::VectorXd coefficients;  // intercept first
    Eigen::VectorXd standard_errors;
    bool converged = false;
    int iterations = 0;
};

/// Unpenalised maximum-likelihood logistic regression by damped Newton steps.
/// `x` excludes the intercept column. Non-convergence (including separation,
/// where some |eta| exceeds 30) is reported via `converged`.
LogisticFit logistic_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter = 50);

/// Two-sided p-value for a standard normal statistic.
double two_sided_normal_p(double z);

struct OlsFit {
    Eigen::VectorXd coefficients;  // intercept first
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd t;
    Eigen::VectorXd p;
    double df = 0.0;
    bool rank_deficient = false;
};

/// Ordinary least squares with intercept and two-sided t-tests per coefficient.
/// A rank-deficient design is flagged and every p-value set to 1.
OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace moenet
