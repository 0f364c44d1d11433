#pragma once

#include "moenet/core_data.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace moenet {

/// Settings for one penalised logistic fit (or a lambda path).
///
/// The minimised objective is
///
///     (1/N) sum_i [log(1 + exp(eta_i)) - y_i eta_i]
///       + lambda * sum_j w_j [ a_j |b_j| + (1 - a_j)/2 b_j^2 ]
///
/// with eta = b0 + X b, an unpenalised intercept b0, penalty weights w_j and
/// mixing a_j = alpha unless `feature_alpha` is given (per-layer mixing).
struct EnetConfig {
    double alpha = 1.0;
    double lambda = 0.0;
    /// Length-P, nonnegative. Empty means 0 on the stack's unpenalised block
    /// and 1 elsewhere (or all ones for a bare matrix).
    Eigen::VectorXd penalty_weights;
    /// Optional length-P per-column mixing parameter overriding `alpha`.
    Eigen::VectorXd feature_alpha;
    int max_outer_iter = 100;
    int max_inner_iter = 10'000;
    /// Stationarity tolerance: a fit is converged once every KKT residual is
    /// below tol * max(1, lambda).
    double tol = 1e-7;
    int path_length = 100;
    /// Defaults to 1e-2 when N < P and 1e-4 otherwise.
    std::optional<double> lambda_min_ratio;
};

struct EnetFit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    double alpha = 1.0;
    double lambda = 0.0;
    /// Nonzero coefficients among penalised (weight > 0) columns.
    Index n_nonzero = 0;
    bool converged = false;
    /// Penalised objective at the returned solution.
    double objective = 0.0;
    /// Set when every |eta_i| exceeded 30 with no effective l1 penalty.
    bool separation_warning = false;
    int outer_iterations = 0;
    /// Objective after every IRLS step (the first entry is the start point).
    std::vector<double> objective_trace;
    /// Non-empty when this path point failed; the other fields are then unset.
    std::string error;

    bool ok() const { return error.empty(); }
    /// Indices of nonzero coefficients among columns with positive weight.
    std::vector<Index> selected(const Eigen::VectorXd& penalty_weights) const;
};

/// exp(eta) / (1 + exp(eta)) evaluated without overflow.
double logistic(double eta);
double predict_proba(const EnetFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x);
/// One probability per row of `x`.
Eigen::VectorXd predict_proba_rows(const EnetFit& fit, const Eigen::MatrixXd& x);

/// Resolves empty penalty weights / feature alphas to explicit length-P vectors.
Eigen::VectorXd resolve_weights(const EnetConfig& config, Index p);
Eigen::VectorXd resolve_feature_alpha(const EnetConfig& config, Index p);

/// Penalised objective value at (intercept, coefficients).
double enet_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config,
                      double intercept, const Eigen::VectorXd& coefficients);

/// Largest KKT residual of a solution (0 at an exact minimiser).
double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config,
                     const EnetFit& fit);

/// Fits one (lambda, alpha) problem. `warm_start` seeds the coefficients.
/// Throws FoldDegenerate when y lacks a class and SolverError when the
/// objective becomes non-finite.
EnetFit fit_enet(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config,
                 const EnetFit* warm_start = nullptr);
EnetFit fit_enet(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config,
                 const EnetFit* warm_start = nullptr);

/// Smallest lambda at which every penalised coefficient is zero. The null
/// model includes the intercept and every unpenalised column. For alpha = 0
/// the formula uses alpha = 1e-3.
double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config);
double lambda_max(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config);

/// Log-spaced grid from lambda_max down to lambda_max * lambda_min_ratio.
std::vector<double> lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config);

/// Warm-started fits along `lambdas` (decreasing). Failed points are marked
/// through EnetFit::error; the path continues from the last good fit.
std::vector<EnetFit> fit_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config,
                              const std::vector<double>& lambdas);
std::vector<EnetFit> fit_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config);
std::vector<EnetFit> fit_path(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config);

}  // namespace moenet
