#pragma once

#include <Eigen/Dense>

#include <optional>

namespace moenet {

/// Squared-exponential kernel s2 * exp(-|a - b|^2 / (2 l^2)) plus noise on the diagonal.
struct GpHyper {
    double signal_var = 1.0;
    double length_scale = 0.2;
    double noise_var = 1e-6;
};

struct GpConfig {
    /// When set, hyperparameters are fixed instead of tuned by marginal likelihood.
    std::optional<GpHyper> hyper;
    /// Number of additions between hyperparameter re-tuning in gp_update.
    int retune_every = 5;
};

/// Exact Gaussian-process regression on inputs in the unit cube, with a zero
/// prior mean on observations centred by their mean.
class GpSurrogate {
public:
    GpSurrogate() = default;

    const Eigen::MatrixXd& train_x() const { return x_; }
    const Eigen::VectorXd& train_y() const { return y_; }
    Eigen::Index size() const { return y_.size(); }
    Eigen::Index dims() const { return x_.cols(); }
    const GpHyper& hyper() const { return hyper_; }
    /// Diagonal jitter added on top of the noise variance to keep the factor positive definite.
    double jitter() const { return jitter_; }
    /// True when the observations are constant: the posterior is then the constant mean.
    bool degenerate() const { return degenerate_; }
    double y_mean() const { return y_mean_; }
    const Eigen::MatrixXd& chol() const { return l_; }

    double mean(const Eigen::Ref<const Eigen::VectorXd>& q) const;
    double variance(const Eigen::Ref<const Eigen::VectorXd>& q) const;
    /// Mean and variance in one pass.
    std::pair<double, double> predict(const Eigen::Ref<const Eigen::VectorXd>& q) const;
    double kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;
    double log_marginal_likelihood() const;

    friend GpSurrogate gp_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, const GpConfig& config);
    friend GpSurrogate gp_update(const GpSurrogate& surrogate, const Eigen::VectorXd& point, double value);

private:
    void factorize();
    void solve_weights();
    void tune();

    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    GpHyper hyper_;
    GpConfig config_;
    double jitter_ = 0.0;
    double y_mean_ = 0.0;
    bool degenerate_ = false;
    int additions_ = 0;
    Eigen::MatrixXd l_;      // lower factor of K + (noise + jitter) I
    Eigen::VectorXd weights_;  // (K + noise I)^-1 (y - mean)
};

/// Fits a surrogate to M >= 2 points (rows of `points`) in the unit cube.
/// Hyperparameters maximise the log marginal likelihood over a fixed grid
/// unless config.hyper is set. Constant values give a degenerate surrogate.
GpSurrogate gp_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, const GpConfig& config = {});

/// Adds one observation by extending the Cholesky factor. Every
/// config.retune_every additions the hyperparameters are re-tuned.
GpSurrogate gp_update(const GpSurrogate& surrogate, const Eigen::VectorXd& point, double value);

double normal_pdf(double z);
double normal_cdf(double z);

/// E[max(q_min - Y, 0)] for Y ~ N(mu, sigma^2); max(q_min - mu, 0) when sigma < 1e-12.
double expected_improvement(double mu, double sigma, double q_min);
double expected_improvement(const GpSurrogate& surrogate, const Eigen::Ref<const Eigen::VectorXd>& query,
                            double q_min);

}  // namespace moenet
