#include "moenet/gp.hpp"

#include "moenet/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace moenet {

namespace {

constexpr double kNoiseFloor = 1e-6;

double sq_dist(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    return (a - b).squaredNorm();
}

Eigen::MatrixXd pairwise_sq_dist(const Eigen::MatrixXd& x) {
    const Eigen::Index m = x.rows();
    Eigen::MatrixXd d(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).squaredNorm();
    }
    return d;
}

// Cholesky with escalating diagonal jitter (relative to the signal variance).
bool robust_llt(const Eigen::MatrixXd& k, double scale, Eigen::MatrixXd& l, double& jitter) {
    const Eigen::Index m = k.rows();
    for (int step = -1; step <= 6; ++step) {
        jitter = step < 0 ? 0.0 : scale * std::pow(10.0, -12 + step);
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) {
            l = llt.matrixL();
            bool finite = l.allFinite();
            for (Eigen::Index i = 0; finite && i < m; ++i) finite = l(i, i) > 0.0;
            if (finite) return true;
        }
    }
    return false;
}

double population_var(const Eigen::VectorXd& y) {
    const double mu = y.mean();
    return (y.array() - mu).square().mean();
}

}  // namespace

double GpSurrogate::kernel(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
    const double l2 = hyper_.length_scale * hyper_.length_scale;
    return hyper_.signal_var * std::exp(-sq_dist(a, b) / (2.0 * l2));
}

void GpSurrogate::factorize() {
    const Eigen::Index m = x_.rows();
    const double l2 = hyper_.length_scale * hyper_.length_scale;
    Eigen::MatrixXd k = (-pairwise_sq_dist(x_) / (2.0 * l2)).array().exp().matrix() * hyper_.signal_var;
    k.diagonal().array() += hyper_.noise_var;
    const double scale = std::max(hyper_.signal_var, hyper_.noise_var);
    if (!robust_llt(k, scale, l_, jitter_))
        throw OptimizerError("gp: kernel matrix of " + std::to_string(m) +
                             " points is not positive definite even with jitter 1e-6");
}

void GpSurrogate::solve_weights() {
    Eigen::VectorXd r = y_.array() - y_mean_;
    l_.triangularView<Eigen::Lower>().solveInPlace(r);
    l_.transpose().triangularView<Eigen::Upper>().solveInPlace(r);
    weights_ = std::move(r);
}

void GpSurrogate::tune() {
    y_mean_ = y_.mean();
    const double var = population_var(y_);
    degenerate_ = !(var > 0.0);
    if (config_.hyper) {
        hyper_ = *config_.hyper;
        return;
    }
    if (degenerate_) {
        hyper_ = {0.0, 1.0, kNoiseFloor};
        return;
    }

    const Eigen::Index m = x_.rows();
    const Eigen::MatrixXd d2 = pairwise_sq_dist(x_);
    const Eigen::VectorXd yc = y_.array() - y_mean_;
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    double best = -std::numeric_limits<double>::infinity();
    GpHyper chosen{var, 0.2, 1e-4 * var};
    for (int il = 0; il < 8; ++il) {
        const double ell = 0.05 * std::pow(2.0 / 0.05, il / 7.0);
        const Eigen::MatrixXd base = (-d2 / (2.0 * ell * ell)).array().exp().matrix();
        for (double s_mult : {0.1, 1.0, 10.0}) {
            for (double n_mult : {1e-6, 1e-4, 1e-2}) {
                Eigen::MatrixXd k = base * (s_mult * var);
                k.diagonal().array() += n_mult * var;
                Eigen::LLT<Eigen::MatrixXd> llt(k);
                if (llt.info() != Eigen::Success) continue;
                const Eigen::VectorXd a = llt.solve(yc);
                const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
                const double lml = -0.5 * yc.dot(a) - 0.5 * logdet - 0.5 * static_cast<double>(m) * log_2pi;
                if (std::isfinite(lml) && lml > best) {
                    best = lml;
                    chosen = {s_mult * var, ell, n_mult * var};
                }
            }
        }
    }
    hyper_ = chosen;
}

std::pair<double, double> GpSurrogate::predict(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    const Eigen::Index m = x_.rows();
    Eigen::VectorXd k(m);
    const double inv = 1.0 / (2.0 * hyper_.length_scale * hyper_.length_scale);
    for (Eigen::Index i = 0; i < m; ++i) k[i] = hyper_.signal_var * std::exp(-(x_.row(i).transpose() - q).squaredNorm() * inv);
    const double mu = y_mean_ + k.dot(weights_);
    l_.triangularView<Eigen::Lower>().solveInPlace(k);
    double var = hyper_.signal_var - k.squaredNorm();
    if (var < 0.0) var = 0.0;
    return {mu, var};
}

double GpSurrogate::mean(const Eigen::Ref<const Eigen::VectorXd>& q) const { return predict(q).first; }
double GpSurrogate::variance(const Eigen::Ref<const Eigen::VectorXd>& q) const { return predict(q).second; }

double GpSurrogate::log_marginal_likelihood() const {
    const Eigen::VectorXd yc = y_.array() - y_mean_;
    const double logdet = 2.0 * l_.diagonal().array().log().sum();
    return -0.5 * yc.dot(weights_) - 0.5 * logdet -
           0.5 * static_cast<double>(y_.size()) * std::log(2.0 * std::numbers::pi);
}

GpSurrogate gp_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, const GpConfig& config) {
    if (points.rows() != values.size()) throw InvalidArgument("gp_fit: points/values length mismatch");
    if (points.rows() < 2) throw InvalidArgument("gp_fit: at least 2 points are required");
    if (!values.allFinite() || !points.allFinite()) throw InvalidArgument("gp_fit: non-finite input");
    GpSurrogate s;
    s.x_ = points;
    s.y_ = values;
    s.config_ = config;
    s.tune();
    s.factorize();
    s.solve_weights();
    return s;
}

GpSurrogate gp_update(const GpSurrogate& surrogate, const Eigen::VectorXd& point, double value) {
    if (point.size() != surrogate.dims()) throw InvalidArgument("gp_update: point dimension mismatch");
    if (!std::isfinite(value) || !point.allFinite()) throw InvalidArgument("gp_update: non-finite input");
    GpSurrogate s = surrogate;
    const Eigen::Index m = s.x_.rows();
    s.x_.conservativeResize(m + 1, Eigen::NoChange);
    s.x_.row(m) = point.transpose();
    s.y_.conservativeResize(m + 1);
    s.y_[m] = value;
    ++s.additions_;

    const bool retune = (s.config_.retune_every > 0 && s.additions_ % s.config_.retune_every == 0) ||
                        (s.degenerate_ && value != s.y_[0]);
    if (retune) {
        s.tune();
        s.factorize();
        s.solve_weights();
        return s;
    }

    // Extend the factor by one row: [L 0; l' d].
    Eigen::VectorXd k(m);
    for (Eigen::Index i = 0; i < m; ++i) k[i] = s.kernel(s.x_.row(i).transpose(), point);
    s.l_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(k);
    const double kss = s.hyper_.signal_var + s.hyper_.noise_var + s.jitter_;
    const double d2 = kss - k.squaredNorm();
    if (!(d2 > 1e-14 * std::max(kss, 1e-300))) {
        s.factorize();
    } else {
        s.l_.conservativeResize(m + 1, m + 1);
        s.l_.row(m).head(m) = k.transpose();
        s.l_.col(m).head(m).setZero();
        s.l_(m, m) = std::sqrt(d2);
    }
    s.solve_weights();
    return s;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mu, double sigma, double q_min) {
    const double diff = q_min - mu;
    if (!(sigma >= 1e-12)) return std::max(diff, 0.0);
    const double z = diff / sigma;
    return std::max(diff * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

double expected_improvement(const GpSurrogate& surrogate, const Eigen::Ref<const Eigen::VectorXd>& query,
                            double q_min) {
    const auto [mu, var] = surrogate.predict(query);
    return expected_improvement(mu, std::sqrt(var), q_min);
}

}  // namespace moenet
