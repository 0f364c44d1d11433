#pragma once

// Independent reference implementations used as oracles by the tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Problem {
    MatrixXd x;
    VectorXd y;
};

inline MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd x(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = z(rng);
    return x;
}

/// Columns centred and scaled to unit population variance.
inline MatrixXd standardized(MatrixXd x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mu = x.col(j).mean();
        x.col(j).array() -= mu;
        const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(x.rows()));
        if (sd > 0) x.col(j) /= sd;
    }
    return x;
}

/// Logistic data with the first `k` coefficients set to `beta`.
inline Problem logistic_problem(Eigen::Index n, Eigen::Index p, Eigen::Index k, double beta, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Problem pr;
    pr.x = standardized(gaussian_matrix(n, p, rng));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    pr.y.resize(n);
    for (;;) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double eta = 0.0;
            for (Eigen::Index j = 0; j < std::min(k, p); ++j) eta += beta * pr.x(i, j);
            pr.y[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
        }
        const double s = pr.y.sum();
        if (s >= 2 && s <= static_cast<double>(n) - 2) break;
    }
    return pr;
}

struct NewtonFit {
    double intercept = 0.0;
    VectorXd beta;
};

/// Minimises (1/N) sum [log(1+e^eta) - y eta] + lambda/2 sum w_j b_j^2 by full
/// Newton steps with backtracking. lambda = 0 gives the plain MLE.
inline NewtonFit ridge_logistic_newton(const MatrixXd& x, const VectorXd& y, double lambda, const VectorXd& w) {
    const Eigen::Index n = x.rows(), p = x.cols();
    MatrixXd a(n, p + 1);
    a.col(0).setOnes();
    a.rightCols(p) = x;
    VectorXd pen = VectorXd::Zero(p + 1);
    pen.tail(p) = lambda * w;
    auto objective = [&](const VectorXd& t) {
        const VectorXd eta = a * t;
        double f = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = eta[i];
            f += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - y[i] * e;
        }
        return f / static_cast<double>(n) + 0.5 * (pen.array() * t.array().square()).sum();
    };
    VectorXd theta = VectorXd::Zero(p + 1);
    double f = objective(theta);
    for (int it = 0; it < 200; ++it) {
        const VectorXd eta = a * theta;
        VectorXd mu(n), wt(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
            wt[i] = mu[i] * (1.0 - mu[i]);
        }
        VectorXd grad = a.transpose() * (mu - y) / static_cast<double>(n);
        grad.array() += pen.array() * theta.array();
        MatrixXd hess = a.transpose() * wt.asDiagonal() * a / static_cast<double>(n);
        hess.diagonal() += pen;
        const VectorXd step = hess.ldlt().solve(grad);
        double t = 1.0;
        VectorXd cand = theta - step;
        double fc = objective(cand);
        while (fc > f + 1e-4 * t * grad.dot(-step) && t > 1e-10) {
            t *= 0.5;
            cand = theta - t * step;
            fc = objective(cand);
        }
        theta = cand;
        f = fc;
        if (grad.lpNorm<Eigen::Infinity>() < 1e-13) break;
    }
    return {theta[0], theta.tail(p)};
}

/// Literal BH: for each i, min over j >= i in sorted order of m p_(j) / j.
inline std::vector<double> bh_bruteforce(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = 1.0;
        for (std::size_t j = i; j < m; ++j)
            best = std::min(best, static_cast<double>(m) * p[order[j]] / static_cast<double>(j + 1));
        out[order[i]] = best;
    }
    return out;
}

/// Closed-form GP posterior of the latent function given hyperparameters and prior mean.
struct BatchPosterior {
    MatrixXd x;
    VectorXd alpha;
    Eigen::LLT<MatrixXd> llt;
    double s2 = 0, ell = 0, mean = 0;

    BatchPosterior(const MatrixXd& points, const VectorXd& values, double signal, double length, double noise,
                   double prior_mean)
        : x(points), s2(signal), ell(length), mean(prior_mean) {
        const Eigen::Index m = x.rows();
        MatrixXd k(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) k(i, j) = kern(x.row(i), x.row(j));
        k.diagonal().array() += noise;
        llt.compute(k);
        alpha = llt.solve((values.array() - mean).matrix());
    }
    double kern(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
        return s2 * std::exp(-(a - b).squaredNorm() / (2 * ell * ell));
    }
    std::pair<double, double> at(const VectorXd& q) const {
        VectorXd k(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) k[i] = kern(x.row(i), q.transpose());
        const double mu = mean + k.dot(alpha);
        const double var = s2 - k.dot(llt.solve(k));
        return {mu, std::max(var, 0.0)};
    }
};

/// Fresh directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("moenet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
