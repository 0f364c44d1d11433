#include "moenet/stats.hpp"

#include "moenet/error.hpp"
#include "moenet/gp.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace moenet {

BhResult benjamini_hochberg(const std::vector<double>& pvalues, double level) {
    const std::size_t m = pvalues.size();
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("benjamini_hochberg: p-values must lie in [0, 1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

    BhResult out;
    out.adjusted.assign(m, 1.0);
    out.selected.assign(m, false);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const double v = static_cast<double>(m) * pvalues[order[r]] / static_cast<double>(r + 1);
        running = std::min(running, v);
        out.adjusted[order[r]] = std::min(running, 1.0);
    }
    for (std::size_t i = 0; i < m; ++i) out.selected[i] = out.adjusted[i] < level;
    return out;
}

MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b, int max_exact_n) {
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    if (na == 0 || nb == 0) throw InvalidArgument("mann_whitney: both groups need at least one value");

    // Doubled mid-ranks keep every rank sum an integer.
    std::vector<std::pair<double, bool>> pooled;  // (value, in group a)
    pooled.reserve(n);
    for (double v : a) pooled.emplace_back(v, true);
    for (double v : b) pooled.emplace_back(v, false);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return pooled[i].first < pooled[j].first; });
    std::vector<long long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]].first == pooled[order[i]].first) ++j;
        const long long r2 = static_cast<long long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long long sum2 = 0;
    for (std::size_t i = 0; i < na; ++i) sum2 += rank2[i];
    const long long nall = static_cast<long long>(na), nball = static_cast<long long>(nb);
    const long long u2 = sum2 - nall * (nall + 1);  // 2U
    const long long centre2 = nall * nball;         // 2E[U]

    MannWhitneyResult res;
    res.u = static_cast<double>(u2) / 2.0;

    const double dn = static_cast<double>(n);
    const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                       ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var > 0.0) {
        const double z = std::max(std::abs(res.u - static_cast<double>(centre2) / 2.0) - 0.5, 0.0) / std::sqrt(var);
        res.p_normal = std::min(1.0, two_sided_normal_p(z));
    } else {
        res.p_normal = 1.0;
    }

    if (static_cast<int>(n) <= max_exact_n) {
        // count[k][s]: subsets of size k with doubled rank sum s.
        long long max_sum = 0;
        for (long long r : rank2) max_sum += r;
        std::vector<std::vector<double>> count(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
        count[0][0] = 1.0;
        for (std::size_t item = 0; item < n; ++item) {
            const auto r = static_cast<std::size_t>(rank2[item]);
            for (std::size_t k = std::min(item + 1, na); k >= 1; --k)
                for (std::size_t s = static_cast<std::size_t>(max_sum); s >= r; --s) count[k][s] += count[k - 1][s - r];
        }
        const long long obs = std::abs(u2 - centre2);
        double extreme = 0.0, total = 0.0;
        for (std::size_t s = 0; s < count[na].size(); ++s) {
            const double c = count[na][s];
            if (c == 0.0) continue;
            total += c;
            const long long d = std::abs(static_cast<long long>(s) - nall * (nall + 1) - centre2);
            if (d >= obs) extreme += c;
        }
        res.p_exact = extreme / total;
    } else {
        res.p_exact = std::numeric_limits<double>::quiet_NaN();
    }
    return res;
}

double two_sided_normal_p(double z) { return 2.0 * normal_cdf(-std::abs(z)); }

LogisticFit logistic_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter) {
    const Eigen::Index n = x.rows(), p = x.cols() + 1;
    if (y.size() != n) throw InvalidArgument("logistic_newton: row mismatch");
    Eigen::MatrixXd d(n, p);
    d.col(0).setOnes();
    d.rightCols(p - 1) = x;

    auto nll = [&](const Eigen::VectorXd& eta) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = eta[i];
            s += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - y[i] * e;
        }
        return s;
    };

    LogisticFit fit;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    double f = nll(eta);
    Eigen::MatrixXd info(p, p);
    for (int it = 1; it <= max_iter; ++it) {
        fit.iterations = it;
        Eigen::VectorXd mu(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = 1.0 / (1.0 + std::exp(-eta[i]));
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        const Eigen::VectorXd grad = d.transpose() * (y - mu);
        info = d.transpose() * w.asDiagonal() * d;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) break;
        const Eigen::VectorXd step = ldlt.solve(grad);
        double t = 1.0, f_new = f;
        Eigen::VectorXd beta_new, eta_new;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            beta_new = beta + t * step;
            eta_new = d * beta_new;
            f_new = nll(eta_new);
            if (f_new <= f + 1e-12 * std::max(1.0, std::abs(f))) break;
        }
        const double change = f - f_new;
        beta = beta_new;
        eta = eta_new;
        f = f_new;
        if (eta.cwiseAbs().maxCoeff() > 30.0) break;  // quasi-separation
        if (std::abs(change) < 1e-10 * (std::abs(f) + 1e-10) && step.cwiseAbs().maxCoeff() < 1e-8 * (1.0 + beta.cwiseAbs().maxCoeff())) {
            fit.converged = true;
            break;
        }
        if (step.cwiseAbs().maxCoeff() < 1e-10) {
            fit.converged = true;
            break;
        }
    }
    fit.coefficients = beta;
    fit.standard_errors = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    if (fit.converged) {
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = 1.0 / (1.0 + std::exp(-eta[i]));
            w[i] = m * (1.0 - m);
        }
        info = d.transpose() * w.asDiagonal() * d;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
            fit.converged = false;
        } else {
            const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
            fit.standard_errors = cov.diagonal().cwiseSqrt();
        }
    }
    return fit;
}

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.rows(), p = x.cols() + 1;
    if (y.size() != n) throw InvalidArgument("ols: row mismatch");
    if (n <= p) throw InvalidArgument("ols: need more rows than coefficients");
    Eigen::MatrixXd d(n, p);
    d.col(0).setOnes();
    d.rightCols(p - 1) = x;

    OlsFit fit;
    fit.df = static_cast<double>(n - p);
    fit.coefficients = Eigen::VectorXd::Zero(p);
    fit.standard_errors = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    fit.t = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    fit.p = Eigen::VectorXd::Ones(p);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        fit.rank_deficient = true;
        return fit;
    }
    fit.coefficients = qr.solve(y);
    const double rss = (y - d * fit.coefficients).squaredNorm();
    const double sigma2 = rss / fit.df;
    const Eigen::MatrixXd xtx_inv = (d.transpose() * d).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    boost::math::students_t dist(fit.df);
    for (Eigen::Index j = 0; j < p; ++j) {
        fit.standard_errors[j] = std::sqrt(sigma2 * xtx_inv(j, j));
        fit.t[j] = fit.coefficients[j] / fit.standard_errors[j];
        if (std::isfinite(fit.t[j]))
            fit.p[j] = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.t[j])));
        else
            fit.p[j] = fit.standard_errors[j] == 0.0 ? 0.0 : 1.0;
    }
    return fit;
}

}  // namespace moenet
