#include "doctest.h"
#include "support.hpp"

#include "moenet/stats.hpp"

#include <algorithm>
#include <map>

using namespace moenet;
namespace ts = testing_support;
using Index = Eigen::Index;

TEST_CASE("benjamini_hochberg: hand examples") {
    const BhResult r = benjamini_hochberg({0.01, 0.02, 0.03}, 0.05);
    for (double a : r.adjusted) CHECK(a == doctest::Approx(0.03));
    CHECK(std::all_of(r.selected.begin(), r.selected.end(), [](bool b) { return b; }));
    const BhResult ones = benjamini_hochberg({1.0, 1.0, 1.0}, 0.05);
    for (double a : ones.adjusted) CHECK(a == 1.0);
    CHECK(std::none_of(ones.selected.begin(), ones.selected.end(), [](bool b) { return b; }));
    const BhResult single = benjamini_hochberg({0.04}, 0.05);
    CHECK(single.adjusted[0] == 0.04);
    CHECK(single.selected[0]);
}

TEST_CASE("benjamini_hochberg: monotone in the sorted raw order, equals brute force") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> p(1 + rep % 17);
        for (auto& v : p) v = rep % 3 == 0 ? std::round(u(rng) * 10) / 10 : std::pow(u(rng), 3);
        const BhResult r = benjamini_hochberg(p, 0.1);
        CHECK(r.adjusted == ts::bh_bruteforce(p));
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
        for (std::size_t i = 1; i < order.size(); ++i) CHECK(r.adjusted[order[i]] >= r.adjusted[order[i - 1]]);
    }
}

TEST_CASE("mann_whitney: separated groups and full ties") {
    const auto r = mann_whitney({1, 2, 3}, {4, 5, 6});
    CHECK(r.u == 0.0);
    CHECK(r.p_exact == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.p_normal > 0.05);
    CHECK(r.p_normal < 0.2);
    const auto t = mann_whitney({2, 2, 2}, {2, 2});
    CHECK(t.p_normal == 1.0);
    CHECK(t.p_exact == 1.0);
    const auto big = mann_whitney(std::vector<double>(15, 0.0), std::vector<double>(15, 1.0), 20);
    CHECK(std::isnan(big.p_exact));
}

TEST_CASE("mann_whitney: exact p equals enumeration over relabellings with ties") {
    const std::vector<double> a{1.0, 2.0, 2.0, 5.0}, b{2.0, 3.0, 3.0};
    const auto r = mann_whitney(a, b);
    std::vector<double> all = a;
    all.insert(all.end(), b.begin(), b.end());
    auto u_of = [&](unsigned mask) {
        double u = 0;
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j)
                if ((mask >> i & 1) && !(mask >> j & 1)) u += all[i] > all[j] ? 1.0 : (all[i] == all[j] ? 0.5 : 0.0);
        return u;
    };
    const double mean_u = 4 * 3 / 2.0;
    const double observed = std::abs(u_of(0b0001111) - mean_u);
    int total = 0, extreme = 0;
    for (unsigned mask = 0; mask < 128; ++mask) {
        if (__builtin_popcount(mask) != 4) continue;
        ++total;
        if (std::abs(u_of(mask) - mean_u) >= observed - 1e-9) ++extreme;
    }
    CHECK(r.u == u_of(0b0001111));
    CHECK(r.p_exact == doctest::Approx(static_cast<double>(extreme) / total).epsilon(1e-12));
}

TEST_CASE("logistic_newton: matches the oracle MLE and flags separation") {
    const auto pr = ts::logistic_problem(150, 3, 2, 1.0, 33);
    const LogisticFit fit = logistic_newton(pr.x, pr.y);
    const auto oracle = ts::ridge_logistic_newton(pr.x, pr.y, 0.0, Eigen::VectorXd::Ones(3));
    CHECK(fit.converged);
    CHECK(std::abs(fit.coefficients[0] - oracle.intercept) < 1e-8);
    CHECK((fit.coefficients.tail(3) - oracle.beta).cwiseAbs().maxCoeff() < 1e-8);

    Eigen::MatrixXd x(10, 1);
    Eigen::VectorXd y(10);
    for (Index i = 0; i < 10; ++i) {
        x(i, 0) = static_cast<double>(i);
        y[i] = i < 5 ? 0.0 : 1.0;
    }
    CHECK(!logistic_newton(x, y).converged);
}

TEST_CASE("ols: t statistic equals the residual-sum formula on a six-row fixture") {
    Eigen::MatrixXd x(6, 3);
    x << 30, 0, 1.2, 41, 1, -0.3, 52, 0, 0.8, 38, 1, 2.1, 60, 1, -1.0, 45, 0, 0.1;
    Eigen::VectorXd y(6);
    y << 2.0, 1.1, 2.5, 3.9, 0.7, 1.6;
    const OlsFit fit = ols(x, y);
    Eigen::MatrixXd a(6, 4);
    a.col(0).setOnes();
    a.rightCols(3) = x;
    const Eigen::MatrixXd ata_inv = (a.transpose() * a).inverse();
    const Eigen::VectorXd beta = ata_inv * a.transpose() * y;
    const double rss = (y - a * beta).squaredNorm();
    const double sigma2 = rss / (6 - 4);
    const double t = beta[3] / std::sqrt(sigma2 * ata_inv(3, 3));
    CHECK(fit.df == 2.0);
    CHECK(fit.coefficients[3] == doctest::Approx(beta[3]).epsilon(1e-10));
    CHECK(fit.t[3] == doctest::Approx(t).epsilon(1e-9));
    CHECK(!fit.rank_deficient);

    Eigen::MatrixXd dup = x;
    dup.col(2).setConstant(3.0);
    const OlsFit deficient = ols(dup, y);
    CHECK(deficient.rank_deficient);
    CHECK(deficient.p[3] == 1.0);
}

TEST_CASE("two_sided_normal_p: reference values") {
    CHECK(two_sided_normal_p(0.0) == doctest::Approx(1.0));
    CHECK(two_sided_normal_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(two_sided_normal_p(-1.959963984540054) == doctest::Approx(0.05).epsilon(1e-10));
}
