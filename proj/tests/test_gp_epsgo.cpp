#include "doctest.h"
#include "support.hpp"

#include "moenet/epsgo.hpp"
#include "moenet/error.hpp"
#include "moenet/gp.hpp"

#include <numbers>
#include <set>

using namespace moenet;
namespace ts = testing_support;
using Index = Eigen::Index;

namespace {

double branin_unit(const std::vector<double>& u) {
    const double x1 = -5.0 + 15.0 * u[0], x2 = 15.0 * u[1];
    const double b = 5.1 / (4 * std::numbers::pi * std::numbers::pi), c = 5 / std::numbers::pi;
    const double t = 1 / (8 * std::numbers::pi);
    return std::pow(x2 - b * x1 * x1 + c * x1 - 6, 2) + 10 * (1 - t) * std::cos(x1) + 10;
}

SearchSpace unit_space(std::size_t d) {
    SearchSpace s;
    for (std::size_t i = 0; i < d; ++i) s.dims.push_back({"x" + std::to_string(i), 0.0, 1.0, Scale::linear});
    return s;
}

}  // namespace

TEST_CASE("latin_hypercube: one sample per stratum, deterministic") {
    for (std::size_t d : {1u, 3u, 5u}) {
        for (std::size_t n : {1u, 4u, 30u, 100u}) {
            const Eigen::MatrixXd m = latin_hypercube(d, n, 1000 + n);
            for (std::size_t j = 0; j < d; ++j) {
                std::vector<int> hist(n, 0);
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = m(static_cast<Index>(i), static_cast<Index>(j));
                    REQUIRE(v >= 0.0);
                    REQUIRE(v < 1.0);
                    hist[static_cast<std::size_t>(std::floor(v * static_cast<double>(n)))]++;
                }
                for (int h : hist) CHECK(h == 1);
            }
        }
    }
    CHECK(latin_hypercube(3, 30, 5) == latin_hypercube(3, 30, 5));
    CHECK(latin_hypercube(3, 30, 5) != latin_hypercube(3, 30, 6));
}

TEST_CASE("SearchSpace: log2 scale and validation") {
    SearchSpace s;
    s.dims = {{"alpha", 0.01, 1.0, Scale::linear}, {"ratio", -3.0, 3.0, Scale::log2}};
    const auto nat = s.to_natural(Eigen::Vector2d(0.0, 0.5));
    CHECK(nat[0] == doctest::Approx(0.01));
    CHECK(nat[1] == doctest::Approx(1.0));
    const auto hi = s.to_natural(Eigen::Vector2d(1.0, 1.0));
    CHECK(hi[1] == doctest::Approx(8.0));
    CHECK((s.to_unit(hi) - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-12);
    SearchSpace bad;
    bad.dims = {{"x", 1.0, 1.0, Scale::linear}};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    CHECK_THROWS_AS(SearchSpace{}.validate(), InvalidArgument);
}

TEST_CASE("gp_fit: interpolation and noise shrinkage") {
    Eigen::MatrixXd x(2, 1);
    x << 0.2, 0.7;
    Eigen::VectorXd y(2);
    y << 1.0, 3.0;
    const double var = 1.0;  // population variance of y
    GpConfig exact;
    exact.hyper = GpHyper{10.0 * var, 0.3, 1e-6 * var};
    const GpSurrogate g = gp_fit(x, y, exact);
    CHECK(std::abs(g.mean(Eigen::VectorXd::Constant(1, 0.2)) - 1.0) < 1e-6);
    CHECK(std::abs(g.mean(Eigen::VectorXd::Constant(1, 0.7)) - 3.0) < 1e-6);
    GpConfig noisy;
    noisy.hyper = GpHyper{var, 0.3, 100.0};
    const GpSurrogate n = gp_fit(x, y, noisy);
    CHECK(std::abs(n.mean(Eigen::VectorXd::Constant(1, 0.7)) - n.y_mean()) < 0.05);
    CHECK_THROWS_AS(gp_fit(x.topRows(1), y.head(1)), InvalidArgument);
}

TEST_CASE("gp_fit: tuned hyperparameters lie on the grid") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd x = latin_hypercube(2, 20, 9);
    Eigen::VectorXd y(20);
    for (Index i = 0; i < 20; ++i) y[i] = std::sin(6 * x(i, 0)) + x(i, 1);
    const GpSurrogate g = gp_fit(x, y);
    const double var = (y.array() - y.mean()).square().mean();
    const double s = g.hyper().signal_var / var;
    CHECK((std::abs(s - 0.1) < 1e-12 || std::abs(s - 1) < 1e-12 || std::abs(s - 10) < 1e-12));
    CHECK(g.hyper().length_scale >= 0.05 - 1e-12);
    CHECK(g.hyper().length_scale <= 2.0 + 1e-12);
    // Posterior variance at training points is at most the noise variance.
    for (Index i = 0; i < 20; ++i)
        CHECK(g.variance(x.row(i).transpose()) <= g.hyper().noise_var + g.jitter() + 1e-8);
}

TEST_CASE("gp_update equals the batch posterior at every trace length") {
    const Eigen::MatrixXd pts = latin_hypercube(2, 60, 77);
    Eigen::VectorXd vals(60);
    for (Index i = 0; i < 60; ++i) vals[i] = branin_unit({pts(i, 0), pts(i, 1)}) / 100.0;
    const Eigen::MatrixXd queries = latin_hypercube(2, 50, 78);
    GpSurrogate g = gp_fit(pts.topRows(3), vals.head(3));
    for (Index m = 3; m <= 60; ++m) {
        if (m > 3) g = gp_update(g, pts.row(m - 1).transpose(), vals[m - 1]);
        const ts::BatchPosterior batch(g.train_x(), g.train_y(), g.hyper().signal_var, g.hyper().length_scale,
                                       g.hyper().noise_var + g.jitter(), g.y_mean());
        double worst = 0.0;
        for (Index q = 0; q < 50; ++q) {
            const auto [mu, var] = g.predict(queries.row(q).transpose());
            const auto [bm, bv] = batch.at(queries.row(q).transpose());
            worst = std::max({worst, std::abs(mu - bm), std::abs(var - bv)});
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("gp_update: duplicate point leaves the posterior unchanged, far point is matched") {
    const Eigen::MatrixXd pts = latin_hypercube(1, 6, 4);
    Eigen::VectorXd vals(6);
    for (Index i = 0; i < 6; ++i) vals[i] = std::pow(pts(i, 0) - 0.3, 2);
    GpConfig cfg;
    cfg.hyper = GpHyper{1.0, 0.08, 1e-9};
    cfg.retune_every = 0;
    const GpSurrogate g = gp_fit(pts, vals, cfg);
    const GpSurrogate d = gp_update(g, pts.row(2).transpose(), vals[2]);
    for (double q = 0.0; q <= 1.0; q += 0.05) {
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, q);
        CHECK(std::abs(g.mean(v) - d.mean(v)) < 1e-8);
    }
    Eigen::MatrixXd two(2, 2);
    two << 0.0, 0.0, 0.1, 0.0;
    GpConfig c2;
    c2.hyper = GpHyper{1.0, 0.1, 1e-6};
    c2.retune_every = 0;
    const GpSurrogate base = gp_fit(two, Eigen::Vector2d(0.0, 0.1), c2);
    const GpSurrogate far = gp_update(base, Eigen::Vector2d(1.0, 1.0), 5.0);
    CHECK(std::abs(far.mean(Eigen::Vector2d(1.0, 1.0)) - 5.0) < 1e-4);
}

TEST_CASE("gp: constant observations give a degenerate surrogate") {
    const Eigen::MatrixXd x = latin_hypercube(2, 5, 1);
    const GpSurrogate g = gp_fit(x, Eigen::VectorXd::Constant(5, 0.3));
    CHECK(g.degenerate());
    CHECK(g.mean(Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(0.3));
    CHECK(expected_improvement(g, Eigen::Vector2d(0.5, 0.5), 0.3) == 0.0);
}

TEST_CASE("expected improvement: closed form and limits") {
    CHECK(expected_improvement(0.5, 1.0, 0.5) == doctest::Approx(0.3989422804).epsilon(1e-10));
    CHECK(expected_improvement(0.6, 0.0, 0.5) == 0.0);
    CHECK(expected_improvement(0.6, 1e-13, 0.5) == 0.0);
    CHECK(expected_improvement(0.4, 0.0, 0.5) == doctest::Approx(0.1));
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = 1'000'000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = std::max(0.25 - (0.2 + 0.1 * z(rng)), 0.0);
        s += v;
        s2 += v * v;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(expected_improvement(0.2, 0.1, 0.25) - mean) < 3 * se);
}

TEST_CASE("propose_next: near the dense-grid EI argmax, deterministic") {
    Eigen::MatrixXd x(6, 1);
    x << 0.05, 0.25, 0.45, 0.6, 0.8, 0.95;
    Eigen::VectorXd y(6);
    for (Index i = 0; i < 6; ++i) y[i] = std::pow(x(i, 0) - 0.52, 2);
    const GpSurrogate g = gp_fit(x, y);
    const double q_min = y.minCoeff();
    double best = -1.0, arg = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double q = (i + 0.5) / 10000.0;
        const double ei = expected_improvement(g, Eigen::VectorXd::Constant(1, q), q_min);
        if (ei > best) best = ei, arg = q;
    }
    const SearchSpace space = unit_space(1);
    const Proposal p = propose_next(g, space, 5);
    CHECK(std::abs(p.point[0] - arg) < 0.05);
    CHECK(p.ei >= 0.0);
    CHECK(!p.exploration);
    const Proposal again = propose_next(g, space, 5);
    CHECK(again.point == p.point);
    // EI at the incumbent never exceeds the maximum.
    CHECK(expected_improvement(g, x.row(2).transpose(), q_min) <= p.ei + 1e-12);
}

TEST_CASE("propose_next: zero-variance observations fall back to exploration") {
    const Eigen::MatrixXd x = latin_hypercube(2, 6, 2);
    const GpSurrogate g = gp_fit(x, Eigen::VectorXd::Constant(6, 1.0));
    const Proposal p = propose_next(g, unit_space(2), 3);
    CHECK(p.exploration);
    CHECK(p.ei == 0.0);
}

TEST_CASE("epsgo_minimize: quadratic, constant and failing objectives") {
    EpsgoConfig cfg;
    cfg.seed = 1;
    cfg.max_evals = 25;
    int calls = 0;
    const auto quad = epsgo_minimize(
        [&](const std::vector<double>& p) {
            ++calls;
            return std::pow(p[0] - 0.3, 2);
        },
        unit_space(1), cfg);
    CHECK(std::abs(quad.best_point[0] - 0.3) < 0.02);
    CHECK(calls <= 25);
    CHECK(static_cast<int>(quad.history.size()) == calls);
    double min_seen = 1e300;
    for (const auto& e : quad.history) min_seen = std::min(min_seen, e.value);
    CHECK(quad.best_value == min_seen);
    for (int i = 0; i < 10; ++i) CHECK(std::isnan(quad.history[static_cast<std::size_t>(i)].ei));

    EpsgoConfig flat_cfg;
    flat_cfg.seed = 2;
    const auto flat = epsgo_minimize([](const std::vector<double>&) { return 0.25; }, unit_space(2), flat_cfg);
    CHECK(flat.best_value == 0.25);
    CHECK(flat.flat_surface);
    CHECK(flat.stop_reason != "max_evals");

    EpsgoConfig fail_cfg;
    fail_cfg.seed = 3;
    const auto some = epsgo_minimize(
        [](const std::vector<double>& p) {
            if (p[0] > 0.8) throw Error("bad region");
            return std::pow(p[0] - 0.3, 2);
        },
        unit_space(1), fail_cfg);
    CHECK(some.failures > 0);
    CHECK(std::abs(some.best_point[0] - 0.3) < 0.05);
    for (const auto& e : some.history)
        if (e.failed) CHECK(std::isinf(e.value));

    CHECK_THROWS_AS(epsgo_minimize([](const std::vector<double>&) -> double { throw Error("always"); }, unit_space(1),
                                   fail_cfg),
                    OptimizerError);
}

TEST_CASE("epsgo_minimize: deterministic history and export") {
    EpsgoConfig cfg;
    cfg.seed = 9;
    cfg.max_evals = 26;
    auto f = [](const std::vector<double>& p) { return branin_unit(p); };
    const auto a = epsgo_minimize(f, unit_space(2), cfg);
    const auto b = epsgo_minimize(f, unit_space(2), cfg);
    CHECK(to_json(a, unit_space(2)).dump() == to_json(b, unit_space(2)).dump());
    const std::string csv = history_csv(a, unit_space(2));
    CHECK(csv.rfind("eval_index,x0,x1,value,ei,elapsed_ms\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == a.history.size() + 1);
}
