#include "moenet/epsgo.hpp"

#include "moenet/core_data.hpp"
#include "moenet/error.hpp"
#include "moenet/parallel.hpp"
#include "moenet/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace moenet {

void SearchSpace::validate() const {
    if (dims.empty()) throw InvalidArgument("search space has no dimensions");
    for (const auto& d : dims)
        if (!(d.lower < d.upper) || !std::isfinite(d.lower) || !std::isfinite(d.upper))
            throw InvalidArgument("search dimension '" + d.name + "' needs finite lower < upper");
}

std::vector<double> SearchSpace::to_natural(const Eigen::Ref<const Eigen::VectorXd>& unit) const {
    std::vector<double> out(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto& d = dims[i];
        const double v = d.lower + unit[static_cast<Eigen::Index>(i)] * (d.upper - d.lower);
        out[i] = d.scale == Scale::log2 ? std::exp2(v) : v;
    }
    return out;
}

Eigen::VectorXd SearchSpace::to_unit(const std::vector<double>& natural) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(dims.size()));
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto& d = dims[i];
        const double v = d.scale == Scale::log2 ? std::log2(natural[i]) : natural[i];
        u[static_cast<Eigen::Index>(i)] = (v - d.lower) / (d.upper - d.lower);
    }
    return u;
}

int EpsgoConfig::resolved_init(std::size_t d) const { return init_points.value_or(10 * static_cast<int>(d)); }
int EpsgoConfig::resolved_max(std::size_t d) const { return max_evals.value_or(10 * static_cast<int>(d) + 50); }
double EpsgoConfig::resolved_ei_tol(double q_min) const { return ei_tol.value_or(1e-4 * std::abs(q_min) + 1e-6); }

Eigen::MatrixXd latin_hypercube(std::size_t d, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("latin_hypercube: n must be at least 1");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> perm(n);
    const double dn = static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = static_cast<double>(perm[i]);
            double u = (k + unif(rng)) / dn;
            // Rounding may push u onto a stratum boundary; nudge it back inside.
            while (std::floor(u * dn) > k) u = std::nextafter(u, 0.0);
            while (std::floor(u * dn) < k) u = std::nextafter(u, 1.0);
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = u;
        }
    }
    return out;
}

namespace {

constexpr int kCandidates = 512;
constexpr int kStarts = 8;
constexpr int kRefineSteps = 100;

struct Scored {
    Eigen::VectorXd x;
    double ei;
};

Scored coordinate_search(const GpSurrogate& gp, Scored start, double q_min) {
    const Eigen::Index d = start.x.size();
    double step = 0.05;
    for (int it = 0; it < kRefineSteps && step >= 1e-7; ++it) {
        Scored best = start;
        for (Eigen::Index j = 0; j < d; ++j) {
            for (double sign : {-1.0, 1.0}) {
                Eigen::VectorXd trial = start.x;
                trial[j] = std::clamp(trial[j] + sign * step, 0.0, 1.0);
                if (trial[j] == start.x[j]) continue;
                const double ei = expected_improvement(gp, trial, q_min);
                if (ei > best.ei) best = {std::move(trial), ei};
            }
        }
        if (best.ei > start.ei) {
            start = std::move(best);
            step = std::min(step * 1.5, 0.25);
        } else {
            step *= 0.5;
        }
    }
    return start;
}

}  // namespace

Proposal propose_next(const GpSurrogate& surrogate, const SearchSpace& space, std::uint64_t seed) {
    const std::size_t d = space.size();
    if (surrogate.size() == 0 || static_cast<std::size_t>(surrogate.dims()) != d)
        throw InvalidArgument("propose_next: surrogate does not match the search space");
    const double q_min = surrogate.train_y().minCoeff();
    const Eigen::MatrixXd cand = latin_hypercube(d, kCandidates, seed);

    std::vector<Scored> scored;
    scored.reserve(kCandidates);
    for (Eigen::Index i = 0; i < cand.rows(); ++i) {
        Eigen::VectorXd x = cand.row(i).transpose();
        const double ei = expected_improvement(surrogate, x, q_min);
        scored.push_back({std::move(x), ei});
    }
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].ei > scored[b].ei; });

    Proposal out;
    if (!(scored[order[0]].ei > 0.0)) {
        // Nothing to gain anywhere: explore the emptiest region instead.
        const Eigen::MatrixXd& tx = surrogate.train_x();
        double far = -1.0;
        for (const auto& c : scored) {
            double nearest = std::numeric_limits<double>::infinity();
            for (Eigen::Index r = 0; r < tx.rows(); ++r)
                nearest = std::min(nearest, (tx.row(r).transpose() - c.x).squaredNorm());
            if (nearest > far) {
                far = nearest;
                out.point = c.x;
            }
        }
        out.ei = 0.0;
        out.exploration = true;
        return out;
    }

    Scored best{Eigen::VectorXd(), -1.0};
    for (int s = 0; s < kStarts && s < static_cast<int>(order.size()); ++s) {
        Scored r = coordinate_search(surrogate, scored[order[static_cast<std::size_t>(s)]], q_min);
        if (r.ei > best.ei) best = std::move(r);
    }
    out.point = std::move(best.x);
    out.ei = best.ei;
    return out;
}

EpsgoResult epsgo_minimize(const Objective& objective, const SearchSpace& space, const EpsgoConfig& config) {
    space.validate();
    const std::size_t d = space.size();
    const int init = config.resolved_init(d);
    const int max_evals = config.resolved_max(d);
    if (init < static_cast<int>(d) + 2)
        throw InvalidArgument("epsgo: init_points must be at least D + 2 = " + std::to_string(d + 2));
    if (max_evals <= init) throw InvalidArgument("epsgo: max_evals must exceed init_points");
    if (config.patience < 1) throw InvalidArgument("epsgo: patience must be positive");

    using clock = std::chrono::steady_clock;
    auto evaluate = [&](EpsgoEvaluation& e) {
        const auto t0 = clock::now();
        e.point = space.to_natural(e.unit_point);
        try {
            e.value = objective(e.point);
            if (!std::isfinite(e.value)) {
                e.failed = true;
                e.error = "non-finite objective value";
            }
        } catch (const std::exception& ex) {
            e.failed = true;
            e.error = ex.what();
        }
        if (e.failed) e.value = std::numeric_limits<double>::infinity();
        e.elapsed_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    EpsgoResult res;
    const Eigen::MatrixXd design = latin_hypercube(d, static_cast<std::size_t>(init), derive_seed(config.seed, {0}));
    res.history.resize(static_cast<std::size_t>(init));
    for (int i = 0; i < init; ++i) {
        auto& e = res.history[static_cast<std::size_t>(i)];
        e.index = i;
        e.unit_point = design.row(i).transpose();
        e.ei = std::numeric_limits<double>::quiet_NaN();
    }
    parallel_for(res.history.size(), [&](std::size_t i) { evaluate(res.history[i]); });

    auto too_many_failures = [&] {
        return 2 * res.failures > static_cast<int>(res.history.size());
    };
    auto abort = [&] {
        std::string first;
        for (const auto& e : res.history)
            if (e.failed) {
                first = e.error;
                break;
            }
        throw OptimizerError("epsgo: " + std::to_string(res.failures) + " of " + std::to_string(res.history.size()) +
                             " objective evaluations failed; first failure: " + first);
    };

    std::vector<Eigen::Index> good;
    for (const auto& e : res.history) {
        if (e.failed)
            ++res.failures;
        else
            good.push_back(e.index);
    }
    if (too_many_failures() || good.size() < 2) abort();

    Eigen::MatrixXd gx(static_cast<Eigen::Index>(good.size()), static_cast<Eigen::Index>(d));
    Eigen::VectorXd gy(static_cast<Eigen::Index>(good.size()));
    for (std::size_t i = 0; i < good.size(); ++i) {
        gx.row(static_cast<Eigen::Index>(i)) = res.history[static_cast<std::size_t>(good[i])].unit_point.transpose();
        gy[static_cast<Eigen::Index>(i)] = res.history[static_cast<std::size_t>(good[i])].value;
    }
    GpSurrogate gp = gp_fit(gx, gy);

    auto update_best = [&](const EpsgoEvaluation& e) {
        if (!e.failed && (res.best_index < 0 || e.value < res.best_value)) {
            res.best_value = e.value;
            res.best_index = e.index;
            return true;
        }
        return false;
    };
    for (const auto& e : res.history) update_best(e);

    int stale = 0;
    res.stop_reason = "max_evals";
    while (static_cast<int>(res.history.size()) < max_evals) {
        const int idx = static_cast<int>(res.history.size());
        const Proposal prop = propose_next(gp, space, derive_seed(config.seed, {1, static_cast<std::uint64_t>(idx)}));
        if (!prop.exploration && prop.ei < config.resolved_ei_tol(res.best_value)) {
            res.stop_reason = "ei_below_tol";
            break;
        }
        EpsgoEvaluation e;
        e.index = idx;
        e.unit_point = prop.point;
        e.ei = prop.ei;
        e.exploration = prop.exploration;
        evaluate(e);
        res.history.push_back(e);
        if (e.failed) {
            ++res.failures;
            if (too_many_failures()) abort();
            ++stale;
        } else {
            gp = gp_update(gp, e.unit_point, e.value);
            stale = update_best(e) ? 0 : stale + 1;
        }
        if (stale >= config.patience) {
            res.stop_reason = "patience";
            break;
        }
    }

    const auto& best = res.history[static_cast<std::size_t>(res.best_index)];
    res.best_point = best.point;
    res.best_unit = best.unit_point;
    res.flat_surface = true;
    for (const auto& e : res.history)
        if (!e.failed && e.value != res.best_value) res.flat_surface = false;
    return res;
}

nlohmann::ordered_json to_json(const EpsgoResult& result, const SearchSpace& space) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json best;
    for (std::size_t i = 0; i < space.size(); ++i) best[space.dims[i].name] = result.best_point[i];
    j["best_point"] = best;
    j["best_value"] = result.best_value;
    j["best_index"] = result.best_index;
    j["stop_reason"] = result.stop_reason;
    j["failures"] = result.failures;
    j["flat_surface"] = result.flat_surface;
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& e : result.history) {
        nlohmann::ordered_json h;
        h["eval_index"] = e.index;
        nlohmann::ordered_json pt;
        for (std::size_t i = 0; i < space.size(); ++i) pt[space.dims[i].name] = e.point[i];
        h["point"] = pt;
        if (e.failed)
            h["value"] = nullptr;
        else
            h["value"] = e.value;
        if (std::isnan(e.ei))
            h["ei"] = nullptr;
        else
            h["ei"] = e.ei;
        h["exploration"] = e.exploration;
        if (e.failed) h["error"] = e.error;
        hist.push_back(std::move(h));
    }
    j["history"] = std::move(hist);
    return j;
}

std::string history_csv(const EpsgoResult& result, const SearchSpace& space) {
    std::ostringstream out;
    out << "eval_index";
    for (const auto& d : space.dims) out << ',' << d.name;
    out << ",value,ei,elapsed_ms\n";
    for (const auto& e : result.history) {
        out << e.index;
        for (double v : e.point) out << ',' << format_double(v);
        out << ',' << (e.failed ? std::string("inf") : format_double(e.value)) << ','
            << (std::isnan(e.ei) ? std::string("NA") : format_double(e.ei)) << ',' << format_double(e.elapsed_ms)
            << '\n';
    }
    return out.str();
}

}  // namespace moenet
