#include "moenet/enet.hpp"

#include "moenet/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace moenet {

namespace {

constexpr double kMinIrlsWeight = 1e-5;
constexpr double kSeparationEta = 30.0;

double log1pexp(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double soft_threshold(double u, double t) {
    if (u > t) return u - t;
    if (u < -t) return u + t;
    return 0.0;
}

/// Per-column l1 / l2 penalty strengths for one (lambda, alpha, weights) triple.
struct Penalties {
    Eigen::VectorXd l1;
    Eigen::VectorXd l2;
    Eigen::VectorXd weights;

    Penalties(const EnetConfig& config, Index p) {
        weights = resolve_weights(config, p);
        const Eigen::VectorXd a = resolve_feature_alpha(config, p);
        l1 = config.lambda * weights.cwiseProduct(a);
        l2 = config.lambda * weights.cwiseProduct((1.0 - a.array()).matrix());
    }
};

double mean_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) s += log1pexp(eta[i]) - y[i] * eta[i];
    return s / static_cast<double>(y.size());
}

double penalty_value(const Penalties& pen, const Eigen::VectorXd& beta) {
    return pen.l1.dot(beta.cwiseAbs()) + 0.5 * pen.l2.dot(beta.cwiseAbs2());
}

void linear_predictor(const Eigen::MatrixXd& x, double b0, const Eigen::VectorXd& beta, Eigen::VectorXd& eta) {
    eta.setConstant(x.rows(), b0);
    for (Index j = 0; j < beta.size(); ++j)
        if (beta[j] != 0.0) eta.noalias() += beta[j] * x.col(j);
}

// Gradient of the mean negative log-likelihood; returns the intercept component.
double loss_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& eta, Eigen::VectorXd& g) {
    const double n = static_cast<double>(y.size());
    Eigen::VectorXd resid(y.size());
    for (Index i = 0; i < y.size(); ++i) resid[i] = logistic(eta[i]) - y[i];
    g.noalias() = x.transpose() * resid;
    g /= n;
    return resid.sum() / n;
}

double coordinate_kkt(const Penalties& pen, const Eigen::VectorXd& g, const Eigen::VectorXd& beta, Index j) {
    if (beta[j] != 0.0) return std::abs(g[j] + pen.l2[j] * beta[j] + pen.l1[j] * (beta[j] > 0 ? 1.0 : -1.0));
    return std::max(0.0, std::abs(g[j]) - pen.l1[j]);
}

double kkt_residual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Penalties& pen, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& beta, const std::vector<char>* frozen) {
    Eigen::VectorXd g;
    double worst = std::abs(loss_gradient(x, y, eta, g));
    for (Index j = 0; j < beta.size(); ++j)
        if (!(frozen && (*frozen)[j])) worst = std::max(worst, coordinate_kkt(pen, g, beta, j));
    return worst;
}

class Solver {
public:
    Solver(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config, const std::vector<char>* frozen)
        : x_(x), y_(y), cfg_(config), pen_(config, x.cols()), frozen_(frozen), n_(x.rows()), p_(x.cols()) {}

    EnetFit run(const EnetFit* warm) {
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p_);
        double b0 = 0.0;
        double previous_lambda = cfg_.lambda;
        if (warm && warm->ok() && warm->coefficients.size() == p_) {
            beta = warm->coefficients;
            b0 = warm->intercept;
            previous_lambda = std::max(warm->lambda, cfg_.lambda);
            if (frozen_)
                for (Index j = 0; j < p_; ++j)
                    if ((*frozen_)[j]) beta[j] = 0.0;
        } else {
            const double ybar = y_.mean();
            b0 = std::log(ybar / (1.0 - ybar));
        }

        Eigen::VectorXd eta(n_);
        linear_predictor(x_, b0, beta, eta);
        double f = objective(eta, beta);
        check_finite(f);

        // Working set: unpenalised and nonzero columns plus those passing the
        // sequential strong rule. Columns outside it stay at zero until a full
        // gradient check shows they violate stationarity.
        Eigen::VectorXd grad;
        loss_gradient(x_, y_, eta, grad);
        in_set_.assign(static_cast<std::size_t>(p_), 0);
        working_.clear();
        const double gap = previous_lambda - cfg_.lambda;
        for (Index j = 0; j < p_; ++j) {
            if (!is_free(j)) continue;
            const double screen = pen_.l1[j] - gap * (cfg_.lambda > 0 ? pen_.l1[j] / cfg_.lambda : 0.0);
            if (pen_.l1[j] == 0.0 || beta[j] != 0.0 || std::abs(grad[j]) >= screen) add_to_set(j);
        }

        EnetFit fit;
        fit.objective_trace.push_back(f);
        const double kkt_tol = cfg_.tol * std::max(1.0, cfg_.lambda);
        const bool no_l1 = pen_.l1.size() == 0 || pen_.l1.maxCoeff() <= 0.0;
        // Inner sweeps stop once no coordinate moves its gradient by more than
        // this; a stall with the KKT bound unmet tightens it.
        double inner_tol = 0.1 * kkt_tol;

        Eigen::VectorXd w(n_), r(n_), beta_old, eta_new(n_);
        for (int it = 0; it < cfg_.max_outer_iter; ++it) {
            fit.outer_iterations = it + 1;
            for (Index i = 0; i < n_; ++i) {
                const double pr = logistic(eta[i]);
                w[i] = std::max(pr * (1.0 - pr), kMinIrlsWeight);
                r[i] = (y_[i] - pr) / w[i];
            }
            beta_old = beta;
            const double b0_old = b0;
            coordinate_descent(w, r, b0, beta, inner_tol);

            linear_predictor(x_, b0, beta, eta_new);
            double f_new = objective(eta_new, beta);
            // Step halving keeps the penalised objective monotone; the
            // quadratic-model step is a descent direction of the convex objective.
            double t = 1.0;
            const Eigen::VectorXd beta_step = beta - beta_old;
            const double b0_step = b0 - b0_old;
            const double slack = 1e-13 * std::max(1.0, std::abs(f));
            for (int h = 0; h < 50 && !(f_new <= f + slack); ++h) {
                t *= 0.5;
                beta = beta_old + t * beta_step;
                b0 = b0_old + t * b0_step;
                linear_predictor(x_, b0, beta, eta_new);
                f_new = objective(eta_new, beta);
            }
            if (!(f_new <= f + slack)) {
                beta = beta_old;
                b0 = b0_old;
                linear_predictor(x_, b0, beta, eta_new);
                f_new = f;
            }
            check_finite(f_new);
            eta.swap(eta_new);
            f = f_new;
            fit.objective_trace.push_back(f);

            if (no_l1 && (eta.array().abs() > kSeparationEta).all()) {
                fit.separation_warning = true;
                break;
            }

            double kkt = std::abs(loss_gradient(x_, y_, eta, grad));
            bool grew = false;
            for (Index j = 0; j < p_; ++j) {
                if (!is_free(j)) continue;
                const double v = coordinate_kkt(pen_, grad, beta, j);
                kkt = std::max(kkt, v);
                if (!in_set_[static_cast<std::size_t>(j)] && v > 0.0) {
                    add_to_set(j);
                    grew = true;
                }
            }
            if (kkt <= kkt_tol) {
                fit.converged = true;
                break;
            }
            // A stalled step with an unmet bound means the inner solves were too loose.
            if (!grew && (t < 1.0 || (beta - beta_old).cwiseAbs().maxCoeff() < inner_tol))
                inner_tol = std::max(1e-15, inner_tol * 0.1);
        }

        // Newton steps on separable data grow the margin only slowly, so a
        // stalled fit that classifies every row correctly is flagged too.
        if (no_l1 && !fit.converged && !fit.separation_warning) {
            bool separated = true;
            for (Index i = 0; i < n_ && separated; ++i) separated = (2.0 * y_[i] - 1.0) * eta[i] > 0.0;
            fit.separation_warning = separated;
        }

        fit.intercept = b0;
        fit.coefficients = std::move(beta);
        fit.alpha = cfg_.alpha;
        fit.lambda = cfg_.lambda;
        fit.objective = f;
        fit.n_nonzero = 0;
        for (Index j = 0; j < p_; ++j)
            if (pen_.weights[j] > 0 && fit.coefficients[j] != 0.0) ++fit.n_nonzero;
        return fit;
    }

private:
    double objective(const Eigen::VectorXd& eta, const Eigen::VectorXd& beta) const {
        return mean_loss(y_, eta) + penalty_value(pen_, beta);
    }

    static void check_finite(double f) {
        if (!std::isfinite(f)) throw SolverError("solver: non-finite objective");
    }

    bool is_free(Index j) const { return !(frozen_ && (*frozen_)[j]); }

    void add_to_set(Index j) {
        in_set_[static_cast<std::size_t>(j)] = 1;
        working_.push_back(j);
    }

    // Penalised weighted least squares around the current IRLS point, over
    // the working set. `r` holds the working residual z - eta.
    void coordinate_descent(const Eigen::VectorXd& w, Eigen::VectorXd& r, double& b0, Eigen::VectorXd& beta,
                            double inner_tol) {
        const double n = static_cast<double>(n_);
        const double wsum = w.sum() / n;
        std::sort(working_.begin(), working_.end());
        xv_.assign(static_cast<std::size_t>(p_), -1.0);

        auto update_intercept = [&]() {
            const double d = w.dot(r) / (wsum * n);
            if (d != 0.0) {
                r.array() -= d;
                b0 += d;
            }
            return wsum * std::abs(d);
        };

        auto sweep = [&](const std::vector<Index>& cols) {
            double worst = update_intercept();
            for (Index j : cols) {
                const auto xj = x_.col(j);
                double& v = xv_[static_cast<std::size_t>(j)];
                if (v < 0.0) {
                    v = xj.cwiseAbs2().dot(w) / n;
                    if (!std::isfinite(v))
                        throw SolverError("solver: curvature of column " + std::to_string(j) + " is not finite");
                }
                const double denom = v + pen_.l2[j];
                if (denom <= 0.0) continue;
                const double g = xj.cwiseProduct(w).dot(r) / n;
                const double old = beta[j];
                const double updated = soft_threshold(g + v * old, pen_.l1[j]) / denom;
                if (updated != old) {
                    const double d = updated - old;
                    beta[j] = updated;
                    r.noalias() -= d * xj;
                    worst = std::max(worst, v * std::abs(d));
                }
            }
            return worst;
        };

        int budget = cfg_.max_inner_iter;
        std::vector<Index> active;
        while (budget-- > 0) {
            if (sweep(working_) < inner_tol) break;
            active.clear();
            for (Index j : working_)
                if (beta[j] != 0.0 || pen_.l1[j] == 0.0) active.push_back(j);
            active_set_step(w, r, b0, beta, active);
            while (budget-- > 0)
                if (sweep(active) < inner_tol) break;
        }
    }

    // Exact minimiser of the weighted quadratic over `active` with the signs
    // of the current coefficients held fixed. Cyclic sweeps crawl when the
    // IRLS weights are badly scaled (near-separated fits); this jumps there
    // directly. A step that would flip a sign stops at the first zero.
    void active_set_step(const Eigen::VectorXd& w, Eigen::VectorXd& r, double& b0, Eigen::VectorXd& beta,
                         const std::vector<Index>& active) {
        const Index k = static_cast<Index>(active.size());
        if (k == 0 || k + 1 > n_) return;
        const double n = static_cast<double>(n_);
        xa_.resize(n_, k + 1);
        xa_.col(0).setOnes();
        for (Index a = 0; a < k; ++a) xa_.col(a + 1) = x_.col(active[static_cast<std::size_t>(a)]);
        const Eigen::MatrixXd wx = w.asDiagonal() * xa_;
        Eigen::MatrixXd h = xa_.transpose() * wx / n;
        Eigen::VectorXd rhs = wx.transpose() * r / n;
        for (Index a = 0; a < k; ++a) {
            const Index j = active[static_cast<std::size_t>(a)];
            h(a + 1, a + 1) += pen_.l2[j];
            rhs[a + 1] -= pen_.l2[j] * beta[j] + (beta[j] > 0 ? pen_.l1[j] : (beta[j] < 0 ? -pen_.l1[j] : 0.0));
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
        const Eigen::VectorXd delta = ldlt.solve(rhs);
        if (!delta.allFinite()) return;

        double t = 1.0;
        Index blocking = -1;
        for (Index a = 0; a < k; ++a) {
            const Index j = active[static_cast<std::size_t>(a)];
            if (pen_.l1[j] == 0.0) continue;
            const double next = beta[j] + delta[a + 1];
            if (next * beta[j] <= 0.0) {
                const double reach = beta[j] / -delta[a + 1];
                if (reach < t) {
                    t = reach;
                    blocking = a;
                }
            }
        }
        Eigen::VectorXd change = t * delta;
        b0 += change[0];
        for (Index a = 0; a < k; ++a) {
            double& b = beta[active[static_cast<std::size_t>(a)]];
            if (a == blocking) change[a + 1] = -b;
            b += change[a + 1];
        }
        if (blocking >= 0) beta[active[static_cast<std::size_t>(blocking)]] = 0.0;
        r.noalias() -= xa_ * change;
    }

    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& y_;
    const EnetConfig& cfg_;
    Penalties pen_;
    const std::vector<char>* frozen_;
    Index n_;
    Index p_;
    std::vector<char> in_set_;
    std::vector<Index> working_;
    std::vector<double> xv_;
    Eigen::MatrixXd xa_;
};

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config) {
    if (x.rows() != y.size()) throw InvalidArgument("fit_enet: design rows and response length differ");
    if (y.size() == 0) throw InvalidArgument("fit_enet: empty data");
    if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) throw InvalidArgument("fit_enet: alpha must lie in [0,1]");
    if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda))
        throw InvalidArgument("fit_enet: lambda must be finite and nonnegative");
    if (!(config.tol > 0.0)) throw InvalidArgument("fit_enet: tol must be positive");
    const double ones = y.sum();
    if (ones <= 0.0 || ones >= static_cast<double>(y.size()))
        throw FoldDegenerate("fit_enet: response contains a single class");
}

}  // namespace

std::vector<Index> EnetFit::selected(const Eigen::VectorXd& penalty_weights) const {
    std::vector<Index> out;
    for (Index j = 0; j < coefficients.size(); ++j)
        if (penalty_weights[j] > 0 && coefficients[j] != 0.0) out.push_back(j);
    return out;
}

double logistic(double eta) {
    if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double predict_proba(const EnetFit& fit, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != fit.coefficients.size()) throw InvalidArgument("predict_proba: dimension mismatch");
    return logistic(fit.intercept + fit.coefficients.dot(x));
}

Eigen::VectorXd predict_proba_rows(const EnetFit& fit, const Eigen::MatrixXd& x) {
    if (x.cols() != fit.coefficients.size()) throw InvalidArgument("predict_proba: dimension mismatch");
    Eigen::VectorXd eta;
    linear_predictor(x, fit.intercept, fit.coefficients, eta);
    return eta.unaryExpr([](double e) { return logistic(e); });
}

Eigen::VectorXd resolve_weights(const EnetConfig& config, Index p) {
    if (config.penalty_weights.size() == 0) return Eigen::VectorXd::Ones(p);
    if (config.penalty_weights.size() != p) throw InvalidArgument("penalty_weights length does not match columns");
    for (Index j = 0; j < p; ++j)
        if (!(config.penalty_weights[j] >= 0.0) || !std::isfinite(config.penalty_weights[j]))
            throw InvalidArgument("penalty weights must be finite and nonnegative");
    return config.penalty_weights;
}

Eigen::VectorXd resolve_feature_alpha(const EnetConfig& config, Index p) {
    if (config.feature_alpha.size() == 0) return Eigen::VectorXd::Constant(p, config.alpha);
    if (config.feature_alpha.size() != p) throw InvalidArgument("feature_alpha length does not match columns");
    for (Index j = 0; j < p; ++j)
        if (!(config.feature_alpha[j] >= 0.0 && config.feature_alpha[j] <= 1.0))
            throw InvalidArgument("feature_alpha entries must lie in [0,1]");
    return config.feature_alpha;
}

double enet_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config, double intercept,
                      const Eigen::VectorXd& coefficients) {
    Penalties pen(config, x.cols());
    Eigen::VectorXd eta;
    linear_predictor(x, intercept, coefficients, eta);
    return mean_loss(y, eta) + penalty_value(pen, coefficients);
}

double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config, const EnetFit& fit) {
    Penalties pen(config, x.cols());
    Eigen::VectorXd eta;
    linear_predictor(x, fit.intercept, fit.coefficients, eta);
    return kkt_residual(x, y, pen, eta, fit.coefficients, nullptr);
}

EnetFit fit_enet(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config,
                 const EnetFit* warm_start) {
    check_inputs(x, y, config);
    Solver solver(x, y, config, nullptr);
    return solver.run(warm_start);
}

EnetFit fit_enet(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config,
                 const EnetFit* warm_start) {
    EnetConfig c = config;
    if (c.penalty_weights.size() == 0) c.penalty_weights = stack.default_penalty_weights();
    return fit_enet(stack.matrix(), y.labels, c, warm_start);
}

double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config) {
    check_inputs(x, y, config);
    const Index p = x.cols();
    const Eigen::VectorXd w = resolve_weights(config, p);
    const Eigen::VectorXd a = resolve_feature_alpha(config, p);

    std::vector<char> frozen(static_cast<std::size_t>(p), 0);
    bool any_unpenalised = false;
    for (Index j = 0; j < p; ++j) {
        frozen[static_cast<std::size_t>(j)] = w[j] > 0 ? 1 : 0;
        any_unpenalised = any_unpenalised || w[j] == 0;
    }

    Eigen::VectorXd eta;
    if (any_unpenalised) {
        EnetConfig null_cfg = config;
        null_cfg.lambda = 0.0;
        Solver solver(x, y, null_cfg, &frozen);
        EnetFit null_fit = solver.run(nullptr);
        linear_predictor(x, null_fit.intercept, null_fit.coefficients, eta);
    } else {
        const double ybar = y.mean();
        eta.setConstant(y.size(), std::log(ybar / (1.0 - ybar)));
    }
    Eigen::VectorXd resid(y.size());
    for (Index i = 0; i < y.size(); ++i) resid[i] = logistic(eta[i]) - y[i];
    const Eigen::VectorXd g = x.transpose() * resid / static_cast<double>(y.size());

    double lmax = 0.0;
    for (Index j = 0; j < p; ++j)
        if (w[j] > 0) lmax = std::max(lmax, std::abs(g[j]) / (std::max(a[j], 1e-3) * w[j]));
    if (!std::isfinite(lmax)) throw SolverError("lambda_max: gradient at the null model is not finite");
    // Relative margin so that rounding in the solver cannot leave a tiny
    // nonzero coefficient at exactly lambda_max.
    return lmax * (1.0 + 1e-12);
}

double lambda_max(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config) {
    EnetConfig c = config;
    if (c.penalty_weights.size() == 0) c.penalty_weights = stack.default_penalty_weights();
    return lambda_max(stack.matrix(), y.labels, c);
}

std::vector<double> lambda_grid(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config) {
    if (config.path_length < 1) throw InvalidArgument("path_length must be at least 1");
    const double lmax = lambda_max(x, y, config);
    if (lmax <= 0.0) return {0.0};
    const double ratio = config.lambda_min_ratio.value_or(x.rows() < x.cols() ? 1e-2 : 1e-4);
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("lambda_min_ratio must lie in (0,1)");
    std::vector<double> grid(static_cast<std::size_t>(config.path_length));
    const double step = config.path_length > 1 ? std::log(ratio) / (config.path_length - 1) : 0.0;
    for (int k = 0; k < config.path_length; ++k) grid[static_cast<std::size_t>(k)] = lmax * std::exp(step * k);
    grid.front() = lmax;
    return grid;
}

std::vector<EnetFit> fit_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config,
                              const std::vector<double>& lambdas) {
    check_inputs(x, y, config);
    std::vector<EnetFit> path;
    path.reserve(lambdas.size());
    const EnetFit* warm = nullptr;
    for (double lam : lambdas) {
        EnetConfig c = config;
        c.lambda = lam;
        try {
            path.push_back(fit_enet(x, y, c, warm));
        } catch (const Error& e) {
            EnetFit failed;
            failed.alpha = c.alpha;
            failed.lambda = lam;
            failed.error = e.what();
            path.push_back(std::move(failed));
        }
        if (path.back().ok()) warm = &path.back();
    }
    return path;
}

std::vector<EnetFit> fit_path(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnetConfig& config) {
    return fit_path(x, y, config, lambda_grid(x, y, config));
}

std::vector<EnetFit> fit_path(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config) {
    EnetConfig c = config;
    if (c.penalty_weights.size() == 0) c.penalty_weights = stack.default_penalty_weights();
    return fit_path(stack.matrix(), y.labels, c);
}

}  // namespace moenet
