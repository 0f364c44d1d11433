#include "moenet/methods.hpp"

#include "moenet/error.hpp"
#include "moenet/parallel.hpp"
#include "moenet/rng.hpp"
#include "moenet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

namespace moenet {

namespace {

const std::vector<std::pair<MethodKind, const char*>> kNames = {
    {MethodKind::naive_en, "naive_en"},
    {MethodKind::sipf_en, "sipf_en"},
    {MethodKind::ipf_en, "ipf_en"},
    {MethodKind::two_step_fixed, "two_step_fixed"},
    {MethodKind::two_step_epsgo, "two_step_epsgo"},
    {MethodKind::univariate_wald, "univariate_wald"},
    {MethodKind::univariate_mw, "univariate_mw"},
};

std::vector<std::size_t> penalised_layers(const LayerStack& stack) {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < stack.layers().size(); ++m)
        if (stack.layers()[m].penalised && stack.layers()[m].size() > 0) out.push_back(m);
    return out;
}

EnetConfig base_config(const MethodSpec& spec) {
    EnetConfig c = spec.enet;
    c.penalty_weights.resize(0);
    c.feature_alpha.resize(0);
    c.lambda = 0.0;
    return c;
}

std::vector<int> method_folds(const BinaryResponse& y, const MethodSpec& spec) {
    return make_folds(y, spec.cv_folds, derive_seed(spec.seed, {hash_tag("folds")}));
}

EpsgoConfig search_config(const MethodSpec& spec, std::uint64_t tag) {
    EpsgoConfig c = spec.epsgo;
    c.seed = derive_seed(spec.seed, {hash_tag("epsgo"), tag});
    return c;
}

std::vector<LayerSelection> split_by_layer(const LayerStack& stack, const std::vector<Index>& columns) {
    std::vector<LayerSelection> out;
    for (std::size_t m : penalised_layers(stack)) {
        LayerSelection sel{stack.layers()[m].name, {}};
        for (Index j : columns)
            if (stack.layers()[m].contains(j)) sel.columns.push_back(j);
        out.push_back(std::move(sel));
    }
    return out;
}

// CV objective whose results are kept so the winning point need not be refitted.
class CvObjective {
public:
    CvObjective(const LayerStack& stack, const BinaryResponse& y, std::vector<int> folds,
                std::function<EnetConfig(const std::vector<double>&)> make)
        : stack_(stack), y_(y), folds_(std::move(folds)), make_(std::move(make)) {}

    double operator()(const std::vector<double>& point) {
        CvResult r = cv_lambda(stack_, y_, make_(point), folds_);
        const double mr = r.chosen_mr();
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(point, std::move(r));
        return mr;
    }

    CvResult result_at(const std::vector<double>& point) {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(point);
            if (it != cache_.end()) return it->second;
        }
        return cv_lambda(stack_, y_, make_(point), folds_);
    }

    EnetConfig config_at(const std::vector<double>& point) const { return make_(point); }

private:
    const LayerStack& stack_;
    const BinaryResponse& y_;
    std::vector<int> folds_;
    std::function<EnetConfig(const std::vector<double>&)> make_;
    std::mutex mutex_;
    std::map<std::vector<double>, CvResult> cache_;
};

nlohmann::ordered_json cv_summary(const CvResult& cv) {
    nlohmann::ordered_json j;
    j["chosen_lambda"] = cv.chosen_lambda;
    j["chosen_index"] = cv.chosen_index;
    j["cv_mr"] = cv.chosen_mr();
    j["dropped_folds"] = cv.dropped_folds;
    return j;
}

MethodResult finish_en(MethodKind kind, const LayerStack& stack, const CvResult& cv, const EnetConfig& config,
                       const EpsgoResult& search, const SearchSpace& space) {
    MethodResult res;
    res.kind = kind;
    res.final_model = cv.chosen_fit;
    res.final_weights = config.penalty_weights.size() ? config.penalty_weights : stack.default_penalty_weights();
    res.per_layer_selected = split_by_layer(stack, cv.selected_set);
    for (Index j : cv.selected_set) res.selection_frequency[j] = 1;
    for (std::size_t i = 0; i < space.size(); ++i) res.hyperparams[space.dims[i].name] = search.best_point[i];
    res.hyperparams["lambda"] = cv.chosen_lambda;
    if (search.flat_surface) res.flags.push_back("flat_error_surface");
    for (const auto& w : cv.warnings) res.flags.push_back("cv_warning: " + w);
    res.diagnostics["epsgo"] = to_json(search, space);
    res.diagnostics["cv"] = cv_summary(cv);
    return res;
}

void require_two_layers(const LayerStack& stack, const char* who) {
    if (penalised_layers(stack).size() < 2)
        throw InvalidArgument(std::string(who) + ": at least two non-empty penalised layers are required");
}

// Per-layer selection step of the two-step methods.
struct FirstStep {
    std::vector<Index> selected;  // full-stack indices
    std::map<Index, int> frequency;
    double alpha = 0.0;
    double lambda = 0.0;
    nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();
    std::string error;
};

LayerStack layer_substack(const LayerStack& stack, std::size_t m, bool with_block, std::vector<Index>& columns) {
    columns.clear();
    if (with_block) columns = stack.unpenalised_columns();
    for (Index j = stack.layers()[m].begin; j < stack.layers()[m].end; ++j) columns.push_back(j);
    return stack.select_columns(columns);
}

void select_in_layer(const LayerStack& sub, const BinaryResponse& y, const std::vector<Index>& columns,
                     const EnetConfig& config, const CvResult* single, const MethodSpec& spec, std::uint64_t seed,
                     FirstStep& out) {
    const Eigen::VectorXd w = sub.default_penalty_weights();
    std::vector<Index> local;
    std::map<Index, int> freq;
    if (spec.repeats > 1) {
        RepeatedSelection rs = repeated_cv_selection(sub, y, config, spec.cv_folds, spec.repeats, seed);
        local = rs.maximal_set;
        freq = rs.frequency;
        out.diagnostics["modal_set_size"] = rs.modal_set.size();
        out.diagnostics["maximal_set_size"] = rs.maximal_set.size();
    } else {
        CvResult cv = single ? *single : cv_lambda(sub, y, config, spec.cv_folds, seed);
        local = cv.selected_set;
        for (Index j : local) freq[j] = 1;
        out.lambda = cv.chosen_lambda;
        out.diagnostics["cv"] = cv_summary(cv);
    }
    for (Index j : local)
        if (w[j] > 0) out.selected.push_back(columns[static_cast<std::size_t>(j)]);
    for (const auto& [j, c] : freq)
        if (w[j] > 0) out.frequency[columns[static_cast<std::size_t>(j)]] = c;
}

MethodResult finish_two_step(MethodKind kind, const LayerStack& stack, const BinaryResponse& y,
                             const MethodSpec& spec, const std::vector<std::size_t>& layers,
                             const std::vector<FirstStep>& steps) {
    MethodResult res;
    res.kind = kind;
    std::vector<Index> pooled;
    nlohmann::ordered_json per_layer = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string& name = stack.layers()[layers[i]].name;
        const FirstStep& s = steps[i];
        if (!s.error.empty()) {
            res.flags.push_back("layer_excluded:" + name + ": " + s.error);
            per_layer[name] = {{"excluded", s.error}};
            continue;
        }
        res.per_layer_selected.push_back({name, s.selected});
        pooled.insert(pooled.end(), s.selected.begin(), s.selected.end());
        for (const auto& [j, c] : s.frequency) res.selection_frequency[j] = c;
        res.hyperparams["alpha_" + name] = s.alpha;
        if (spec.repeats <= 1) res.hyperparams["lambda_" + name] = s.lambda;
        per_layer[name] = s.diagnostics;
    }
    std::sort(pooled.begin(), pooled.end());
    if (pooled.empty()) res.flags.push_back("no_variables_selected");
    double lam = 0.0;
    res.final_model = fit_ridge_on(stack, y, pooled, spec, derive_seed(spec.seed, {hash_tag("final")}), &lam);
    res.final_weights = stack.default_penalty_weights();
    res.hyperparams["lambda_final"] = lam;
    res.diagnostics["first_step"] = std::move(per_layer);
    return res;
}

MethodResult finish_univariate(MethodKind kind, const LayerStack& stack, const BinaryResponse& y,
                               const MethodSpec& spec, const std::vector<Index>& selected) {
    MethodResult res;
    res.kind = kind;
    res.per_layer_selected = split_by_layer(stack, selected);
    for (Index j : selected) res.selection_frequency[j] = 1;
    if (selected.empty()) res.flags.push_back("no_variables_selected");
    double lam = 0.0;
    res.final_model = fit_ridge_on(stack, y, selected, spec, derive_seed(spec.seed, {hash_tag("final")}), &lam);
    res.final_weights = stack.default_penalty_weights();
    res.hyperparams["lambda_final"] = lam;
    return res;
}

nlohmann::ordered_json optional_number(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string method_name(MethodKind kind) {
    for (const auto& [k, n] : kNames)
        if (k == kind) return n;
    throw InvalidArgument("unknown method kind");
}

MethodKind parse_method(const std::string& name) {
    for (const auto& [k, n] : kNames)
        if (name == n) return k;
    throw InvalidArgument("unknown method '" + name + "'");
}

const std::vector<MethodKind>& all_methods() {
    static const std::vector<MethodKind> all = [] {
        std::vector<MethodKind> v;
        for (const auto& [k, n] : kNames) v.push_back(k);
        return v;
    }();
    return all;
}

void MethodSpec::validate() const {
    if (alpha_fixed && kind != MethodKind::two_step_fixed)
        throw InvalidArgument("alpha_fixed applies only to two_step_fixed");
    if (alpha_fixed && !(*alpha_fixed >= 0.0 && *alpha_fixed <= 1.0))
        throw InvalidArgument("alpha_fixed must lie in [0,1]");
    if (cv_folds < 2) throw InvalidArgument("cv_folds must be at least 2");
    if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
}

std::vector<Index> MethodResult::selected() const {
    std::vector<Index> out;
    for (const auto& s : per_layer_selected) out.insert(out.end(), s.columns.begin(), s.columns.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool MethodResult::has_flag(const std::string& prefix) const {
    return std::any_of(flags.begin(), flags.end(), [&](const std::string& f) { return f.rfind(prefix, 0) == 0; });
}

Eigen::VectorXd layer_penalty_weights(const LayerStack& stack, const std::vector<double>& ratios) {
    const auto layers = penalised_layers(stack);
    if (ratios.size() != layers.size()) throw InvalidArgument("layer_penalty_weights: one ratio per penalised layer");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(stack.cols());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = stack.layers()[layers[i]];
        w.segment(l.begin, l.size()).setConstant(ratios[i]);
    }
    return w;
}

Eigen::VectorXd layer_feature_alpha(const LayerStack& stack, const std::vector<double>& alphas) {
    const auto layers = penalised_layers(stack);
    if (alphas.size() != layers.size()) throw InvalidArgument("layer_feature_alpha: one alpha per penalised layer");
    Eigen::VectorXd a = Eigen::VectorXd::Ones(stack.cols());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = stack.layers()[layers[i]];
        a.segment(l.begin, l.size()).setConstant(alphas[i]);
    }
    return a;
}

EnetFit fit_ridge_on(const LayerStack& stack, const BinaryResponse& y, const std::vector<Index>& columns,
                     const MethodSpec& spec, std::uint64_t seed, double* chosen_lambda) {
    std::set<Index> keep(columns.begin(), columns.end());
    for (Index j : stack.unpenalised_columns()) keep.insert(j);
    const std::vector<Index> cols(keep.begin(), keep.end());

    EnetFit sub_fit;
    double lam = 0.0;
    if (cols.empty()) {
        if (!y.has_both_classes()) throw FoldDegenerate("fit_ridge_on: response contains a single class");
        const double ybar = y.labels.mean();
        sub_fit.intercept = std::log(ybar / (1.0 - ybar));
        sub_fit.alpha = 0.0;
        sub_fit.converged = true;
    } else {
        const LayerStack sub = stack.select_columns(cols);
        EnetConfig cfg = base_config(spec);
        cfg.alpha = 0.0;
        cfg.penalty_weights = sub.default_penalty_weights();
        if ((cfg.penalty_weights.array() > 0.0).any()) {
            CvResult cv = cv_lambda(sub, y, cfg, spec.cv_folds, seed);
            sub_fit = std::move(cv.chosen_fit);
            lam = cv.chosen_lambda;
        } else {
            sub_fit = fit_enet(sub, y, cfg);
        }
    }

    EnetFit fit = sub_fit;
    fit.coefficients = Eigen::VectorXd::Zero(stack.cols());
    for (std::size_t i = 0; i < cols.size(); ++i) fit.coefficients[cols[i]] = sub_fit.coefficients[static_cast<Index>(i)];
    const Eigen::VectorXd w = stack.default_penalty_weights();
    fit.n_nonzero = 0;
    for (Index j = 0; j < stack.cols(); ++j)
        if (w[j] > 0 && fit.coefficients[j] != 0.0) ++fit.n_nonzero;
    if (chosen_lambda) *chosen_lambda = lam;
    return fit;
}

MethodResult run_naive_en(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    const EnetConfig base = base_config(spec);
    SearchSpace space{{{"alpha", 0.01, 1.0, Scale::linear}}};
    CvObjective objective(stack, y, method_folds(y, spec), [&](const std::vector<double>& p) {
        EnetConfig c = base;
        c.alpha = p[0];
        c.penalty_weights = stack.default_penalty_weights();
        return c;
    });
    EpsgoResult search = epsgo_minimize(std::ref(objective), space, search_config(spec, 0));
    const CvResult cv = objective.result_at(search.best_point);
    return finish_en(MethodKind::naive_en, stack, cv, objective.config_at(search.best_point), search, space);
}

MethodResult run_sipf_en(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    require_two_layers(stack, "sipf_en");
    const auto layers = penalised_layers(stack);
    const EnetConfig base = base_config(spec);
    SearchSpace space{{{"alpha", 0.01, 1.0, Scale::linear}}};
    for (std::size_t i = 1; i < layers.size(); ++i)
        space.dims.push_back({"ratio_" + stack.layers()[layers[i]].name, -3.0, 3.0, Scale::log2});
    CvObjective objective(stack, y, method_folds(y, spec), [&](const std::vector<double>& p) {
        EnetConfig c = base;
        c.alpha = p[0];
        std::vector<double> ratios{1.0};
        ratios.insert(ratios.end(), p.begin() + 1, p.end());
        c.penalty_weights = layer_penalty_weights(stack, ratios);
        return c;
    });
    EpsgoResult search = epsgo_minimize(std::ref(objective), space, search_config(spec, 0));
    const CvResult cv = objective.result_at(search.best_point);
    return finish_en(MethodKind::sipf_en, stack, cv, objective.config_at(search.best_point), search, space);
}

MethodResult run_ipf_en(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    require_two_layers(stack, "ipf_en");
    const auto layers = penalised_layers(stack);
    const std::size_t m = layers.size();
    const EnetConfig base = base_config(spec);
    SearchSpace space;
    for (std::size_t i = 0; i < m; ++i)
        space.dims.push_back({"alpha_" + stack.layers()[layers[i]].name, 0.01, 1.0, Scale::linear});
    for (std::size_t i = 1; i < m; ++i)
        space.dims.push_back({"ratio_" + stack.layers()[layers[i]].name, -3.0, 3.0, Scale::log2});
    CvObjective objective(stack, y, method_folds(y, spec), [&](const std::vector<double>& p) {
        EnetConfig c = base;
        c.feature_alpha = layer_feature_alpha(stack, std::vector<double>(p.begin(), p.begin() + static_cast<long>(m)));
        c.alpha = p[0];
        std::vector<double> ratios{1.0};
        ratios.insert(ratios.end(), p.begin() + static_cast<long>(m), p.end());
        c.penalty_weights = layer_penalty_weights(stack, ratios);
        return c;
    });
    EpsgoResult search = epsgo_minimize(std::ref(objective), space, search_config(spec, 0));
    const CvResult cv = objective.result_at(search.best_point);
    return finish_en(MethodKind::ipf_en, stack, cv, objective.config_at(search.best_point), search, space);
}

MethodResult run_two_step_fixed(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    const auto layers = penalised_layers(stack);
    const double alpha = spec.resolved_alpha_fixed();
    std::vector<FirstStep> steps(layers.size());
    parallel_for(layers.size(), [&](std::size_t i) {
        std::vector<Index> columns;
        const LayerStack sub = layer_substack(stack, layers[i], spec.block_in_first_step, columns);
        EnetConfig cfg = base_config(spec);
        cfg.alpha = alpha;
        steps[i].alpha = alpha;
        select_in_layer(sub, y, columns, cfg, nullptr, spec,
                        derive_seed(spec.seed, {hash_tag("first_step"), static_cast<std::uint64_t>(i)}), steps[i]);
    });
    MethodResult res = finish_two_step(MethodKind::two_step_fixed, stack, y, spec, layers, steps);
    res.hyperparams["alpha"] = alpha;
    return res;
}

MethodResult run_two_step_epsgo(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    const auto layers = penalised_layers(stack);
    const std::vector<int> folds = method_folds(y, spec);
    std::vector<FirstStep> steps(layers.size());
    SearchSpace space{{{"alpha", 0.01, 1.0, Scale::linear}}};
    parallel_for(layers.size(), [&](std::size_t i) {
        std::vector<Index> columns;
        const LayerStack sub = layer_substack(stack, layers[i], spec.block_in_first_step, columns);
        const EnetConfig base = base_config(spec);
        try {
            CvObjective objective(sub, y, folds, [&](const std::vector<double>& p) {
                EnetConfig c = base;
                c.alpha = p[0];
                c.penalty_weights = sub.default_penalty_weights();
                return c;
            });
            EpsgoResult search = epsgo_minimize(std::ref(objective), space, search_config(spec, i + 1));
            steps[i].alpha = search.best_point[0];
            steps[i].diagnostics["epsgo"] = to_json(search, space);
            if (search.flat_surface) steps[i].diagnostics["flat_error_surface"] = true;
            const CvResult cv = objective.result_at(search.best_point);
            select_in_layer(sub, y, columns, objective.config_at(search.best_point), &cv, spec,
                            derive_seed(spec.seed, {hash_tag("first_step"), static_cast<std::uint64_t>(i)}),
                            steps[i]);
        } catch (const Error& e) {
            steps[i] = FirstStep{};
            steps[i].error = e.what();
        }
    });
    return finish_two_step(MethodKind::two_step_epsgo, stack, y, spec, layers, steps);
}

MethodResult run_univariate_wald(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    if (!y.has_both_classes()) throw FoldDegenerate("univariate_wald: response contains a single class");
    const std::vector<Index> block = stack.unpenalised_columns();
    if (static_cast<Index>(block.size()) + 1 >= stack.rows())
        throw InvalidArgument("univariate_wald: the non-penalised block has at least as many columns as rows");
    const Eigen::VectorXd w = stack.default_penalty_weights();
    std::vector<Index> candidates;
    for (Index j = 0; j < stack.cols(); ++j)
        if (w[j] > 0) candidates.push_back(j);

    std::vector<double> pvalue(candidates.size(), std::nan(""));
    const Eigen::MatrixXd& x = stack.matrix();
    parallel_for(candidates.size(), [&](std::size_t c) {
        Eigen::MatrixXd d(x.rows(), static_cast<Index>(block.size()) + 1);
        for (std::size_t b = 0; b < block.size(); ++b) d.col(static_cast<Index>(b)) = x.col(block[b]);
        d.col(d.cols() - 1) = x.col(candidates[c]);
        const LogisticFit fit = logistic_newton(d, y.labels);
        if (!fit.converged) return;
        const Index last = fit.coefficients.size() - 1;
        pvalue[c] = two_sided_normal_p(fit.coefficients[last] / fit.standard_errors[last]);
    });

    std::vector<Index> selected;
    int skipped = 0;
    nlohmann::ordered_json pj = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (std::isnan(pvalue[c]))
            ++skipped;
        else if (pvalue[c] < spec.wald_level)
            selected.push_back(candidates[c]);
        pj.push_back(optional_number(pvalue[c]));
    }
    MethodResult res = finish_univariate(MethodKind::univariate_wald, stack, y, spec, selected);
    if (skipped > 0) res.flags.push_back("wald_skipped:" + std::to_string(skipped));
    res.hyperparams["level"] = spec.wald_level;
    res.diagnostics["p_values"] = std::move(pj);
    return res;
}

MethodResult run_univariate_mw(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    spec.validate();
    if (!y.has_both_classes()) throw FoldDegenerate("univariate_mw: response contains a single class");
    const Eigen::VectorXd w = stack.default_penalty_weights();
    std::vector<Index> candidates;
    for (Index j = 0; j < stack.cols(); ++j)
        if (w[j] > 0) candidates.push_back(j);

    std::vector<double> pvalue(candidates.size(), 1.0);
    const Eigen::MatrixXd& x = stack.matrix();
    parallel_for(candidates.size(), [&](std::size_t c) {
        std::vector<double> cases, controls;
        for (Index i = 0; i < x.rows(); ++i) (y.labels[i] == 1.0 ? cases : controls).push_back(x(i, candidates[c]));
        pvalue[c] = mann_whitney(cases, controls, 0).p_normal;
    });
    const BhResult bh = benjamini_hochberg(pvalue, spec.bh_level);
    std::vector<Index> selected;
    nlohmann::ordered_json pj = nlohmann::ordered_json::array(), aj = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (bh.selected[c]) selected.push_back(candidates[c]);
        pj.push_back(pvalue[c]);
        aj.push_back(bh.adjusted[c]);
    }
    MethodResult res = finish_univariate(MethodKind::univariate_mw, stack, y, spec, selected);
    res.hyperparams["level"] = spec.bh_level;
    res.diagnostics["p_values"] = std::move(pj);
    res.diagnostics["adjusted_p_values"] = std::move(aj);
    return res;
}

MethodResult run_method(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec) {
    switch (spec.kind) {
        case MethodKind::naive_en: return run_naive_en(stack, y, spec);
        case MethodKind::sipf_en: return run_sipf_en(stack, y, spec);
        case MethodKind::ipf_en: return run_ipf_en(stack, y, spec);
        case MethodKind::two_step_fixed: return run_two_step_fixed(stack, y, spec);
        case MethodKind::two_step_epsgo: return run_two_step_epsgo(stack, y, spec);
        case MethodKind::univariate_wald: return run_univariate_wald(stack, y, spec);
        case MethodKind::univariate_mw: return run_univariate_mw(stack, y, spec);
    }
    throw InvalidArgument("unknown method kind");
}

}  // namespace moenet
