#pragma once

#include "moenet/core_data.hpp"
#include "moenet/cv.hpp"
#include "moenet/enet.hpp"
#include "moenet/epsgo.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace moenet {

enum class MethodKind { naive_en, sipf_en, ipf_en, two_step_fixed, two_step_epsgo, univariate_wald, univariate_mw };

std::string method_name(MethodKind kind);
/// Throws InvalidArgument for unknown names.
MethodKind parse_method(const std::string& name);
const std::vector<MethodKind>& all_methods();

struct MethodSpec {
    MethodKind kind = MethodKind::naive_en;
    /// Only meaningful for two_step_fixed, where it defaults to 0.1.
    std::optional<double> alpha_fixed;
    int cv_folds = 10;
    /// Repeated-CV runs for the two-step selection step (maximal set is kept).
    int repeats = 1;
    EpsgoConfig epsgo;
    std::uint64_t seed = 0;
    /// Solver settings shared by every fit (alpha, lambda and weights are overridden).
    EnetConfig enet;
    /// Two-step methods: include the non-penalised block (weight 0) in each per-layer fit.
    bool block_in_first_step = true;
    double wald_level = 0.05;
    double bh_level = 0.05;

    void validate() const;
    double resolved_alpha_fixed() const { return alpha_fixed.value_or(0.1); }
};

struct LayerSelection {
    std::string layer;
    std::vector<Index> columns;  // indices into the full stack
};

struct MethodResult {
    MethodKind kind = MethodKind::naive_en;
    /// Final predictive model in full-P coordinates.
    EnetFit final_model;
    Eigen::VectorXd final_weights;
    std::vector<LayerSelection> per_layer_selected;
    std::map<std::string, double> hyperparams;
    std::vector<std::string> flags;
    /// Column -> number of CV repeats that selected it.
    std::map<Index, int> selection_frequency;
    nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();

    /// Union of the per-layer selections, ascending.
    std::vector<Index> selected() const;
    bool has_flag(const std::string& prefix) const;
};

MethodResult run_naive_en(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_sipf_en(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_ipf_en(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_two_step_fixed(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_two_step_epsgo(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_univariate_wald(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_univariate_mw(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);
MethodResult run_method(const LayerStack& stack, const BinaryResponse& y, const MethodSpec& spec);

/// Penalty weights for per-layer penalties: 0 on the non-penalised block and
/// ratios[m] on penalised layer m (callers pass 1 for the first layer).
Eigen::VectorXd layer_penalty_weights(const LayerStack& stack, const std::vector<double>& ratios);
/// Per-column mixing: alphas[m] on penalised layer m, 1 on the non-penalised block.
Eigen::VectorXd layer_feature_alpha(const LayerStack& stack, const std::vector<double>& alphas);

/// Ridge logistic model (lambda by CV) on `columns` plus the non-penalised
/// block, embedded in full-P coordinates. With no penalised column the
/// block (or the intercept alone) is fitted without penalty.
EnetFit fit_ridge_on(const LayerStack& stack, const BinaryResponse& y, const std::vector<Index>& columns,
                     const MethodSpec& spec, std::uint64_t seed, double* chosen_lambda = nullptr);

nlohmann::ordered_json to_json(const MethodResult& result, const LayerStack& stack);
/// layer, column_name, coefficient_in_final_model, selection_frequency.
std::string selection_csv(const MethodResult& result, const LayerStack& stack);

}  // namespace moenet
