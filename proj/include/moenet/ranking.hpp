#pragma once

#include "moenet/core_data.hpp"
#include "moenet/methods.hpp"
#include "moenet/serialize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace moenet {

struct LayerProbability {
    std::string layer;
    Eigen::VectorXd probability;  // one entry per person
    double lambda = 0.0;
};

struct ExcludedLayer {
    std::string layer;
    std::string reason;
};

struct LayerProbabilities {
    std::vector<LayerProbability> layers;
    std::vector<ExcludedLayer> excluded;
};

/// Ridge logistic model (lambda by CV) per layer on that layer's selected
/// columns, trained on rows with train_mask set, predicted for every row.
/// Layers with an empty selection are excluded with a reason.
LayerProbabilities per_layer_probabilities(const LayerStack& stack, const BinaryResponse& y,
                                           const std::vector<bool>& train_mask,
                                           const std::vector<LayerSelection>& selections, int cv_folds,
                                           std::uint64_t seed);

/// Ranks with 1 for the largest value; tied values share their average rank.
Eigen::VectorXd descending_ranks(const Eigen::VectorXd& values);

struct RankTable {
    std::vector<std::string> persons;
    std::vector<std::string> layers;
    std::vector<Eigen::VectorXd> per_layer_prob;
    std::vector<Eigen::VectorXd> per_layer_rank;
    Eigen::VectorXd aggregate_rank;
    Eigen::VectorXd normalized_rank;
    /// Empty when no full model was supplied.
    Eigen::VectorXd full_model_prob;
    std::vector<ExcludedLayer> excluded;

    /// person, prob_<layer>..., rank_<layer>..., aggregate_rank, normalized_rank[, full_model_prob].
    std::string csv() const;
};

/// Mean of the per-layer ranks, and that mean divided by the number of persons.
RankTable aggregate_ranks(const std::vector<std::string>& persons, const std::vector<LayerProbability>& layers,
                          const Eigen::VectorXd& full_model_prob = {});

struct SignatureTest {
    double coefficient = 0.0;
    double p_value = 1.0;
    double t = 0.0;
    Index rows_used = 0;
    bool rank_deficient = false;
};

/// OLS of parameter on (intercept, age, female, omic) over complete rows
/// (rows with any NaN are skipped) with a two-sided t-test on the omic term.
SignatureTest validate_signature(const Eigen::VectorXd& omic, const Eigen::VectorXd& parameter,
                                 const Eigen::VectorXd& age, const Eigen::VectorXd& female);

}  // namespace moenet
