#pragma once

#include "moenet/core_data.hpp"
#include "moenet/enet.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace moenet {

/// Outcome of K-fold cross-validation over a shared lambda grid.
struct CvResult {
    std::vector<double> lambda_grid;  // decreasing
    /// K x L misclassification rates; rows of dropped folds are NaN.
    Eigen::MatrixXd mr_per_fold;
    /// Pooled out-of-fold misclassification rate per lambda.
    std::vector<double> mean_mr;
    std::size_t chosen_index = 0;
    double chosen_lambda = 0.0;
    EnetFit chosen_fit;  // refit on all rows
    std::vector<Index> selected_set;  // penalised columns with nonzero coefficient
    std::vector<int> folds;
    /// N x L out-of-fold probabilities: row i comes from the fit that held out fold folds[i].
    Eigen::MatrixXd oof_probability;
    std::vector<int> dropped_folds;
    std::vector<std::string> warnings;

    double chosen_mr() const { return mean_mr.at(chosen_index); }
};

struct RepeatedSelection {
    int repeats = 0;
    std::vector<std::vector<Index>> per_repeat_sets;
    std::vector<Index> maximal_set;
    std::vector<Index> modal_set;
    int modal_count = 0;
    std::map<Index, int> frequency;
};

/// Stratified fold ids in [0, K): per-class counts across folds differ by at
/// most one. Deterministic in `seed`. Throws InvalidArgument when K < 2 or K > N.
std::vector<int> make_folds(const BinaryResponse& y, int k, std::uint64_t seed);

/// Fraction of rows whose predicted class (probability >= 0.5) differs from the label.
double misclassification_rate(const EnetFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
double misclassification_rate(const EnetFit& fit, const LayerStack& stack, const BinaryResponse& y);

/// Chooses lambda by minimising out-of-fold misclassification. The grid is
/// computed once on the full data; ties go to the larger lambda. A failing
/// fold is dropped with a warning as long as at least K-1 folds succeed.
CvResult cv_lambda(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config, int k,
                   std::uint64_t seed);
CvResult cv_lambda(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config,
                   const std::vector<int>& folds);

/// Repeats cv_lambda with `repeats` fold seeds derived from `seed` and
/// reports the largest and the most frequent selected set.
RepeatedSelection repeated_cv_selection(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config,
                                        int k, int repeats, std::uint64_t seed);

/// Selection summary from a list of per-repeat sets. The maximal set is the
/// first largest set; the modal set is the most frequent exact set, ties
/// broken by smaller cardinality and then first occurrence.
RepeatedSelection summarize_selections(std::vector<std::vector<Index>> sets);

}  // namespace moenet
