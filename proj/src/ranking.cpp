#include "moenet/ranking.hpp"

#include "moenet/cv.hpp"
#include "moenet/error.hpp"
#include "moenet/parallel.hpp"
#include "moenet/rng.hpp"
#include "moenet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace moenet {

LayerProbabilities per_layer_probabilities(const LayerStack& stack, const BinaryResponse& y,
                                           const std::vector<bool>& train_mask,
                                           const std::vector<LayerSelection>& selections, int cv_folds,
                                           std::uint64_t seed) {
    if (static_cast<Index>(train_mask.size()) != stack.rows() || y.size() != stack.rows())
        throw InvalidArgument("per_layer_probabilities: mask / response length does not match the rows");
    std::vector<Index> train;
    for (Index i = 0; i < stack.rows(); ++i)
        if (train_mask[static_cast<std::size_t>(i)]) train.push_back(i);
    const BinaryResponse y_train = y.select(train);
    if (!y_train.has_both_classes()) throw FoldDegenerate("per_layer_probabilities: training rows lack a class");

    std::vector<LayerProbability> fitted(selections.size());
    std::vector<std::string> reasons(selections.size());
    parallel_for(selections.size(), [&](std::size_t s) {
        const LayerSelection& sel = selections[s];
        fitted[s].layer = sel.layer;
        if (sel.columns.empty()) {
            reasons[s] = "no selected variables";
            return;
        }
        std::vector<Index> cols = sel.columns;
        std::sort(cols.begin(), cols.end());
        const LayerStack all_rows = stack.select_columns(cols);
        const LayerStack sub = all_rows.select_rows(train);
        EnetConfig cfg;
        cfg.alpha = 0.0;
        cfg.penalty_weights = Eigen::VectorXd::Ones(sub.cols());
        const CvResult cv = cv_lambda(sub, y_train, cfg, cv_folds, derive_seed(seed, {static_cast<std::uint64_t>(s)}));
        fitted[s].probability = predict_proba_rows(cv.chosen_fit, all_rows.matrix());
        fitted[s].lambda = cv.chosen_lambda;
    });

    LayerProbabilities out;
    for (std::size_t s = 0; s < selections.size(); ++s) {
        if (reasons[s].empty())
            out.layers.push_back(std::move(fitted[s]));
        else
            out.excluded.push_back({selections[s].layer, reasons[s]});
    }
    return out;
}

Eigen::VectorXd descending_ranks(const Eigen::VectorXd& values) {
    const Index n = values.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] > values[b]; });
    Eigen::VectorXd ranks(n);
    for (Index i = 0; i < n;) {
        Index j = i;
        while (j + 1 < n && values[order[static_cast<std::size_t>(j + 1)]] == values[order[static_cast<std::size_t>(i)]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (Index k = i; k <= j; ++k) ranks[order[static_cast<std::size_t>(k)]] = avg;
        i = j + 1;
    }
    return ranks;
}

RankTable aggregate_ranks(const std::vector<std::string>& persons, const std::vector<LayerProbability>& layers,
                          const Eigen::VectorXd& full_model_prob) {
    if (layers.empty()) throw InvalidArgument("aggregate_ranks: at least one layer is required");
    const Index n = static_cast<Index>(persons.size());
    RankTable t;
    t.persons = persons;
    t.aggregate_rank = Eigen::VectorXd::Zero(n);
    for (const auto& l : layers) {
        if (l.probability.size() != n) throw InvalidArgument("aggregate_ranks: layer " + l.layer + " has wrong length");
        t.layers.push_back(l.layer);
        t.per_layer_prob.push_back(l.probability);
        t.per_layer_rank.push_back(descending_ranks(l.probability));
        t.aggregate_rank += t.per_layer_rank.back();
    }
    t.aggregate_rank /= static_cast<double>(layers.size());
    t.normalized_rank = t.aggregate_rank / static_cast<double>(n);
    if (full_model_prob.size() != 0) {
        if (full_model_prob.size() != n) throw InvalidArgument("aggregate_ranks: full-model probabilities have wrong length");
        t.full_model_prob = full_model_prob;
    }
    return t;
}

std::string RankTable::csv() const {
    std::ostringstream out;
    out << "person";
    for (const auto& l : layers) out << ",prob_" << l;
    for (const auto& l : layers) out << ",rank_" << l;
    out << ",aggregate_rank,normalized_rank";
    if (full_model_prob.size() != 0) out << ",full_model_prob";
    out << '\n';
    for (std::size_t i = 0; i < persons.size(); ++i) {
        const auto r = static_cast<Index>(i);
        out << persons[i];
        for (const auto& p : per_layer_prob) out << ',' << format_double(p[r]);
        for (const auto& k : per_layer_rank) out << ',' << format_double(k[r]);
        out << ',' << format_double(aggregate_rank[r]) << ',' << format_double(normalized_rank[r]);
        if (full_model_prob.size() != 0) out << ',' << format_double(full_model_prob[r]);
        out << '\n';
    }
    return out.str();
}

SignatureTest validate_signature(const Eigen::VectorXd& omic, const Eigen::VectorXd& parameter,
                                 const Eigen::VectorXd& age, const Eigen::VectorXd& female) {
    const Index n = omic.size();
    if (parameter.size() != n || age.size() != n || female.size() != n)
        throw InvalidArgument("validate_signature: inputs differ in length");
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i)
        if (std::isfinite(omic[i]) && std::isfinite(parameter[i]) && std::isfinite(age[i]) && std::isfinite(female[i]))
            rows.push_back(i);
    if (rows.size() < 5) throw InvalidArgument("validate_signature: fewer than 5 complete rows");
    const Index m = static_cast<Index>(rows.size());
    Eigen::MatrixXd x(m, 3);
    Eigen::VectorXd yv(m);
    for (Index k = 0; k < m; ++k) {
        const Index i = rows[static_cast<std::size_t>(k)];
        x(k, 0) = age[i];
        x(k, 1) = female[i];
        x(k, 2) = omic[i];
        yv[k] = parameter[i];
    }
    const OlsFit fit = ols(x, yv);
    SignatureTest out;
    out.rows_used = m;
    out.rank_deficient = fit.rank_deficient;
    if (fit.rank_deficient) return out;
    out.coefficient = fit.coefficients[3];
    out.t = fit.t[3];
    out.p_value = fit.p[3];
    return out;
}

}  // namespace moenet
