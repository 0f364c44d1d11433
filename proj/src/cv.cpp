#include "moenet/cv.hpp"

#include "moenet/error.hpp"
#include "moenet/parallel.hpp"
#include "moenet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace moenet {

std::vector<int> make_folds(const BinaryResponse& y, int k, std::uint64_t seed) {
    const Index n = y.size();
    if (k < 2) throw InvalidArgument("make_folds: K must be at least 2");
    if (k > n) throw InvalidArgument("make_folds: K = " + std::to_string(k) + " exceeds N = " + std::to_string(n));

    Rng rng(seed);
    std::vector<Index> zeros, ones;
    for (Index i = 0; i < n; ++i) (y.labels[i] == 1.0 ? ones : zeros).push_back(i);
    std::shuffle(zeros.begin(), zeros.end(), rng);
    std::shuffle(ones.begin(), ones.end(), rng);

    // Deal class 0 then class 1 round-robin; class 1 continues where class 0
    // stopped so fold sizes also differ by at most one.
    std::vector<int> label_of(static_cast<std::size_t>(k));
    std::iota(label_of.begin(), label_of.end(), 0);
    std::shuffle(label_of.begin(), label_of.end(), rng);
    std::vector<int> folds(static_cast<std::size_t>(n), 0);
    std::size_t pos = 0;
    for (const auto* group : {&zeros, &ones})
        for (Index i : *group) folds[static_cast<std::size_t>(i)] = label_of[pos++ % static_cast<std::size_t>(k)];
    return folds;
}

double misclassification_rate(const EnetFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (y.size() == 0) throw InvalidArgument("misclassification_rate: empty data");
    if (x.rows() != y.size()) throw InvalidArgument("misclassification_rate: row mismatch");
    const Eigen::VectorXd p = predict_proba_rows(fit, x);
    Index wrong = 0;
    for (Index i = 0; i < y.size(); ++i) wrong += ((p[i] >= 0.5) != (y[i] == 1.0)) ? 1 : 0;
    return static_cast<double>(wrong) / static_cast<double>(y.size());
}

double misclassification_rate(const EnetFit& fit, const LayerStack& stack, const BinaryResponse& y) {
    return misclassification_rate(fit, stack.matrix(), y.labels);
}

CvResult cv_lambda(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config, int k,
                   std::uint64_t seed) {
    return cv_lambda(stack, y, config, make_folds(y, k, seed));
}

CvResult cv_lambda(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config,
                   const std::vector<int>& folds) {
    EnetConfig cfg = config;
    if (cfg.penalty_weights.size() == 0) cfg.penalty_weights = stack.default_penalty_weights();
    if (static_cast<Index>(folds.size()) != stack.rows()) throw InvalidArgument("cv_lambda: fold vector length");
    const int k = *std::max_element(folds.begin(), folds.end()) + 1;

    CvResult res;
    res.folds = folds;
    res.lambda_grid = lambda_grid(stack.matrix(), y.labels, cfg);
    const Index n_lambda = static_cast<Index>(res.lambda_grid.size());
    const Index n = stack.rows();

    res.mr_per_fold = Eigen::MatrixXd::Constant(k, n_lambda, std::numeric_limits<double>::quiet_NaN());
    res.oof_probability = Eigen::MatrixXd::Constant(n, n_lambda, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> fold_error(static_cast<std::size_t>(k));

    parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
        try {
            SplitResult s = split(stack, y, folds, static_cast<int>(f));
            auto path = fit_path(s.train.x.matrix(), s.train.y.labels, cfg, res.lambda_grid);
            for (Index l = 0; l < n_lambda; ++l) {
                const EnetFit& fit = path[static_cast<std::size_t>(l)];
                if (!fit.ok()) continue;
                const Eigen::VectorXd p = predict_proba_rows(fit, s.test.x.matrix());
                Index wrong = 0;
                for (std::size_t t = 0; t < s.test_rows.size(); ++t) {
                    res.oof_probability(s.test_rows[t], l) = p[static_cast<Index>(t)];
                    wrong += ((p[static_cast<Index>(t)] >= 0.5) != (s.test.y.labels[static_cast<Index>(t)] == 1.0));
                }
                res.mr_per_fold(static_cast<Index>(f), l) =
                    static_cast<double>(wrong) / static_cast<double>(s.test_rows.size());
            }
        } catch (const Error& e) {
            fold_error[f] = e.what();
        }
    });

    for (int f = 0; f < k; ++f)
        if (!fold_error[static_cast<std::size_t>(f)].empty()) {
            res.dropped_folds.push_back(f);
            res.warnings.push_back("fold " + std::to_string(f) + " dropped: " + fold_error[static_cast<std::size_t>(f)]);
        }
    if (static_cast<int>(res.dropped_folds.size()) > 1)
        throw FoldDegenerate("cv_lambda: " + std::to_string(res.dropped_folds.size()) + " of " + std::to_string(k) +
                             " folds failed; first: " + fold_error[static_cast<std::size_t>(res.dropped_folds.front())]);
    for (const auto& w : res.warnings) std::clog << "moenet: " << w << '\n';

    // Pooled error: integer counts keep ties exact.
    std::vector<Index> fold_size(static_cast<std::size_t>(k), 0);
    for (int f : folds) ++fold_size[static_cast<std::size_t>(f)];
    res.mean_mr.assign(static_cast<std::size_t>(n_lambda), std::numeric_limits<double>::quiet_NaN());
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (Index l = 0; l < n_lambda; ++l) {
        Index wrong = 0, total = 0;
        for (int f = 0; f < k; ++f) {
            const double mr = res.mr_per_fold(f, l);
            if (std::isnan(mr)) continue;
            const Index size = fold_size[static_cast<std::size_t>(f)];
            wrong += static_cast<Index>(std::llround(mr * static_cast<double>(size)));
            total += size;
        }
        if (total == 0) continue;
        const double m = static_cast<double>(wrong) / static_cast<double>(total);
        res.mean_mr[static_cast<std::size_t>(l)] = m;
        if (m < best) {  // strict: ties keep the larger lambda
            best = m;
            res.chosen_index = static_cast<std::size_t>(l);
            any = true;
        }
    }
    if (!any) throw SolverError("cv_lambda: no lambda produced a usable fit in any fold");
    res.chosen_lambda = res.lambda_grid[res.chosen_index];

    // Refit on all rows along the same warm-started path.
    std::vector<double> head(res.lambda_grid.begin(), res.lambda_grid.begin() + res.chosen_index + 1);
    auto full = fit_path(stack.matrix(), y.labels, cfg, head);
    if (!full.back().ok()) throw SolverError("cv_lambda: full-data refit failed: " + full.back().error);
    res.chosen_fit = std::move(full.back());
    res.selected_set = res.chosen_fit.selected(cfg.penalty_weights);
    return res;
}

RepeatedSelection summarize_selections(std::vector<std::vector<Index>> sets) {
    RepeatedSelection out;
    out.repeats = static_cast<int>(sets.size());
    if (sets.empty()) return out;
    std::size_t maximal = 0;
    for (std::size_t r = 0; r < sets.size(); ++r) {
        std::sort(sets[r].begin(), sets[r].end());
        if (sets[r].size() > sets[maximal].size()) maximal = r;
        for (Index j : sets[r]) ++out.frequency[j];
    }
    std::map<std::vector<Index>, std::pair<int, std::size_t>> counts;  // set -> (count, first occurrence)
    for (std::size_t r = 0; r < sets.size(); ++r) {
        auto [it, inserted] = counts.try_emplace(sets[r], 0, r);
        ++it->second.first;
    }
    const std::vector<Index>* modal = nullptr;
    std::pair<int, std::size_t> modal_key{0, 0};
    for (const auto& [set, key] : counts) {
        bool better = false;
        if (!modal || key.first > modal_key.first)
            better = true;
        else if (key.first == modal_key.first) {
            if (set.size() < modal->size())
                better = true;
            else if (set.size() == modal->size() && key.second < modal_key.second)
                better = true;
        }
        if (better) {
            modal = &set;
            modal_key = key;
        }
    }
    out.maximal_set = sets[maximal];
    out.modal_set = *modal;
    out.modal_count = modal_key.first;
    out.per_repeat_sets = std::move(sets);
    return out;
}

RepeatedSelection repeated_cv_selection(const LayerStack& stack, const BinaryResponse& y, const EnetConfig& config,
                                        int k, int repeats, std::uint64_t seed) {
    if (repeats < 1) throw InvalidArgument("repeated_cv_selection: repeats must be at least 1");
    std::vector<std::vector<Index>> sets(static_cast<std::size_t>(repeats));
    parallel_for(sets.size(), [&](std::size_t r) {
        sets[r] = cv_lambda(stack, y, config, k, derive_seed(seed, {static_cast<std::uint64_t>(r)})).selected_set;
    });
    return summarize_selections(std::move(sets));
}

}  // namespace moenet
