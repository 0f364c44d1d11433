#include "doctest.h"
#include "support.hpp"

#include "moenet/cv.hpp"
#include "moenet/error.hpp"
#include "moenet/serialize.hpp"

#include <algorithm>

using namespace moenet;
namespace ts = testing_support;

namespace {

LayerStack plain_stack(const Eigen::MatrixXd& x) { return LayerStack(x, {{"omics", 0, x.cols(), true}}); }

}  // namespace

TEST_CASE("make_folds: balance, determinism and range checks") {
    std::vector<int> labels(20, 0);
    for (int i = 0; i < 7; ++i) labels[static_cast<std::size_t>(3 * i)] = 1;
    const BinaryResponse y(labels);
    const auto folds = make_folds(y, 5, 42);
    CHECK(folds == make_folds(y, 5, 42));
    for (int f = 0; f < 5; ++f) {
        int cases = 0, controls = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (folds[i] == f) (labels[i] ? cases : controls)++;
        CHECK((cases == 1 || cases == 2));
        CHECK((controls == 2 || controls == 3));
    }
    CHECK_THROWS_AS(make_folds(y, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(make_folds(y, 21, 0), InvalidArgument);
}

TEST_CASE("misclassification_rate: hand fixtures") {
    Eigen::MatrixXd x(5, 1);
    x << -2, -1, 0.5, 1, 2;
    Eigen::VectorXd y(5);
    y << 0, 1, 1, 0, 1;
    EnetFit fit;
    fit.coefficients = Eigen::VectorXd::Constant(1, 10.0);
    CHECK(misclassification_rate(fit, x, y) == doctest::Approx(0.4));
    y << 0, 0, 1, 1, 1;
    CHECK(misclassification_rate(fit, x, y) == 0.0);
    Eigen::VectorXd balanced(4);
    balanced << 0, 1, 0, 1;
    EnetFit constant;
    constant.intercept = -1e-9;
    constant.coefficients = Eigen::VectorXd::Zero(1);
    CHECK(misclassification_rate(constant, Eigen::MatrixXd::Zero(4, 1), balanced) == 0.5);
    CHECK_THROWS(misclassification_rate(constant, Eigen::MatrixXd::Zero(0, 1), Eigen::VectorXd(0)));
}

TEST_CASE("cv_lambda: invariants, determinism and out-of-fold discipline") {
    const auto pr = ts::logistic_problem(90, 30, 3, 1.0, 7);
    const LayerStack s = plain_stack(pr.x);
    const BinaryResponse y(pr.y);
    EnetConfig cfg;
    cfg.alpha = 0.5;
    cfg.path_length = 40;
    const CvResult a = cv_lambda(s, y, cfg, 5, 99);
    const CvResult b = cv_lambda(s, y, cfg, 5, 99);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(std::find(a.lambda_grid.begin(), a.lambda_grid.end(), a.chosen_lambda) != a.lambda_grid.end());
    for (double m : a.mean_mr) CHECK((m >= 0.0 && m <= 1.0));
    const auto best = *std::min_element(a.mean_mr.begin(), a.mean_mr.end());
    CHECK(a.chosen_mr() == best);
    for (std::size_t i = 0; i < a.chosen_index; ++i) CHECK(a.mean_mr[i] > best);
    CHECK(a.chosen_fit.lambda == a.chosen_lambda);

    // Each row's out-of-fold probability equals a fit that never saw it.
    const int held = 2;
    std::vector<Index> train;
    for (Index i = 0; i < 90; ++i)
        if (a.folds[static_cast<std::size_t>(i)] != held) train.push_back(i);
    const auto sub = s.select_rows(train);
    EnetConfig c = cfg;
    c.penalty_weights = s.default_penalty_weights();
    const auto path = fit_path(sub.matrix(), y.select(train).labels, c, a.lambda_grid);
    for (Index i = 0; i < 90; ++i) {
        if (a.folds[static_cast<std::size_t>(i)] != held) continue;
        const double p = predict_proba(path[a.chosen_index], Eigen::VectorXd(s.matrix().row(i).transpose()));
        CHECK(a.oof_probability(i, static_cast<Index>(a.chosen_index)) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("cv_lambda: pure noise gives chance-level error") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pr = ts::logistic_problem(100, 40, 0, 0.0, 500 + seed);
        EnetConfig cfg;
        cfg.alpha = 1.0;
        cfg.path_length = 30;
        const CvResult r = cv_lambda(plain_stack(pr.x), BinaryResponse(pr.y), cfg, 10, seed);
        CHECK(r.chosen_mr() >= 0.3);
        CHECK(r.chosen_mr() <= 0.65);
    }
}

TEST_CASE("cv_lambda: a strong single feature is selected") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pr = ts::logistic_problem(200, 20, 1, 5.0, 700 + seed);
        EnetConfig cfg;
        cfg.alpha = 1.0;
        cfg.path_length = 30;
        const CvResult r = cv_lambda(plain_stack(pr.x), BinaryResponse(pr.y), cfg, 10, seed);
        if (std::find(r.selected_set.begin(), r.selected_set.end(), 0) != r.selected_set.end()) ++hits;
    }
    CHECK(hits >= 19);
}

TEST_CASE("cv_lambda: leave-one-out on 12 rows") {
    const auto pr = ts::logistic_problem(12, 3, 1, 2.0, 13);
    EnetConfig cfg;
    cfg.path_length = 10;
    const CvResult r = cv_lambda(plain_stack(pr.x), BinaryResponse(pr.y), cfg, 12, 1);
    for (Index f = 0; f < r.mr_per_fold.rows(); ++f)
        for (Index l = 0; l < r.mr_per_fold.cols(); ++l) {
            const double v = r.mr_per_fold(f, l);
            CHECK((std::isnan(v) || v == 0.0 || v == 1.0));
        }
}

TEST_CASE("summarize_selections: maximal and modal sets") {
    const RepeatedSelection one = summarize_selections({{1, 4}});
    CHECK(one.maximal_set == std::vector<Index>{1, 4});
    CHECK(one.modal_set == std::vector<Index>{1, 4});
    const RepeatedSelection two = summarize_selections({{1, 2}, {1, 2}});
    CHECK(two.modal_set == std::vector<Index>{1, 2});
    CHECK(two.modal_count == 2);
    const RepeatedSelection mix = summarize_selections({{1, 2, 3}, {1}, {1, 2}, {1}, {1, 2}, {5, 6, 7}});
    CHECK(mix.maximal_set == std::vector<Index>{1, 2, 3});
    CHECK(mix.modal_set == std::vector<Index>{1});
    CHECK(mix.modal_count == 2);
    CHECK(mix.frequency.at(1) == 5);
    CHECK(mix.frequency.at(7) == 1);
}

TEST_CASE("repeated_cv_selection: sets come from single repeats") {
    const auto pr = ts::logistic_problem(80, 30, 4, 1.0, 17);
    EnetConfig cfg;
    cfg.alpha = 0.5;
    cfg.path_length = 25;
    const RepeatedSelection rs = repeated_cv_selection(plain_stack(pr.x), BinaryResponse(pr.y), cfg, 5, 6, 3);
    CHECK(rs.repeats == 6);
    REQUIRE(rs.per_repeat_sets.size() == 6);
    auto member = [&](const std::vector<Index>& s) {
        return std::find(rs.per_repeat_sets.begin(), rs.per_repeat_sets.end(), s) != rs.per_repeat_sets.end();
    };
    CHECK(member(rs.maximal_set));
    CHECK(member(rs.modal_set));
    CHECK(rs.maximal_set.size() >= rs.modal_set.size());
    for (const auto& [col, count] : rs.frequency) CHECK(count <= 6);
}
