#include "doctest.h"
#include "support.hpp"

#include "moenet/error.hpp"
#include "moenet/methods.hpp"
#include "moenet/serialize.hpp"
#include "moenet/simulate.hpp"

#include <algorithm>
#include <set>

using namespace moenet;
namespace ts = testing_support;

namespace {

SimDataset small_data(const std::string& setting, Index width, std::uint64_t seed) {
    SimSetting s = scaled_setting(builtin_setting(setting), width);
    s.replicate_seed = seed;
    s.n_test = 200;
    return standardize_dataset(sample_dataset(s));
}

MethodSpec quick_spec(MethodKind kind, std::uint64_t seed) {
    MethodSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    spec.cv_folds = 5;
    // Budgets sit just above the initial design of 10 points per dimension.
    spec.epsgo.max_evals = kind == MethodKind::sipf_en ? 24 : (kind == MethodKind::ipf_en ? 34 : 14);
    spec.epsgo.patience = 4;
    spec.enet.path_length = 30;
    return spec;
}

void check_common(const MethodResult& r, const LayerStack& stack) {
    CHECK(r.final_model.coefficients.size() == stack.cols());
    for (const auto& sel : r.per_layer_selected) {
        const Layer& l = stack.layer(sel.layer);
        CHECK(l.penalised);
        for (Index j : sel.columns) CHECK(l.contains(j));
    }
    std::set<Index> seen;
    for (const auto& sel : r.per_layer_selected)
        for (Index j : sel.columns) CHECK(seen.insert(j).second);
}

}  // namespace

TEST_CASE("method names round trip") {
    for (MethodKind k : all_methods()) CHECK(parse_method(method_name(k)) == k);
    CHECK(all_methods().size() == 7);
    CHECK_THROWS_AS(parse_method("lasso"), InvalidArgument);
}

TEST_CASE("MethodSpec validation") {
    MethodSpec s;
    s.kind = MethodKind::naive_en;
    s.alpha_fixed = 0.3;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s.kind = MethodKind::two_step_fixed;
    CHECK_NOTHROW(s.validate());
    s.alpha_fixed.reset();
    CHECK(s.resolved_alpha_fixed() == 0.1);
    s.cv_folds = 1;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("layer penalty weights and per-layer alpha") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 6);
    const LayerStack s(x, {{"c", 0, 1, false}, {"a", 1, 3, true}, {"b", 3, 6, true}});
    const Eigen::VectorXd w = layer_penalty_weights(s, {1.0, 4.0});
    Eigen::VectorXd expect(6);
    expect << 0, 1, 1, 4, 4, 4;
    CHECK(w == expect);
    const Eigen::VectorXd a = layer_feature_alpha(s, {0.2, 0.9});
    CHECK(a[0] == 1.0);
    CHECK(a[2] == 0.2);
    CHECK(a[5] == 0.9);
    CHECK_THROWS_AS(layer_penalty_weights(s, {1.0}), InvalidArgument);
}

TEST_CASE("unit ratios reduce the multi-penalty fit to the single-penalty fit") {
    const SimDataset d = small_data("A", 20, 3);
    const LayerStack& s = d.train.x;
    EnetConfig naive;
    naive.alpha = 0.4;
    naive.lambda = 0.02;
    naive.penalty_weights = s.default_penalty_weights();
    EnetConfig multi = naive;
    multi.penalty_weights = layer_penalty_weights(s, {1.0, 1.0});
    const EnetFit a = fit_enet(s, d.train.y, naive);
    const EnetFit b = fit_enet(s, d.train.y, multi);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-8);
    EnetConfig tied = multi;
    tied.feature_alpha = layer_feature_alpha(s, {0.4, 0.4});
    tied.feature_alpha.head(2).setConstant(0.4);
    const EnetFit c = fit_enet(s, d.train.y, tied);
    CHECK((a.coefficients - c.coefficients).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("EN-based methods: search dimensions and reported hyperparameters") {
    const SimDataset d = small_data("C", 20, 5);
    const auto naive = run_method(d.train.x, d.train.y, quick_spec(MethodKind::naive_en, 1));
    check_common(naive, d.train.x);
    CHECK(naive.hyperparams.count("alpha") == 1);
    const auto& hist = naive.diagnostics["epsgo"]["history"];
    int initial = 0;
    for (const auto& h : hist) initial += h["ei"].is_null() ? 1 : 0;
    CHECK(initial == 10);

    const auto sipf = run_method(d.train.x, d.train.y, quick_spec(MethodKind::sipf_en, 1));
    check_common(sipf, d.train.x);
    CHECK(sipf.hyperparams.count("ratio_layer2") == 1);
    CHECK(sipf.final_weights.head(2).isZero());
    const double r = sipf.hyperparams.at("ratio_layer2");
    CHECK(sipf.final_weights[d.train.x.layer("layer2").begin] == doctest::Approx(r));

    MethodSpec ipf_spec = quick_spec(MethodKind::ipf_en, 1);
    ipf_spec.epsgo.max_evals = 32;
    const auto ipf = run_method(d.train.x, d.train.y, ipf_spec);
    check_common(ipf, d.train.x);
    CHECK(ipf.hyperparams.count("alpha_layer1") == 1);
    CHECK(ipf.hyperparams.count("alpha_layer2") == 1);
    int ipf_initial = 0;
    for (const auto& h : ipf.diagnostics["epsgo"]["history"]) ipf_initial += h["ei"].is_null() ? 1 : 0;
    CHECK(ipf_initial == 30);
}

TEST_CASE("two-step methods: block always present, deterministic") {
    const SimDataset d = small_data("B", 20, 7);
    MethodSpec spec = quick_spec(MethodKind::two_step_fixed, 2);
    const auto a = run_method(d.train.x, d.train.y, spec);
    const auto b = run_method(d.train.x, d.train.y, spec);
    check_common(a, d.train.x);
    CHECK(a.final_model.coefficients == b.final_model.coefficients);
    CHECK(to_json(a, d.train.x).dump() == to_json(b, d.train.x).dump());
    CHECK(a.hyperparams.at("alpha") == 0.1);
    CHECK(a.final_model.coefficients[0] != 0.0);
    CHECK(a.final_model.coefficients[1] != 0.0);
    for (Index j : a.selected()) CHECK(a.final_model.coefficients[j] != 0.0);

    const auto e = run_method(d.train.x, d.train.y, quick_spec(MethodKind::two_step_epsgo, 2));
    check_common(e, d.train.x);
    CHECK(e.hyperparams.count("alpha_layer1") == 1);
    CHECK(e.hyperparams.count("alpha_layer2") == 1);
    for (const char* layer : {"layer1", "layer2"}) {
        int initial = 0;
        for (const auto& h : e.diagnostics["first_step"][layer]["epsgo"]["history"]) initial += h["ei"].is_null() ? 1 : 0;
        CHECK(initial == 10);
    }
}

TEST_CASE("two-step with repeated CV keeps the maximal set") {
    const SimDataset d = small_data("A", 20, 9);
    MethodSpec spec = quick_spec(MethodKind::two_step_fixed, 4);
    spec.repeats = 4;
    const auto r = run_method(d.train.x, d.train.y, spec);
    for (const auto& [col, count] : r.selection_frequency) {
        CHECK(count >= 1);
        CHECK(count <= 4);
    }
    for (Index j : r.selected()) CHECK(r.selection_frequency.count(j) == 1);
}

TEST_CASE("single selected variable still gets a ridge model") {
    const SimDataset d = small_data("A", 20, 11);
    MethodSpec spec = quick_spec(MethodKind::two_step_fixed, 0);
    const EnetFit fit = fit_ridge_on(d.train.x, d.train.y, {5}, spec, 3);
    CHECK(fit.coefficients.size() == d.train.x.cols());
    CHECK(fit.coefficients[5] != 0.0);
    Index nonzero = 0;
    for (Index j = 0; j < fit.coefficients.size(); ++j) nonzero += fit.coefficients[j] != 0.0;
    CHECK(nonzero == 3);

    Eigen::MatrixXd only(d.train.x.rows(), 1);
    only.col(0) = d.train.x.matrix().col(5);
    const LayerStack one(only, {{"layer1", 0, 1, true}});
    const EnetFit f1 = fit_ridge_on(one, d.train.y, {0}, spec, 3);
    CHECK(f1.coefficients.size() == 1);
    CHECK(std::isfinite(f1.coefficients[0]));
}

TEST_CASE("two_step_epsgo excludes a failing layer and completes") {
    SimDataset d = small_data("A", 20, 13);
    Eigen::MatrixXd m = d.train.x.matrix();
    const Layer l2 = d.train.x.layer("layer2");
    m.middleCols(l2.begin, l2.size()) *= 1e306;
    const LayerStack broken(m, d.train.x.layers(), d.train.x.row_ids(), d.train.x.column_names());
    const auto r = run_method(broken, d.train.y, quick_spec(MethodKind::two_step_epsgo, 1));
    CHECK(r.has_flag("layer_excluded:layer2"));
    CHECK(!r.has_flag("layer_excluded:layer1"));
    REQUIRE(r.per_layer_selected.size() == 1);
    CHECK(r.per_layer_selected[0].layer == "layer1");
}

TEST_CASE("univariate screens") {
    const SimDataset d = small_data("E", 40, 15);
    const auto wald = run_method(d.train.x, d.train.y, quick_spec(MethodKind::univariate_wald, 0));
    check_common(wald, d.train.x);
    CHECK(wald.final_model.coefficients[0] != 0.0);
    const auto& p = wald.diagnostics["p_values"];
    Index penalised = 0;
    for (const auto& l : d.train.x.layers()) penalised += l.penalised ? l.end - l.begin : 0;
    CHECK(p.size() == static_cast<std::size_t>(penalised));
    std::size_t rejected = 0;
    for (const auto& v : p) rejected += (!v.is_null() && v.get<double>() < 0.05) ? 1 : 0;
    CHECK(wald.selected().size() == rejected);

    const auto mw = run_method(d.train.x, d.train.y, quick_spec(MethodKind::univariate_mw, 0));
    check_common(mw, d.train.x);
    const auto& adj = mw.diagnostics["adjusted_p_values"];
    std::size_t kept = 0;
    for (const auto& v : adj) kept += v.get<double>() < 0.05 ? 1 : 0;
    CHECK(mw.selected().size() == kept);

    // Strong single signal is found by the Wald screen in nearly every seed.
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(900 + seed);
        Eigen::MatrixXd x = ts::standardized(ts::gaussian_matrix(100, 5, rng));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::VectorXd y(100);
        for (Index i = 0; i < 100; ++i) y[i] = u(rng) < 1 / (1 + std::exp(-2.0 * x(i, 2))) ? 1.0 : 0.0;
        const LayerStack s(x, {{"c", 0, 2, false}, {"o", 2, 5, true}});
        MethodSpec spec = quick_spec(MethodKind::univariate_wald, seed);
        const auto r = run_method(s, BinaryResponse(y), spec);
        const auto sel = r.selected();
        hits += std::find(sel.begin(), sel.end(), 2) != sel.end() ? 1 : 0;
    }
    CHECK(hits >= 19);
}

TEST_CASE("univariate_wald rejects a block as wide as the sample") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 8);
    const LayerStack s(x, {{"c", 0, 5, false}, {"o", 5, 8, true}});
    const BinaryResponse y(std::vector<int>{0, 1, 0, 1, 0, 1});
    CHECK_THROWS_AS(run_univariate_wald(s, y, quick_spec(MethodKind::univariate_wald, 0)), InvalidArgument);
}

TEST_CASE("selection CSV lists every selected column") {
    const SimDataset d = small_data("A", 20, 17);
    const auto r = run_method(d.train.x, d.train.y, quick_spec(MethodKind::two_step_fixed, 3));
    const std::string csv = selection_csv(r, d.train.x);
    CHECK(csv.rfind("layer,column_name,coefficient_in_final_model,selection_frequency\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.selected().size() + 1);
}
