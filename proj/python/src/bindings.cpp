#include "moenet/core_data.hpp"
#include "moenet/cv.hpp"
#include "moenet/enet.hpp"
#include "moenet/epsgo.hpp"
#include "moenet/error.hpp"
#include "moenet/methods.hpp"
#include "moenet/parallel.hpp"
#include "moenet/ranking.hpp"
#include "moenet/serialize.hpp"
#include "moenet/simulate.hpp"
#include "moenet/stats.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace moenet;

namespace {

// Layers cross the boundary as (name, begin, end, penalised) tuples.
using LayerTuple = std::tuple<std::string, Index, Index, bool>;

LayerStack make_stack(const Eigen::MatrixXd& x, const std::vector<LayerTuple>& layers) {
    std::vector<Layer> ls;
    if (layers.empty()) ls.push_back({"layer1", 0, x.cols(), true});
    for (const auto& [name, begin, end, penalised] : layers) ls.push_back({name, begin, end, penalised});
    return LayerStack(x, std::move(ls));
}

std::vector<LayerTuple> layer_tuples(const LayerStack& s) {
    std::vector<LayerTuple> out;
    for (const auto& l : s.layers()) out.emplace_back(l.name, l.begin, l.end, l.penalised);
    return out;
}

EnetConfig enet_config(double alpha, double lambda, const std::optional<Eigen::VectorXd>& weights, double tol) {
    EnetConfig cfg;
    cfg.alpha = alpha;
    cfg.lambda = lambda;
    if (weights) cfg.penalty_weights = *weights;
    cfg.tol = tol;
    return cfg;
}

std::string fit_enet_json(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha, double lambda,
                          const std::optional<Eigen::VectorXd>& weights, double tol) {
    const EnetConfig cfg = enet_config(alpha, lambda, weights, tol);
    EnetFit fit;
    {
        py::gil_scoped_release release;
        fit = fit_enet(x, y, cfg);
    }
    return to_json(fit).dump();
}

Eigen::VectorXd predict(double intercept, const Eigen::VectorXd& coefficients, const Eigen::MatrixXd& x) {
    EnetFit fit;
    fit.intercept = intercept;
    fit.coefficients = coefficients;
    if (x.cols() != coefficients.size()) throw InvalidArgument("predict: x has the wrong number of columns");
    return predict_proba_rows(fit, x);
}

std::string cv_lambda_json(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const std::vector<LayerTuple>& layers, double alpha, int folds, std::uint64_t seed) {
    const LayerStack stack = make_stack(x, layers);
    EnetConfig cfg;
    cfg.alpha = alpha;
    cfg.penalty_weights = stack.default_penalty_weights();
    py::gil_scoped_release release;
    return to_json(cv_lambda(stack, BinaryResponse(y), cfg, folds, seed)).dump();
}

std::string run_method_json(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<LayerTuple>& layers, const std::string& method, std::uint64_t seed,
                            int cv_folds, std::optional<int> max_evals, std::optional<double> alpha) {
    const LayerStack stack = make_stack(x, layers);
    MethodSpec spec;
    spec.kind = parse_method(method);
    spec.seed = seed;
    spec.cv_folds = cv_folds;
    spec.epsgo.max_evals = max_evals;
    spec.alpha_fixed = alpha;
    spec.validate();
    py::gil_scoped_release release;
    const MethodResult r = run_method(stack, BinaryResponse(y), spec);
    return to_json(r, stack).dump();
}

py::dict simulate(const std::string& setting, const std::string& covariance, Index scale_to, Index n_test,
                  std::uint64_t seed, bool standardize) {
    if (covariance != "sigma0" && covariance != "sigma1")
        throw InvalidArgument("covariance must be sigma0 or sigma1");
    SimSetting s = builtin_setting(setting, covariance == "sigma1" ? Covariance::sigma1 : Covariance::sigma0);
    s.n_test = n_test;
    s.replicate_seed = seed;
    if (scale_to > 0) s = scaled_setting(s, scale_to);
    SimDataset d;
    {
        py::gil_scoped_release release;
        d = sample_dataset(s);
        if (standardize) d = standardize_dataset(d);
    }
    py::dict out;
    out["x_train"] = d.train.x.matrix();
    out["y_train"] = d.train.y.labels;
    out["x_test"] = d.test.x.matrix();
    out["y_test"] = d.test.y.labels;
    out["relevant"] = d.relevant_mask;
    out["layers"] = layer_tuples(d.train.x);
    out["column_names"] = d.train.x.column_names();
    return out;
}

std::string epsgo_json(const std::function<double(const std::vector<double>&)>& objective,
                       const std::vector<std::tuple<std::string, double, double, bool>>& dims, std::uint64_t seed,
                       std::optional<int> init_points, std::optional<int> max_evals, int patience) {
    SearchSpace space;
    for (const auto& [name, lo, hi, log2] : dims) space.dims.push_back({name, lo, hi, log2 ? Scale::log2 : Scale::linear});
    EpsgoConfig cfg;
    cfg.seed = seed;
    cfg.init_points = init_points;
    cfg.max_evals = max_evals;
    cfg.patience = patience;
    // Initial design points may be evaluated on worker threads.
    Objective wrapped = [&objective](const std::vector<double>& p) {
        py::gil_scoped_acquire acquire;
        return objective(p);
    };
    py::gil_scoped_release release;
    const EpsgoResult r = epsgo_minimize(wrapped, space, cfg);
    return to_json(r, space).dump();
}

py::dict bh(const std::vector<double>& p, double level) {
    const BhResult r = benjamini_hochberg(p, level);
    py::dict out;
    out["adjusted"] = r.adjusted;
    out["selected"] = r.selected;
    return out;
}

py::dict mw(const std::vector<double>& a, const std::vector<double>& b) {
    const MannWhitneyResult r = mann_whitney(a, b);
    py::dict out;
    out["u"] = r.u;
    out["p_normal"] = r.p_normal;
    out["p_exact"] = r.p_exact;
    return out;
}

py::dict aggregate(const std::vector<std::string>& persons,
                   const std::vector<std::pair<std::string, Eigen::VectorXd>>& layers) {
    std::vector<LayerProbability> probs;
    for (const auto& [name, p] : layers) probs.push_back({name, p, 0.0});
    const RankTable t = aggregate_ranks(persons, probs);
    py::dict out;
    out["persons"] = t.persons;
    out["layers"] = t.layers;
    out["per_layer_rank"] = t.per_layer_rank;
    out["aggregate_rank"] = t.aggregate_rank;
    out["normalized_rank"] = t.normalized_rank;
    return out;
}

}  // namespace

PYBIND11_MODULE(_moenet, m) {
    m.doc() = "Penalised logistic regression for multi-layer data";
    py::register_exception<Error>(m, "MoenetError");

    m.def("set_jobs", [](std::size_t jobs) { set_worker_count(jobs); }, py::arg("jobs"));
    m.def("jobs", &worker_count);

    m.def("fit_enet", &fit_enet_json, py::arg("x"), py::arg("y"), py::arg("alpha") = 1.0, py::arg("lam") = 0.0,
          py::arg("penalty_weights") = py::none(), py::arg("tol") = 1e-7);
    m.def(
        "lambda_max",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
           const std::optional<Eigen::VectorXd>& weights) {
            return lambda_max(x, y, enet_config(alpha, 0.0, weights, 1e-7));
        },
        py::arg("x"), py::arg("y"), py::arg("alpha") = 1.0, py::arg("penalty_weights") = py::none());
    m.def("predict_proba", &predict, py::arg("intercept"), py::arg("coefficients"), py::arg("x"));
    m.def("cv_lambda", &cv_lambda_json, py::arg("x"), py::arg("y"), py::arg("layers") = std::vector<LayerTuple>{},
          py::arg("alpha") = 1.0, py::arg("folds") = 10, py::arg("seed") = 0);
    m.def("run_method", &run_method_json, py::arg("x"), py::arg("y"), py::arg("layers"), py::arg("method"),
          py::arg("seed") = 0, py::arg("cv_folds") = 10, py::arg("max_evals") = py::none(),
          py::arg("alpha") = py::none());
    m.def("method_names", [] {
        std::vector<std::string> out;
        for (MethodKind k : all_methods()) out.push_back(method_name(k));
        return out;
    });
    m.def("simulate", &simulate, py::arg("setting"), py::arg("covariance") = "sigma0", py::arg("scale_to") = 0,
          py::arg("n_test") = 1000, py::arg("seed") = 0, py::arg("standardize") = true);
    m.def("epsgo_minimize", &epsgo_json, py::arg("objective"), py::arg("dims"), py::arg("seed") = 0,
          py::arg("init_points") = py::none(), py::arg("max_evals") = py::none(), py::arg("patience") = 10);
    m.def("latin_hypercube", &latin_hypercube, py::arg("d"), py::arg("n"), py::arg("seed") = 0);
    m.def("expected_improvement", py::overload_cast<double, double, double>(&expected_improvement), py::arg("mu"),
          py::arg("sigma"), py::arg("q_min"));
    m.def("benjamini_hochberg", &bh, py::arg("p"), py::arg("level") = 0.05);
    m.def("mann_whitney", &mw, py::arg("a"), py::arg("b"));
    m.def("descending_ranks", &descending_ranks, py::arg("values"));
    m.def("aggregate_ranks", &aggregate, py::arg("persons"), py::arg("layers"));
}
