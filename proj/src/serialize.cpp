#include "moenet/serialize.hpp"

#include "moenet/error.hpp"
#include "moenet/methods.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace moenet {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const EnetFit& fit) {
    Json j;
    j["intercept"] = fit.intercept;
    Json coefs = Json::object();
    for (Index k = 0; k < fit.coefficients.size(); ++k)
        if (fit.coefficients[k] != 0.0) coefs[std::to_string(k)] = fit.coefficients[k];
    j["coefficients"] = std::move(coefs);
    j["p"] = fit.coefficients.size();
    j["alpha"] = fit.alpha;
    j["lambda"] = fit.lambda;
    j["n_nonzero"] = fit.n_nonzero;
    j["converged"] = fit.converged;
    j["objective"] = number_or_null(fit.objective);
    j["separation_warning"] = fit.separation_warning;
    j["outer_iterations"] = fit.outer_iterations;
    if (!fit.ok()) j["error"] = fit.error;
    return j;
}

EnetFit enet_fit_from_json(const Json& j, Index p) {
    EnetFit fit;
    try {
        fit.intercept = j.at("intercept").get<double>();
        fit.coefficients = Eigen::VectorXd::Zero(p);
        for (const auto& [key, value] : j.at("coefficients").items()) {
            const Index k = std::stol(key);
            if (k < 0 || k >= p) throw ParseError("model coefficient index " + key + " out of range");
            fit.coefficients[k] = value.get<double>();
        }
        fit.alpha = j.value("alpha", 0.0);
        fit.lambda = j.value("lambda", 0.0);
        fit.n_nonzero = j.value("n_nonzero", Index{0});
        fit.converged = j.value("converged", true);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model JSON: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ParseError("malformed coefficient index in model JSON");
    }
    return fit;
}

Json to_json(const CvResult& cv) {
    Json j;
    j["lambda_grid"] = cv.lambda_grid;
    Json mean = Json::array();
    for (double v : cv.mean_mr) mean.push_back(number_or_null(v));
    j["mean_mr"] = std::move(mean);
    Json per_fold = Json::array();
    for (Index f = 0; f < cv.mr_per_fold.rows(); ++f) {
        Json row = Json::array();
        for (Index l = 0; l < cv.mr_per_fold.cols(); ++l) row.push_back(number_or_null(cv.mr_per_fold(f, l)));
        per_fold.push_back(std::move(row));
    }
    j["mr_per_fold"] = std::move(per_fold);
    j["chosen_index"] = cv.chosen_index;
    j["chosen_lambda"] = cv.chosen_lambda;
    j["chosen_fit"] = to_json(cv.chosen_fit);
    j["selected_set"] = cv.selected_set;
    j["folds"] = cv.folds;
    j["dropped_folds"] = cv.dropped_folds;
    j["warnings"] = cv.warnings;
    return j;
}

Json to_json(const RepeatedSelection& rs) {
    Json j;
    j["repeats"] = rs.repeats;
    j["maximal_set"] = rs.maximal_set;
    j["modal_set"] = rs.modal_set;
    j["modal_count"] = rs.modal_count;
    Json freq = Json::object();
    for (const auto& [k, c] : rs.frequency) freq[std::to_string(k)] = c;
    j["frequency"] = std::move(freq);
    j["per_repeat_sets"] = rs.per_repeat_sets;
    return j;
}

std::string frequency_csv(const RepeatedSelection& rs, const LayerStack& stack) {
    std::ostringstream out;
    out << "column_name,layer,count\n";
    for (const auto& [k, c] : rs.frequency)
        out << stack.column_names()[static_cast<std::size_t>(k)] << ',' << stack.layers()[stack.layer_of(k)].name << ','
            << c << '\n';
    return out.str();
}

Json to_json(const MethodResult& result, const LayerStack& stack) {
    Json j;
    j["method"] = method_name(result.kind);
    j["final_model"] = to_json(result.final_model);
    Json per_layer = Json::object();
    for (const auto& s : result.per_layer_selected) {
        Json cols = Json::array();
        for (Index k : s.columns) cols.push_back(stack.column_names()[static_cast<std::size_t>(k)]);
        per_layer[s.layer] = {{"indices", s.columns}, {"columns", std::move(cols)}};
    }
    j["per_layer_selected"] = std::move(per_layer);
    j["n_selected"] = result.selected().size();
    Json hyper = Json::object();
    for (const auto& [k, v] : result.hyperparams) hyper[k] = number_or_null(v);
    j["hyperparams"] = std::move(hyper);
    j["flags"] = result.flags;
    j["diagnostics"] = result.diagnostics;
    return j;
}

std::string selection_csv(const MethodResult& result, const LayerStack& stack) {
    std::ostringstream out;
    out << "layer,column_name,coefficient_in_final_model,selection_frequency\n";
    for (const auto& s : result.per_layer_selected)
        for (Index k : s.columns) {
            auto it = result.selection_frequency.find(k);
            out << s.layer << ',' << stack.column_names()[static_cast<std::size_t>(k)] << ','
                << format_double(result.final_model.coefficients[k]) << ','
                << (it == result.selection_frequency.end() ? 0 : it->second) << '\n';
        }
    return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << text;
    if (!out) throw InvalidArgument("failed writing " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace moenet
