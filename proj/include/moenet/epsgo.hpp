#pragma once

#include "moenet/gp.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace moenet {

enum class Scale { linear, log2 };

struct SearchDim {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    /// With log2 scale, [lower, upper] bounds the exponent k and the value is 2^k.
    Scale scale = Scale::linear;
};

struct SearchSpace {
    std::vector<SearchDim> dims;

    std::size_t size() const { return dims.size(); }
    void validate() const;
    /// Maps a point of the unit cube to parameter values.
    std::vector<double> to_natural(const Eigen::Ref<const Eigen::VectorXd>& unit) const;
    Eigen::VectorXd to_unit(const std::vector<double>& natural) const;
};

struct EpsgoConfig {
    std::optional<int> init_points;  // default 10 D
    std::optional<int> max_evals;    // default 10 D + 50
    /// Default 1e-4 |q_min| + 1e-6.
    std::optional<double> ei_tol;
    int patience = 10;
    std::uint64_t seed = 0;

    int resolved_init(std::size_t d) const;
    int resolved_max(std::size_t d) const;
    double resolved_ei_tol(double q_min) const;
};

struct EpsgoEvaluation {
    int index = 0;
    Eigen::VectorXd unit_point;
    std::vector<double> point;
    double value = 0.0;  // +inf when the objective failed
    /// Expected improvement at proposal time (NaN for initial design points).
    double ei = 0.0;
    double elapsed_ms = 0.0;
    bool failed = false;
    bool exploration = false;
    std::string error;
};

struct EpsgoResult {
    std::vector<double> best_point;
    Eigen::VectorXd best_unit;
    double best_value = 0.0;
    int best_index = -1;
    std::vector<EpsgoEvaluation> history;
    /// One of "ei_below_tol", "patience", "max_evals".
    std::string stop_reason;
    int failures = 0;
    /// Every successful evaluation returned the same value.
    bool flat_surface = false;
};

struct Proposal {
    Eigen::VectorXd point;
    double ei = 0.0;
    bool exploration = false;
};

/// n x D sample with exactly one point per stratum [k/n, (k+1)/n) in every dimension.
Eigen::MatrixXd latin_hypercube(std::size_t d, std::size_t n, std::uint64_t seed);

/// Maximises EI by scoring 512 Latin-hypercube candidates and refining the
/// best 8 by 100 steps of adaptive coordinate search. When every candidate
/// has zero EI, returns the candidate farthest from the training points.
Proposal propose_next(const GpSurrogate& surrogate, const SearchSpace& space, std::uint64_t seed);

using Objective = std::function<double(const std::vector<double>&)>;

/// Minimises `objective` over `space`. A throwing or non-finite evaluation is
/// recorded as +inf and kept out of the surrogate; more than half failing
/// aborts with OptimizerError.
EpsgoResult epsgo_minimize(const Objective& objective, const SearchSpace& space, const EpsgoConfig& config);

nlohmann::ordered_json to_json(const EpsgoResult& result, const SearchSpace& space);
/// eval_index, one column per dimension, value, ei, elapsed_ms.
std::string history_csv(const EpsgoResult& result, const SearchSpace& space);

}  // namespace moenet
