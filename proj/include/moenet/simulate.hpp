#pragma once

#include "moenet/core_data.hpp"
#include "moenet/methods.hpp"
#include "moenet/rng.hpp"
#include "moenet/serialize.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace moenet {

enum class Covariance { sigma0, sigma1 };

/// Two-layer simulation design: a non-penalised block of P_N columns and two
/// penalised layers whose first P1r / P2r columns carry signal.
struct SimSetting {
    std::string name;
    Index p_n = 2;
    Index p1 = 0, p2 = 0;
    Index p1r = 0, p2r = 0;
    double beta_n = 0.0, beta1 = 0.0, beta2 = 0.0;
    Covariance covariance = Covariance::sigma0;
    double rho = 0.4;
    Index blocks = 10;
    double tau = 0.5;
    Index n_train = 100;
    Index n_test = 1000;
    std::uint64_t replicate_seed = 0;

    Index p() const { return p_n + p1 + p2; }
    void validate() const;
};

/// Built-in settings "A".."F" and "null" (shape of A, every beta zero).
SimSetting builtin_setting(const std::string& name, Covariance covariance = Covariance::sigma0);
const std::vector<std::string>& builtin_setting_names();

/// Caps each penalised layer at `max_layer` columns; relevant counts are
/// scaled by the same factor (at least one when the original had any).
SimSetting scaled_setting(const SimSetting& setting, Index max_layer);

SimSetting setting_from_json(const Json& j);
Json to_json(const SimSetting& setting);
std::string covariance_name(Covariance c);

/// Block-diagonal correlation matrix stored as independent groups of
/// columns, each with its own Cholesky factor.
class BlockCovariance {
public:
    struct Group {
        std::vector<Index> columns;
        std::size_t factor = 0;  // index into factors()
    };

    BlockCovariance(Index p, std::vector<Group> groups, std::vector<Eigen::MatrixXd> factors);

    Index size() const { return p_; }
    const std::vector<Group>& groups() const { return groups_; }
    double entry(Index i, Index j) const;
    Eigen::MatrixXd dense() const;
    /// One draw from N(0, Sigma) written into `out` (length P).
    void sample(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const;

private:
    Index p_;
    std::vector<Group> groups_;
    std::vector<Eigen::MatrixXd> factors_;  // lower Cholesky factors
    std::vector<Index> group_of_;
    std::vector<Index> position_;
};

/// Identity for sigma0. For sigma1: the non-penalised block is
/// equicorrelated (rho); block k of layer 1 together with block k of layer 2
/// forms one equicorrelated group; everything else is uncorrelated.
BlockCovariance build_sigma(const SimSetting& setting);

struct SimDataset {
    DataPair train;
    DataPair test;
    /// True for the signal columns of the penalised layers.
    std::vector<bool> relevant_mask;
};

/// Deterministic in setting.replicate_seed.
SimDataset sample_dataset(const SimSetting& setting);
/// Standardises the training part and applies the same transform to the test part.
SimDataset standardize_dataset(const SimDataset& data);

struct MetricsReport {
    double mr = 0.0;
    double mr_cv = 0.0;
    Index n_selected = 0;
    double precision = 1.0;
    double recall = 1.0;
};

MetricsReport score_method(const MethodResult& result, const SimDataset& data);
Json to_json(const MetricsReport& m);

struct BenchCell {
    std::string setting;
    std::string method;
    int replicate = 0;
    bool ok = false;
    std::string error;
    MetricsReport metrics;
};

struct BenchmarkReport {
    std::vector<BenchCell> cells;  // setting-major, then method, then replicate

    /// Long format: setting,method,replicate,metric,value (NA for failed cells).
    std::string csv() const;
    /// Per (setting, method): counts and mean / sd of every metric over successful cells.
    Json summary() const;
    std::size_t succeeded() const;
};

/// Runs every (setting, method, replicate) cell. Data for a cell depends only
/// on (seed, setting, replicate); the method seed on (seed, setting, method, replicate).
BenchmarkReport run_benchmark(const std::vector<SimSetting>& settings, const std::vector<MethodSpec>& methods,
                              int replicates, std::uint64_t seed);

}  // namespace moenet
