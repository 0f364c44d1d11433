#include "moenet/simulate.hpp"

#include "moenet/cv.hpp"
#include "moenet/error.hpp"
#include "moenet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace moenet {

namespace {

struct TableRow {
    const char* name;
    Index p1, p2, p1r, p2r;
    double beta1, beta2;
};

// beta_N equals beta_1 in every setting.
constexpr TableRow kTable[] = {
    {"A", 1000, 1000, 10, 10, 0.5, 0.5}, {"B", 100, 1000, 3, 30, 0.5, 0.5}, {"C", 100, 1000, 10, 10, 0.5, 0.5},
    {"D", 100, 1000, 20, 0, 0.3, 0.0},   {"E", 20, 1000, 3, 10, 1.0, 0.3},  {"F", 20, 1000, 15, 3, 0.5, 0.5},
};

Eigen::MatrixXd equicorrelated_factor(Index size, double rho) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(size, size, rho);
    s.diagonal().setOnes();
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw InvalidArgument("covariance block of size " + std::to_string(size) + " is not positive definite");
    return llt.matrixL();
}

DataPair draw(const SimSetting& s, const BlockCovariance& sigma, const Eigen::VectorXd& mu, Index n, Rng& rng,
              bool require_both) {
    std::bernoulli_distribution coin(s.tau);
    Eigen::VectorXd y(n);
    int attempts = 0;
    for (;;) {
        for (Index i = 0; i < n; ++i) y[i] = coin(rng) ? 1.0 : 0.0;
        const double ones = y.sum();
        if (!require_both || (ones > 0 && ones < static_cast<double>(n))) break;
        if (++attempts >= 100) throw InvalidArgument("sample_dataset: could not draw both classes in 100 attempts");
    }
    const Index p = s.p();
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd row(p);
    for (Index i = 0; i < n; ++i) {
        sigma.sample(rng, row);
        if (y[i] == 1.0) row += mu;
        x.row(i) = row.transpose();
    }

    std::vector<Layer> layers;
    std::vector<std::string> names;
    if (s.p_n > 0) layers.push_back({"clinical", 0, s.p_n, false});
    layers.push_back({"layer1", s.p_n, s.p_n + s.p1, true});
    layers.push_back({"layer2", s.p_n + s.p1, p, true});
    for (Index j = 0; j < s.p_n; ++j) names.push_back("N" + std::to_string(j + 1));
    for (Index j = 0; j < s.p1; ++j) names.push_back("A" + std::to_string(j + 1));
    for (Index j = 0; j < s.p2; ++j) names.push_back("B" + std::to_string(j + 1));
    std::vector<std::string> ids;
    for (Index i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i + 1));
    return {LayerStack(std::move(x), std::move(layers), std::move(ids), std::move(names)), BinaryResponse(y)};
}

double sample_sd(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return std::nan("");
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void SimSetting::validate() const {
    if (p_n < 0 || p1 < 0 || p2 < 0) throw InvalidArgument("setting " + name + ": negative column count");
    if (p1r < 0 || p1r > p1 || p2r < 0 || p2r > p2)
        throw InvalidArgument("setting " + name + ": relevant counts must not exceed layer sizes");
    if (p1 + p2 == 0) throw InvalidArgument("setting " + name + ": no penalised columns");
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("setting " + name + ": rho must lie in [0,1)");
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("setting " + name + ": tau must lie in (0,1)");
    if (n_train < 2 || n_test < 1) throw InvalidArgument("setting " + name + ": sample sizes too small");
    if (!std::isfinite(beta_n) || !std::isfinite(beta1) || !std::isfinite(beta2))
        throw InvalidArgument("setting " + name + ": non-finite effect size");
    if (covariance == Covariance::sigma1) {
        if (blocks < 1) throw InvalidArgument("setting " + name + ": block count must be positive");
        if (p1 % blocks != 0 || p2 % blocks != 0)
            throw InvalidArgument("setting " + name + ": block count " + std::to_string(blocks) +
                                  " must divide P1 and P2");
    }
}

const std::vector<std::string>& builtin_setting_names() {
    static const std::vector<std::string> names{"A", "B", "C", "D", "E", "F", "null"};
    return names;
}

SimSetting builtin_setting(const std::string& name, Covariance covariance) {
    const std::string key = name == "null" ? "A" : name;
    for (const auto& row : kTable) {
        if (key != row.name) continue;
        SimSetting s;
        s.name = name;
        s.p1 = row.p1;
        s.p2 = row.p2;
        s.p1r = row.p1r;
        s.p2r = row.p2r;
        s.beta_n = row.beta1;
        s.beta1 = row.beta1;
        s.beta2 = row.beta2;
        s.covariance = covariance;
        if (name == "null") {
            s.p1r = s.p2r = 0;
            s.beta_n = s.beta1 = s.beta2 = 0.0;
        }
        return s;
    }
    throw InvalidArgument("unknown setting '" + name + "' (expected one of A-F or null)");
}

SimSetting scaled_setting(const SimSetting& setting, Index max_layer) {
    if (max_layer < 1) throw InvalidArgument("scaled_setting: max_layer must be positive");
    SimSetting s = setting;
    auto scale = [&](Index p, Index pr, Index& p_out, Index& pr_out) {
        p_out = std::min(p, max_layer);
        if (pr == 0 || p == 0) {
            pr_out = 0;
            return;
        }
        const double scaled = std::round(static_cast<double>(pr) * static_cast<double>(p_out) / static_cast<double>(p));
        pr_out = std::clamp<Index>(static_cast<Index>(scaled), 1, p_out);
    };
    scale(setting.p1, setting.p1r, s.p1, s.p1r);
    scale(setting.p2, setting.p2r, s.p2, s.p2r);
    return s;
}

std::string covariance_name(Covariance c) { return c == Covariance::sigma0 ? "sigma0" : "sigma1"; }

Json to_json(const SimSetting& s) {
    Json j;
    j["name"] = s.name;
    j["p_n"] = s.p_n;
    j["p1"] = s.p1;
    j["p2"] = s.p2;
    j["p1r"] = s.p1r;
    j["p2r"] = s.p2r;
    j["beta_n"] = s.beta_n;
    j["beta1"] = s.beta1;
    j["beta2"] = s.beta2;
    j["covariance"] = covariance_name(s.covariance);
    j["rho"] = s.rho;
    j["blocks"] = s.blocks;
    j["tau"] = s.tau;
    j["n_train"] = s.n_train;
    j["n_test"] = s.n_test;
    j["replicate_seed"] = s.replicate_seed;
    return j;
}

SimSetting setting_from_json(const Json& j) {
    static const std::set<std::string> known{"name", "base",  "scale_to", "p_n",    "p1",     "p2",
                                             "p1r",  "p2r",   "beta_n",   "beta1",  "beta2",  "covariance",
                                             "rho",  "blocks", "tau",     "n_train", "n_test", "replicate_seed"};
    if (!j.is_object()) throw ParseError("setting must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ParseError("unknown setting field '" + k + "'");
    try {
        Covariance cov = Covariance::sigma0;
        if (j.contains("covariance")) {
            const std::string c = j.at("covariance").get<std::string>();
            if (c == "sigma0")
                cov = Covariance::sigma0;
            else if (c == "sigma1")
                cov = Covariance::sigma1;
            else
                throw ParseError("covariance must be sigma0 or sigma1, got '" + c + "'");
        }
        SimSetting s = j.contains("base") ? builtin_setting(j.at("base").get<std::string>(), cov) : SimSetting{};
        s.covariance = cov;
        if (j.contains("scale_to")) s = scaled_setting(s, j.at("scale_to").get<Index>());
        s.name = j.value("name", s.name.empty() ? std::string("custom") : s.name);
        s.p_n = j.value("p_n", s.p_n);
        s.p1 = j.value("p1", s.p1);
        s.p2 = j.value("p2", s.p2);
        s.p1r = j.value("p1r", s.p1r);
        s.p2r = j.value("p2r", s.p2r);
        s.beta_n = j.value("beta_n", s.beta_n);
        s.beta1 = j.value("beta1", s.beta1);
        s.beta2 = j.value("beta2", s.beta2);
        s.rho = j.value("rho", s.rho);
        s.blocks = j.value("blocks", s.blocks);
        s.tau = j.value("tau", s.tau);
        s.n_train = j.value("n_train", s.n_train);
        s.n_test = j.value("n_test", s.n_test);
        s.replicate_seed = j.value("replicate_seed", s.replicate_seed);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed setting: ") + e.what());
    }
}

BlockCovariance::BlockCovariance(Index p, std::vector<Group> groups, std::vector<Eigen::MatrixXd> factors)
    : p_(p), groups_(std::move(groups)), factors_(std::move(factors)), group_of_(static_cast<std::size_t>(p), -1),
      position_(static_cast<std::size_t>(p), 0) {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        const auto& grp = groups_[g];
        if (factors_.at(grp.factor).rows() != static_cast<Index>(grp.columns.size()))
            throw InvalidArgument("BlockCovariance: factor size does not match its group");
        for (std::size_t k = 0; k < grp.columns.size(); ++k) {
            const Index c = grp.columns[k];
            if (c < 0 || c >= p || group_of_[static_cast<std::size_t>(c)] >= 0)
                throw InvalidArgument("BlockCovariance: groups must partition the columns");
            group_of_[static_cast<std::size_t>(c)] = static_cast<Index>(g);
            position_[static_cast<std::size_t>(c)] = static_cast<Index>(k);
        }
    }
}

double BlockCovariance::entry(Index i, Index j) const {
    const Index gi = group_of_.at(static_cast<std::size_t>(i)), gj = group_of_.at(static_cast<std::size_t>(j));
    if (gi < 0 || gj < 0) return i == j ? 1.0 : 0.0;
    if (gi != gj) return 0.0;
    const Eigen::MatrixXd& l = factors_[groups_[static_cast<std::size_t>(gi)].factor];
    const Index a = position_[static_cast<std::size_t>(i)], b = position_[static_cast<std::size_t>(j)];
    return l.row(a).dot(l.row(b));
}

Eigen::MatrixXd BlockCovariance::dense() const {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(p_, p_);
    for (const auto& g : groups_) {
        const Eigen::MatrixXd& l = factors_[g.factor];
        const Eigen::MatrixXd block = l * l.transpose();
        for (std::size_t a = 0; a < g.columns.size(); ++a)
            for (std::size_t b = 0; b < g.columns.size(); ++b)
                s(g.columns[a], g.columns[b]) = block(static_cast<Index>(a), static_cast<Index>(b));
    }
    return s;
}

void BlockCovariance::sample(Rng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < p_; ++j) out[j] = normal(rng);
    Eigen::VectorXd z;
    for (const auto& g : groups_) {
        const Index m = static_cast<Index>(g.columns.size());
        z.resize(m);
        for (Index k = 0; k < m; ++k) z[k] = out[g.columns[static_cast<std::size_t>(k)]];
        const Eigen::VectorXd v = factors_[g.factor].triangularView<Eigen::Lower>() * z;
        for (Index k = 0; k < m; ++k) out[g.columns[static_cast<std::size_t>(k)]] = v[k];
    }
}

BlockCovariance build_sigma(const SimSetting& s) {
    s.validate();
    std::vector<BlockCovariance::Group> groups;
    std::vector<Eigen::MatrixXd> factors;
    if (s.covariance == Covariance::sigma1 && s.rho > 0.0) {
        if (s.p_n > 1) {
            factors.push_back(equicorrelated_factor(s.p_n, s.rho));
            BlockCovariance::Group g;
            for (Index j = 0; j < s.p_n; ++j) g.columns.push_back(j);
            g.factor = 0;
            groups.push_back(std::move(g));
        }
        const Index w1 = s.p1 / s.blocks, w2 = s.p2 / s.blocks;
        if (w1 + w2 > 1) {
            factors.push_back(equicorrelated_factor(w1 + w2, s.rho));
            const std::size_t f = factors.size() - 1;
            for (Index k = 0; k < s.blocks; ++k) {
                BlockCovariance::Group g;
                for (Index j = 0; j < w1; ++j) g.columns.push_back(s.p_n + k * w1 + j);
                for (Index j = 0; j < w2; ++j) g.columns.push_back(s.p_n + s.p1 + k * w2 + j);
                g.factor = f;
                groups.push_back(std::move(g));
            }
        }
    }
    return BlockCovariance(s.p(), std::move(groups), std::move(factors));
}

SimDataset sample_dataset(const SimSetting& s) {
    const BlockCovariance sigma = build_sigma(s);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(s.p());
    mu.head(s.p_n).setConstant(s.beta_n);
    mu.segment(s.p_n, s.p1r).setConstant(s.beta1);
    mu.segment(s.p_n + s.p1, s.p2r).setConstant(s.beta2);

    SimDataset out;
    Rng train_rng(derive_seed(s.replicate_seed, {hash_tag("train")}));
    Rng test_rng(derive_seed(s.replicate_seed, {hash_tag("test")}));
    out.train = draw(s, sigma, mu, s.n_train, train_rng, true);
    out.test = draw(s, sigma, mu, s.n_test, test_rng, false);
    out.relevant_mask.assign(static_cast<std::size_t>(s.p()), false);
    for (Index j = 0; j < s.p1r; ++j) out.relevant_mask[static_cast<std::size_t>(s.p_n + j)] = true;
    for (Index j = 0; j < s.p2r; ++j) out.relevant_mask[static_cast<std::size_t>(s.p_n + s.p1 + j)] = true;
    return out;
}

SimDataset standardize_dataset(const SimDataset& data) {
    auto [train_x, params] = standardize(data.train.x);
    SimDataset out;
    out.test = {apply_standardization(data.test.x, params), data.test.y};
    out.train = {std::move(train_x), data.train.y};
    for (Index j : params.kept) out.relevant_mask.push_back(data.relevant_mask[static_cast<std::size_t>(j)]);
    return out;
}

MetricsReport score_method(const MethodResult& result, const SimDataset& data) {
    const Index p = data.train.x.cols();
    if (result.final_model.coefficients.size() != p || static_cast<Index>(data.relevant_mask.size()) != p)
        throw InvalidArgument("score_method: model dimension does not match the data");
    MetricsReport m;
    m.mr = misclassification_rate(result.final_model, data.test.x, data.test.y);
    m.mr_cv = misclassification_rate(result.final_model, data.train.x, data.train.y);
    const std::vector<Index> sel = result.selected();
    m.n_selected = static_cast<Index>(sel.size());
    Index hits = 0, relevant = 0;
    for (Index j : sel) hits += data.relevant_mask[static_cast<std::size_t>(j)] ? 1 : 0;
    for (bool r : data.relevant_mask) relevant += r ? 1 : 0;
    m.precision = sel.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(sel.size());
    m.recall = relevant == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(relevant);
    return m;
}

Json to_json(const MetricsReport& m) {
    Json j;
    j["mr"] = m.mr;
    j["mr_cv"] = m.mr_cv;
    j["n_selected"] = m.n_selected;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    return j;
}

namespace {
const char* const kMetrics[] = {"mr", "mr_cv", "n_selected", "precision", "recall"};

double metric_value(const MetricsReport& m, int k) {
    switch (k) {
        case 0: return m.mr;
        case 1: return m.mr_cv;
        case 2: return static_cast<double>(m.n_selected);
        case 3: return m.precision;
        default: return m.recall;
    }
}
}  // namespace

std::string BenchmarkReport::csv() const {
    std::ostringstream out;
    out << "setting,method,replicate,metric,value\n";
    for (const auto& c : cells)
        for (int k = 0; k < 5; ++k)
            out << c.setting << ',' << c.method << ',' << c.replicate << ',' << kMetrics[k] << ','
                << (c.ok ? format_double(metric_value(c.metrics, k)) : std::string("NA")) << '\n';
    return out.str();
}

std::size_t BenchmarkReport::succeeded() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const BenchCell& c) { return c.ok; }));
}

Json BenchmarkReport::summary() const {
    // Keep first-appearance order of settings and methods.
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<const BenchCell*>> groups;
    for (const auto& c : cells) {
        auto key = std::make_pair(c.setting, c.method);
        if (!groups.count(key)) keys.push_back(key);
        groups[key].push_back(&c);
    }
    Json out;
    out["precision_convention"] = "precision is 1 when nothing is selected";
    out["recall_convention"] = "recall is 1 when no column is relevant";
    Json rows = Json::array();
    for (const auto& key : keys) {
        const auto& g = groups[key];
        Json r;
        r["setting"] = key.first;
        r["method"] = key.second;
        int ok = 0;
        Json failures = Json::array();
        for (const BenchCell* c : g) {
            if (c->ok)
                ++ok;
            else
                failures.push_back({{"replicate", c->replicate}, {"error", c->error}});
        }
        r["succeeded"] = ok;
        r["failed"] = static_cast<int>(g.size()) - ok;
        for (int k = 0; k < 5; ++k) {
            std::vector<double> v;
            for (const BenchCell* c : g)
                if (c->ok) v.push_back(metric_value(c->metrics, k));
            double mean = std::nan("");
            if (!v.empty()) {
                mean = 0.0;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
            }
            r[kMetrics[k]] = {{"mean", number_or_null(mean)}, {"sd", number_or_null(sample_sd(v, mean))}};
        }
        r["failures"] = std::move(failures);
        rows.push_back(std::move(r));
    }
    out["cells"] = std::move(rows);
    return out;
}

BenchmarkReport run_benchmark(const std::vector<SimSetting>& settings, const std::vector<MethodSpec>& methods,
                              int replicates, std::uint64_t seed) {
    if (replicates < 1) throw InvalidArgument("run_benchmark: at least one replicate is required");
    if (settings.empty() || methods.empty()) throw InvalidArgument("run_benchmark: empty settings or methods");
    for (const auto& s : settings) s.validate();
    for (const auto& m : methods) m.validate();

    BenchmarkReport report;
    for (const auto& s : settings)
        for (const auto& m : methods)
            for (int r = 0; r < replicates; ++r) report.cells.push_back({s.name, method_name(m.kind), r, false, {}, {}});

    const std::size_t per_setting = methods.size() * static_cast<std::size_t>(replicates);
    parallel_for(report.cells.size(), [&](std::size_t idx) {
        BenchCell& cell = report.cells[idx];
        const SimSetting& base = settings[idx / per_setting];
        const MethodSpec& mspec = methods[(idx % per_setting) / static_cast<std::size_t>(replicates)];
        const auto r = static_cast<std::uint64_t>(cell.replicate);
        try {
            SimSetting s = base;
            s.replicate_seed = derive_seed(seed, {hash_tag(s.name), r});
            const SimDataset data = standardize_dataset(sample_dataset(s));
            MethodSpec spec = mspec;
            spec.seed = derive_seed(seed, {hash_tag(s.name), hash_tag(cell.method), r});
            const MethodResult result = run_method(data.train.x, data.train.y, spec);
            cell.metrics = score_method(result, data);
            cell.ok = true;
        } catch (const Error& e) {
            cell.error = e.what();
        }
    });
    return report;
}

}  // namespace moenet
