// moenet command-line driver: simulate | fit | bench | rank | validate.

#include "moenet/cv.hpp"
#include "moenet/error.hpp"
#include "moenet/methods.hpp"
#include "moenet/parallel.hpp"
#include "moenet/ranking.hpp"
#include "moenet/serialize.hpp"
#include "moenet/simulate.hpp"
#include "moenet/stats.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace moenet;

namespace {

constexpr const char* kVersion = "0.1.0";

// Raised for bad invocations that CLI11 itself cannot detect; maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string sha256_file(const fs::path& path) {
    const std::string data = read_text(path);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream out;
    out << std::hex;
    for (unsigned int i = 0; i < len; ++i) out << (md[i] < 16 ? "0" : "") << static_cast<int>(md[i]);
    return out.str();
}

class RunManifest {
public:
    RunManifest(std::string command, Json config, std::uint64_t seed)
        : command_(std::move(command)), config_(std::move(config)), seed_(seed), started_(utc_now()) {}

    void add_input(const std::string& role, const fs::path& path) { inputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}}; }
    void add_output(const std::string& name) { outputs_.push_back(name); }

    void write(const fs::path& dir, const std::string& status) const {
        Json j;
        j["command"] = command_;
        j["config"] = config_;
        j["seed"] = seed_;
        j["versions"] = {{"moenet", kVersion},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                       "." + std::to_string(EIGEN_MINOR_VERSION)},
                         {"compiler", __VERSION__}};
        j["inputs"] = inputs_.empty() ? Json::object() : inputs_;
        j["outputs"] = outputs_;
        j["jobs"] = worker_count();
        j["status"] = status;
        j["started_utc"] = started_;
        j["finished_utc"] = utc_now();
        write_json(dir / "manifest.json", j);
    }

private:
    std::string command_;
    Json config_;
    std::uint64_t seed_;
    std::string started_;
    Json inputs_ = Json::object();
    std::vector<std::string> outputs_;
};

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw UsageError(what + " not found: " + p.string());
}

Covariance parse_covariance(const std::string& s) {
    if (s == "sigma0") return Covariance::sigma0;
    if (s == "sigma1") return Covariance::sigma1;
    throw UsageError("--covariance must be sigma0 or sigma1");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

Json read_json_file(const fs::path& p) {
    try {
        return Json::parse(read_text(p));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string setting;
    fs::path experiment;
    std::string covariance = "sigma0";
    Index scale_to = 0;
    Index n_test = 1000;
    std::uint64_t seed = 0;
    fs::path out;
};

int cmd_simulate(const SimulateArgs& a) {
    SimSetting s;
    try {
        if (!a.experiment.empty()) {
            require_file(a.experiment, "experiment file");
            s = setting_from_json(read_json_file(a.experiment));
        } else {
            s = builtin_setting(a.setting, parse_covariance(a.covariance));
            s.n_test = a.n_test;
            if (a.scale_to > 0) s = scaled_setting(s, a.scale_to);
        }
        s.replicate_seed = derive_seed(a.seed, {hash_tag("simulate")});
        s.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    ensure_dir(a.out);
    Json config = to_json(s);
    RunManifest manifest("simulate", config, a.seed);
    if (!a.experiment.empty()) manifest.add_input("experiment", a.experiment);

    const SimDataset data = sample_dataset(s);
    save_csv(a.out / "train.csv", data.train.x, data.train.y);
    save_csv(a.out / "test.csv", data.test.x, data.test.y);
    LayerManifest::from_stack(data.train.x).write(a.out / "layers.json");
    std::ostringstream mask;
    mask << "column_name,layer,relevant\n";
    const auto& x = data.train.x;
    for (Index j = 0; j < x.cols(); ++j)
        mask << x.column_names()[static_cast<std::size_t>(j)] << ',' << x.layers()[x.layer_of(j)].name << ','
             << (data.relevant_mask[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
    write_text(a.out / "mask.csv", mask.str());
    for (const char* f : {"train.csv", "test.csv", "layers.json", "mask.csv"}) manifest.add_output(f);
    manifest.write(a.out, "ok");
    return 0;
}

// --------------------------------------------------------------------- fit

struct MethodArgs {
    std::string method;
    std::optional<double> alpha;
    int folds = 10;
    int repeats = 1;
    std::optional<int> init_points;
    std::optional<int> max_evals;
    int patience = 10;
};

MethodSpec make_spec(const MethodArgs& a, MethodKind kind, std::uint64_t seed) {
    MethodSpec spec;
    spec.kind = kind;
    if (kind == MethodKind::two_step_fixed) spec.alpha_fixed = a.alpha.value_or(0.1);
    spec.cv_folds = a.folds;
    spec.repeats = a.repeats;
    spec.epsgo.init_points = a.init_points;
    spec.epsgo.max_evals = a.max_evals;
    spec.epsgo.patience = a.patience;
    spec.seed = seed;
    try {
        spec.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    return spec;
}

Json method_args_json(const MethodArgs& a) {
    Json j;
    j["alpha"] = a.alpha ? Json(*a.alpha) : Json(nullptr);
    j["folds"] = a.folds;
    j["repeats"] = a.repeats;
    j["init_points"] = a.init_points ? Json(*a.init_points) : Json(nullptr);
    j["max_evals"] = a.max_evals ? Json(*a.max_evals) : Json(nullptr);
    j["patience"] = a.patience;
    return j;
}

struct FitArgs {
    fs::path data, layers, test, mask, out;
    MethodArgs method;
    std::uint64_t seed = 0;
};

std::vector<bool> read_mask(const fs::path& path, const LayerStack& stack) {
    const NumericTable t = [&] {
        // mask.csv has a text column, so parse it by hand.
        std::istringstream in(read_text(path));
        std::string line;
        std::getline(in, line);
        NumericTable tab;
        std::vector<double> vals;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto first = line.find(',');
            const auto last = line.rfind(',');
            if (first == std::string::npos) throw ParseError(path.string() + ": malformed mask line '" + line + "'");
            tab.ids.push_back(line.substr(0, first));
            vals.push_back(line.substr(last + 1) == "1" ? 1.0 : 0.0);
        }
        tab.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Index>(vals.size()));
        return tab;
    }();
    std::map<std::string, bool> relevant;
    for (std::size_t i = 0; i < t.ids.size(); ++i) relevant[t.ids[i]] = t.values(static_cast<Index>(i), 0) == 1.0;
    std::vector<bool> out;
    for (const auto& name : stack.column_names()) {
        auto it = relevant.find(name);
        out.push_back(it != relevant.end() && it->second);
    }
    return out;
}

Json standardization_json(const StandardizationParams& p, const LayerStack& raw) {
    Json j;
    Json cols = Json::array(), means = Json::array(), scales = Json::array();
    for (Index k : p.kept) {
        cols.push_back(raw.column_names()[static_cast<std::size_t>(k)]);
        means.push_back(p.means[k]);
        scales.push_back(p.scales[k]);
    }
    j["columns"] = std::move(cols);
    j["means"] = std::move(means);
    j["scales"] = std::move(scales);
    Json dropped = Json::array();
    for (Index k : p.dropped) dropped.push_back(raw.column_names()[static_cast<std::size_t>(k)]);
    j["dropped"] = std::move(dropped);
    return j;
}

int cmd_fit(const FitArgs& a) {
    require_file(a.data, "data file");
    require_file(a.layers, "layer manifest");
    MethodKind kind;
    try {
        kind = parse_method(a.method.method);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (a.method.alpha && kind != MethodKind::two_step_fixed) throw UsageError("--alpha applies only to two_step_fixed");
    const MethodSpec spec = make_spec(a.method, kind, derive_seed(a.seed, {hash_tag("fit")}));
    if (!a.mask.empty() && a.test.empty()) throw UsageError("--mask requires --test");

    Json config = method_args_json(a.method);
    config["method"] = a.method.method;
    ensure_dir(a.out);
    RunManifest manifest("fit", config, a.seed);
    manifest.add_input("data", a.data);
    manifest.add_input("layers", a.layers);

    const LayerManifest layers = LayerManifest::from_json_file(a.layers);
    if (layers.response.empty()) throw UsageError("layer manifest names no response column");
    const DataPair train = load_csv(a.data, layers);
    auto [x, params] = standardize(train.x);

    Json result_json;
    MethodResult result;
    try {
        result = run_method(x, train.y, spec);
    } catch (const Error& e) {
        result_json["method"] = a.method.method;
        result_json["status"] = "failed";
        result_json["error"] = e.what();
        write_json(a.out / "result.json", result_json);
        manifest.add_output("result.json");
        manifest.write(a.out, "failed");
        std::cerr << "moenet fit: " << e.what() << '\n';
        return 1;
    }
    result_json = to_json(result, x);
    result_json["status"] = "ok";
    result_json["standardization"] = standardization_json(params, train.x);
    write_json(a.out / "result.json", result_json);
    write_text(a.out / "selection.csv", selection_csv(result, x));
    manifest.add_output("result.json");
    manifest.add_output("selection.csv");

    if (!a.test.empty()) {
        require_file(a.test, "test file");
        manifest.add_input("test", a.test);
        const DataPair test = load_csv(a.test, layers);
        SimDataset ds;
        ds.train = {x, train.y};
        ds.test = {apply_standardization(test.x, params), test.y};
        if (!a.mask.empty()) {
            require_file(a.mask, "mask file");
            manifest.add_input("mask", a.mask);
            ds.relevant_mask = read_mask(a.mask, x);
        } else {
            ds.relevant_mask.assign(static_cast<std::size_t>(x.cols()), false);
        }
        const MetricsReport m = score_method(result, ds);
        Json mj = to_json(m);
        if (a.mask.empty()) {
            mj.erase("precision");
            mj.erase("recall");
        }
        write_json(a.out / "metrics.json", mj);
        manifest.add_output("metrics.json");
    }
    manifest.write(a.out, "ok");
    return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    std::string settings = "A,B,C,D,E,F";
    fs::path experiment;
    std::string covariance = "sigma0";
    Index scale_to = 0;
    Index n_test = 1000;
    std::string methods;
    int replicates = 20;
    MethodArgs method;
    std::uint64_t seed = 0;
    fs::path out;
};

int cmd_bench(const BenchArgs& a) {
    std::vector<SimSetting> settings;
    std::vector<MethodSpec> specs;
    try {
        if (!a.experiment.empty()) {
            require_file(a.experiment, "experiment file");
            const Json j = read_json_file(a.experiment);
            if (!j.contains("settings") || !j.at("settings").is_array())
                throw UsageError("experiment file needs a \"settings\" array");
            for (const auto& s : j.at("settings")) settings.push_back(setting_from_json(s));
        } else {
            for (const auto& name : split_list(a.settings)) {
                SimSetting s = builtin_setting(name, parse_covariance(a.covariance));
                s.n_test = a.n_test;
                if (a.scale_to > 0) s = scaled_setting(s, a.scale_to);
                settings.push_back(s);
            }
        }
        std::vector<std::string> names = split_list(a.methods);
        if (names.empty())
            for (MethodKind k : all_methods()) names.push_back(method_name(k));
        for (const auto& n : names) {
            MethodArgs ma = a.method;
            const MethodKind kind = parse_method(n);
            if (kind != MethodKind::two_step_fixed) ma.alpha.reset();
            specs.push_back(make_spec(ma, kind, 0));
        }
        if (settings.empty()) throw UsageError("no settings given");
        for (const auto& s : settings) s.validate();
        if (a.replicates < 1) throw UsageError("--replicates must be at least 1");
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    ensure_dir(a.out);
    Json config;
    config["settings"] = Json::array();
    for (const auto& s : settings) config["settings"].push_back(to_json(s));
    config["methods"] = Json::array();
    for (const auto& s : specs) config["methods"].push_back(method_name(s.kind));
    config["replicates"] = a.replicates;
    config["method_options"] = method_args_json(a.method);
    RunManifest manifest("bench", config, a.seed);
    if (!a.experiment.empty()) manifest.add_input("experiment", a.experiment);

    const BenchmarkReport report = run_benchmark(settings, specs, a.replicates, a.seed);
    write_text(a.out / "bench.csv", report.csv());
    write_json(a.out / "bench_summary.json", report.summary());
    manifest.add_output("bench.csv");
    manifest.add_output("bench_summary.json");
    const bool ok = report.succeeded() > 0;
    manifest.write(a.out, ok ? "ok" : "failed");
    if (!ok) std::cerr << "moenet bench: every cell failed\n";
    return ok ? 0 : 1;
}

// -------------------------------------------------------------------- rank

struct RankArgs {
    fs::path data, layers, result, score, out;
    int folds = 10;
    std::uint64_t seed = 0;
};

LayerStack vstack(const LayerStack& a, const LayerStack& b) {
    if (a.cols() != b.cols() || a.column_names() != b.column_names())
        throw InvalidArgument("scored persons must have the same columns as the training data");
    Eigen::MatrixXd m(a.rows() + b.rows(), a.cols());
    m << a.matrix(), b.matrix();
    std::vector<std::string> ids = a.row_ids();
    ids.insert(ids.end(), b.row_ids().begin(), b.row_ids().end());
    return LayerStack(std::move(m), a.layers(), std::move(ids), a.column_names());
}

int cmd_rank(const RankArgs& a) {
    require_file(a.data, "data file");
    require_file(a.layers, "layer manifest");
    require_file(a.result, "result file");
    ensure_dir(a.out);
    Json config;
    config["folds"] = a.folds;
    RunManifest manifest("rank", config, a.seed);
    manifest.add_input("data", a.data);
    manifest.add_input("layers", a.layers);
    manifest.add_input("result", a.result);

    const LayerManifest layers = LayerManifest::from_json_file(a.layers);
    if (layers.response.empty()) throw UsageError("layer manifest names no response column");
    const DataPair train = load_csv(a.data, layers);
    auto [x_train, params] = standardize(train.x);
    const Json result = read_json_file(a.result);
    if (result.value("status", std::string()) != "ok") throw UsageError("result file does not hold a successful fit");

    LayerStack x = x_train;
    Eigen::VectorXd labels = train.y.labels;
    std::vector<bool> mask(static_cast<std::size_t>(x.rows()), true);
    if (!a.score.empty()) {
        require_file(a.score, "score file");
        manifest.add_input("score", a.score);
        LayerManifest no_response = layers;
        no_response.response.clear();
        const DataPair extra = load_csv(a.score, no_response);
        x = vstack(x_train, apply_standardization(extra.x, params));
        labels.conservativeResize(x.rows());
        labels.tail(extra.x.rows()).setZero();
        mask.resize(static_cast<std::size_t>(x.rows()), false);
    }

    std::map<std::string, Index> by_name;
    for (Index j = 0; j < x.cols(); ++j) by_name[x.column_names()[static_cast<std::size_t>(j)]] = j;
    std::vector<LayerSelection> selections;
    try {
        for (const auto& [layer, sel] : result.at("per_layer_selected").items()) {
            LayerSelection s{layer, {}};
            for (const auto& name : sel.at("columns")) {
                auto it = by_name.find(name.get<std::string>());
                if (it == by_name.end()) throw ParseError("selected column '" + name.get<std::string>() + "' not in data");
                s.columns.push_back(it->second);
            }
            selections.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed result file: ") + e.what());
    }

    const LayerProbabilities probs = per_layer_probabilities(x, BinaryResponse(labels), mask, selections, a.folds,
                                                             derive_seed(a.seed, {hash_tag("rank")}));
    if (probs.layers.empty()) throw Error("no layer has selected variables; nothing to rank");
    Eigen::VectorXd full;
    const EnetFit model = enet_fit_from_json(result.at("final_model"), x.cols());
    if (result.at("final_model").value("p", Index{-1}) == x.cols()) full = predict_proba_rows(model, x.matrix());
    RankTable table = aggregate_ranks(x.row_ids(), probs.layers, full);
    table.excluded = probs.excluded;
    write_text(a.out / "ranks.csv", table.csv());
    manifest.add_output("ranks.csv");
    if (!probs.excluded.empty()) {
        Json ex = Json::array();
        for (const auto& e : probs.excluded) ex.push_back({{"layer", e.layer}, {"reason", e.reason}});
        write_json(a.out / "excluded_layers.json", ex);
        manifest.add_output("excluded_layers.json");
    }
    manifest.write(a.out, "ok");
    return 0;
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
    fs::path omic, params, out;
    std::string age_column = "age";
    std::string sex_column = "female";
    double level = 0.01;
};

int cmd_validate(const ValidateArgs& a) {
    require_file(a.omic, "omic file");
    require_file(a.params, "parameter file");
    if (!(a.level > 0.0 && a.level < 1.0)) throw UsageError("--level must lie in (0,1)");
    ensure_dir(a.out);
    Json config;
    config["age_column"] = a.age_column;
    config["sex_column"] = a.sex_column;
    config["level"] = a.level;
    RunManifest manifest("validate", config, 0);
    manifest.add_input("omic", a.omic);
    manifest.add_input("params", a.params);

    const NumericTable omic = read_numeric_csv(a.omic);
    const NumericTable par = read_numeric_csv(a.params);
    const Index age_col = par.column(a.age_column), sex_col = par.column(a.sex_column);
    std::map<std::string, Index> par_row;
    for (std::size_t i = 0; i < par.ids.size(); ++i) par_row[par.ids[i]] = static_cast<Index>(i);
    std::vector<std::pair<Index, Index>> rows;  // (omic row, parameter row)
    for (std::size_t i = 0; i < omic.ids.size(); ++i) {
        auto it = par_row.find(omic.ids[i]);
        if (it != par_row.end()) rows.emplace_back(static_cast<Index>(i), it->second);
    }
    const Index n = static_cast<Index>(rows.size());
    Eigen::VectorXd age(n), sex(n);
    for (Index k = 0; k < n; ++k) {
        age[k] = par.values(rows[static_cast<std::size_t>(k)].second, age_col);
        sex[k] = par.values(rows[static_cast<std::size_t>(k)].second, sex_col);
    }

    struct Row {
        std::string parameter, variable;
        SignatureTest test;
    };
    std::vector<Row> out_rows;
    for (std::size_t pc = 0; pc < par.columns.size(); ++pc) {
        if (static_cast<Index>(pc) == age_col || static_cast<Index>(pc) == sex_col) continue;
        Eigen::VectorXd target(n);
        for (Index k = 0; k < n; ++k) target[k] = par.values(rows[static_cast<std::size_t>(k)].second, static_cast<Index>(pc));
        for (std::size_t oc = 0; oc < omic.columns.size(); ++oc) {
            Eigen::VectorXd v(n);
            for (Index k = 0; k < n; ++k) v[k] = omic.values(rows[static_cast<std::size_t>(k)].first, static_cast<Index>(oc));
            out_rows.push_back({par.columns[pc], omic.columns[oc], validate_signature(v, target, age, sex)});
        }
    }
    std::vector<double> p;
    for (const auto& r : out_rows) p.push_back(r.test.p_value);
    const BhResult bh = benjamini_hochberg(p, a.level);
    std::ostringstream csv;
    csv << "parameter,variable,coefficient,t,p_value,adjusted_p,significant,rows_used,rank_deficient\n";
    for (std::size_t i = 0; i < out_rows.size(); ++i) {
        const auto& r = out_rows[i];
        csv << r.parameter << ',' << r.variable << ',' << format_double(r.test.coefficient) << ','
            << format_double(r.test.t) << ',' << format_double(r.test.p_value) << ',' << format_double(bh.adjusted[i])
            << ',' << (bh.selected[i] ? 1 : 0) << ',' << r.test.rows_used << ',' << (r.test.rank_deficient ? 1 : 0)
            << '\n';
    }
    write_text(a.out / "validation.csv", csv.str());
    manifest.add_output("validation.csv");
    manifest.write(a.out, "ok");
    return 0;
}

void add_method_options(CLI::App* cmd, MethodArgs& m) {
    cmd->add_option("--alpha", m.alpha, "Mixing parameter for two_step_fixed (default 0.1)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--folds", m.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
    cmd->add_option("--repeats", m.repeats, "Repeated CV runs in the two-step selection step")->check(CLI::PositiveNumber);
    cmd->add_option("--init-points", m.init_points, "EPSGO initial design size (default 10 D)");
    cmd->add_option("--max-evals", m.max_evals, "EPSGO evaluation budget (default 10 D + 50)");
    cmd->add_option("--patience", m.patience, "EPSGO evaluations without improvement before stopping")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Penalised logistic regression for multi-layer data"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::optional<std::size_t> jobs;
    app.add_option("--jobs,-j", jobs, "Worker threads (default: $MULTIOMIC_ENET_JOBS or all cores)")
        ->check(CLI::PositiveNumber);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Draw a simulated train/test data set");
    auto* g = c_sim->add_option_group("source");
    g->add_option("--setting", sim.setting, "Built-in setting A-F or null");
    g->add_option("--experiment", sim.experiment, "JSON setting file");
    g->require_option(1);
    c_sim->add_option("--covariance", sim.covariance, "sigma0 or sigma1");
    c_sim->add_option("--scale-to", sim.scale_to, "Cap each penalised layer at this many columns");
    c_sim->add_option("--n-test", sim.n_test, "Test-set size")->check(CLI::PositiveNumber);
    c_sim->add_option("--seed", sim.seed, "Random seed");
    c_sim->add_option("--out", sim.out, "Output directory")->required();
    c_sim->add_option("--jobs,-j", jobs, "Worker threads");

    FitArgs fit;
    auto* c_fit = app.add_subcommand("fit", "Run one integration method");
    c_fit->add_option("--data", fit.data, "Training CSV")->required();
    c_fit->add_option("--layers", fit.layers, "Layer manifest JSON")->required();
    c_fit->add_option("--method", fit.method.method, "Method name")->required();
    c_fit->add_option("--test", fit.test, "Test CSV for out-of-sample metrics");
    c_fit->add_option("--mask", fit.mask, "Relevant-column mask CSV (precision / recall)");
    c_fit->add_option("--seed", fit.seed, "Random seed");
    c_fit->add_option("--out", fit.out, "Output directory")->required();
    c_fit->add_option("--jobs,-j", jobs, "Worker threads");
    add_method_options(c_fit, fit.method);

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Simulation benchmark over settings x methods x replicates");
    c_bench->add_option("--settings", bench.settings, "Comma-separated built-in settings");
    c_bench->add_option("--experiment", bench.experiment, "JSON file with a \"settings\" array");
    c_bench->add_option("--covariance", bench.covariance, "sigma0 or sigma1");
    c_bench->add_option("--scale-to", bench.scale_to, "Cap each penalised layer at this many columns");
    c_bench->add_option("--n-test", bench.n_test, "Test-set size")->check(CLI::PositiveNumber);
    c_bench->add_option("--methods", bench.methods, "Comma-separated methods (default: all)");
    c_bench->add_option("--replicates", bench.replicates, "Replicates per setting");
    c_bench->add_option("--seed", bench.seed, "Random seed");
    c_bench->add_option("--out", bench.out, "Output directory")->required();
    c_bench->add_option("--jobs,-j", jobs, "Worker threads");
    add_method_options(c_bench, bench.method);

    RankArgs rank;
    auto* c_rank = app.add_subcommand("rank", "Per-layer probabilities and aggregated person ranks");
    c_rank->add_option("--data", rank.data, "Training CSV")->required();
    c_rank->add_option("--layers", rank.layers, "Layer manifest JSON")->required();
    c_rank->add_option("--result", rank.result, "result.json written by fit")->required();
    c_rank->add_option("--score", rank.score, "CSV of additional persons to score (no response needed)");
    c_rank->add_option("--folds", rank.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
    c_rank->add_option("--seed", rank.seed, "Random seed");
    c_rank->add_option("--out", rank.out, "Output directory")->required();
    c_rank->add_option("--jobs,-j", jobs, "Worker threads");

    ValidateArgs val;
    auto* c_val = app.add_subcommand("validate", "Adjusted OLS tests of omic variables against parameters");
    c_val->add_option("--omic", val.omic, "CSV of omic variables (id first)")->required();
    c_val->add_option("--params", val.params, "CSV with age, sex and parameter columns (id first)")->required();
    c_val->add_option("--age-column", val.age_column, "Age column name");
    c_val->add_option("--sex-column", val.sex_column, "Female indicator column name");
    c_val->add_option("--level", val.level, "Benjamini-Hochberg level");
    c_val->add_option("--out", val.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (jobs) set_worker_count(*jobs);
        if (*c_sim) return cmd_simulate(sim);
        if (*c_fit) return cmd_fit(fit);
        if (*c_bench) return cmd_bench(bench);
        if (*c_rank) return cmd_rank(rank);
        if (*c_val) return cmd_validate(val);
    } catch (const UsageError& e) {
        std::cerr << "moenet: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "moenet: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "moenet: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
