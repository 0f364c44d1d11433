#include "moenet/core_data.hpp"

#include "moenet/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <iostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace moenet {

// ---------------------------------------------------------------------------
// LayerStack

LayerStack::LayerStack(Eigen::MatrixXd matrix, std::vector<Layer> layers, std::vector<std::string> row_ids,
                       std::vector<std::string> column_names)
    : matrix_(std::move(matrix)),
      layers_(std::move(layers)),
      row_ids_(std::move(row_ids)),
      column_names_(std::move(column_names)) {
    if (layers_.empty()) throw InvalidArgument("LayerStack: at least one layer is required");
    Index expected = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.begin != expected || l.end < l.begin)
            throw InvalidArgument("LayerStack: layer '" + l.name + "' does not continue the column partition");
        if (!l.penalised && i != 0)
            throw InvalidArgument("LayerStack: only the first layer may be unpenalised ('" + l.name + "')");
        expected = l.end;
    }
    if (expected != matrix_.cols())
        throw InvalidArgument("LayerStack: layers cover " + std::to_string(expected) + " columns, matrix has " +
                              std::to_string(matrix_.cols()));
    if (!matrix_.allFinite()) throw InvalidArgument("LayerStack: matrix contains non-finite entries");

    if (row_ids_.empty()) {
        row_ids_.reserve(matrix_.rows());
        for (Index i = 0; i < matrix_.rows(); ++i) row_ids_.push_back("r" + std::to_string(i));
    }
    if (column_names_.empty()) {
        column_names_.reserve(matrix_.cols());
        for (Index j = 0; j < matrix_.cols(); ++j) column_names_.push_back("v" + std::to_string(j));
    }
    if (static_cast<Index>(row_ids_.size()) != matrix_.rows())
        throw InvalidArgument("LayerStack: row id count does not match matrix rows");
    if (static_cast<Index>(column_names_.size()) != matrix_.cols())
        throw InvalidArgument("LayerStack: column name count does not match matrix columns");
}

std::size_t LayerStack::layer_of(Index column) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].contains(column)) return i;
    throw InvalidArgument("LayerStack: column " + std::to_string(column) + " out of range");
}

const Layer& LayerStack::layer(const std::string& name) const {
    for (const auto& l : layers_)
        if (l.name == name) return l;
    throw InvalidArgument("LayerStack: no layer named '" + name + "'");
}

std::vector<Index> LayerStack::unpenalised_columns() const {
    std::vector<Index> out;
    if (has_unpenalised_block())
        for (Index j = layers_.front().begin; j < layers_.front().end; ++j) out.push_back(j);
    return out;
}

Eigen::VectorXd LayerStack::default_penalty_weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(cols());
    if (has_unpenalised_block()) w.segment(layers_.front().begin, layers_.front().size()).setZero();
    return w;
}

LayerStack LayerStack::select_rows(const std::vector<Index>& rows) const {
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), cols());
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row(static_cast<Index>(i)) = matrix_.row(rows[i]);
        ids.push_back(row_ids_[rows[i]]);
    }
    return LayerStack(std::move(m), layers_, std::move(ids), column_names_);
}

LayerStack LayerStack::select_columns(const std::vector<Index>& columns) const {
    if (!std::is_sorted(columns.begin(), columns.end()))
        throw InvalidArgument("select_columns: column list must be sorted");
    Eigen::MatrixXd m(rows(), static_cast<Index>(columns.size()));
    std::vector<std::string> names;
    names.reserve(columns.size());
    std::vector<Layer> layers = layers_;
    for (auto& l : layers) l.begin = l.end = 0;
    std::vector<Index> counts(layers_.size(), 0);
    for (std::size_t k = 0; k < columns.size(); ++k) {
        m.col(static_cast<Index>(k)) = matrix_.col(columns[k]);
        names.push_back(column_names_[columns[k]]);
        ++counts[layer_of(columns[k])];
    }
    Index at = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].begin = at;
        at += counts[i];
        layers[i].end = at;
    }
    return LayerStack(std::move(m), std::move(layers), row_ids_, std::move(names));
}

LayerStack LayerStack::select_layers(const std::vector<std::string>& names) const {
    Index total = 0;
    for (const auto& n : names) total += layer(n).size();
    Eigen::MatrixXd m(rows(), total);
    std::vector<Layer> out_layers;
    std::vector<std::string> out_names;
    Index at = 0;
    for (const auto& n : names) {
        const Layer& src = layer(n);
        if (!src.penalised && !out_layers.empty())
            throw InvalidArgument("select_layers: the unpenalised block must come first");
        m.middleCols(at, src.size()) = matrix_.middleCols(src.begin, src.size());
        for (Index j = src.begin; j < src.end; ++j) out_names.push_back(column_names_[j]);
        out_layers.push_back({src.name, at, at + src.size(), src.penalised});
        at += src.size();
    }
    return LayerStack(std::move(m), std::move(out_layers), row_ids_, std::move(out_names));
}

// ---------------------------------------------------------------------------
// BinaryResponse

namespace {
void check_labels(const Eigen::VectorXd& v) {
    for (Index i = 0; i < v.size(); ++i)
        if (v[i] != 0.0 && v[i] != 1.0)
            throw InvalidArgument("BinaryResponse: entry " + std::to_string(i) + " is not 0 or 1");
}
}  // namespace

BinaryResponse::BinaryResponse(Eigen::VectorXd values) : labels(std::move(values)) { check_labels(labels); }

BinaryResponse::BinaryResponse(const std::vector<int>& values) : labels(static_cast<Index>(values.size())) {
    for (std::size_t i = 0; i < values.size(); ++i) labels[static_cast<Index>(i)] = values[i];
    check_labels(labels);
}

Index BinaryResponse::count_ones() const { return static_cast<Index>(labels.sum()); }

bool BinaryResponse::has_both_classes() const {
    const Index ones = count_ones();
    return ones > 0 && ones < size();
}

BinaryResponse BinaryResponse::select(const std::vector<Index>& rows) const {
    Eigen::VectorXd v(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) v[static_cast<Index>(i)] = labels[rows[i]];
    return BinaryResponse(std::move(v));
}

// ---------------------------------------------------------------------------
// Standardization

std::pair<LayerStack, StandardizationParams> standardize(const LayerStack& stack) {
    const Index n = stack.rows();
    if (n < 2) throw InvalidArgument("standardize: need at least 2 rows");
    const auto& x = stack.matrix();

    StandardizationParams params;
    params.means = x.colwise().mean().transpose();
    params.scales.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - params.means[j]).square().mean();
        const double sd = std::sqrt(var);
        // Relative threshold: a column whose spread is at rounding level is constant.
        const double floor = 1e-12 * std::max(1.0, std::abs(params.means[j]));
        if (sd > floor) {
            params.scales[j] = sd;
            params.kept.push_back(j);
        } else {
            params.scales[j] = 0.0;
            params.dropped.push_back(j);
        }
    }
    if (params.kept.empty()) throw DegenerateDesign("degenerate design: every column has zero variance");
    if (!params.dropped.empty())
        std::clog << "moenet: standardize dropped " << params.dropped.size() << " zero-variance column(s)\n";
    return {apply_standardization(stack, params), std::move(params)};
}

LayerStack apply_standardization(const LayerStack& stack, const StandardizationParams& params) {
    if (params.means.size() != stack.cols())
        throw InvalidArgument("apply_standardization: parameter width does not match stack");
    LayerStack kept = stack.select_columns(params.kept);
    Eigen::MatrixXd m = kept.matrix();
    for (std::size_t k = 0; k < params.kept.size(); ++k) {
        const Index j = params.kept[k];
        m.col(static_cast<Index>(k)) = (m.col(static_cast<Index>(k)).array() - params.means[j]) / params.scales[j];
    }
    return LayerStack(std::move(m), kept.layers(), kept.row_ids(), kept.column_names());
}

// ---------------------------------------------------------------------------
// Split

SplitResult split(const LayerStack& stack, const BinaryResponse& y, const std::vector<int>& fold_assignment,
                  int held_out_fold) {
    if (static_cast<Index>(fold_assignment.size()) != stack.rows() || y.size() != stack.rows())
        throw InvalidArgument("split: fold assignment / response length does not match rows");
    const int k = fold_assignment.empty() ? 0 : *std::max_element(fold_assignment.begin(), fold_assignment.end()) + 1;
    if (*std::min_element(fold_assignment.begin(), fold_assignment.end()) < 0)
        throw InvalidArgument("split: negative fold id");
    if (held_out_fold < 0 || held_out_fold >= k)
        throw InvalidArgument("split: held-out fold " + std::to_string(held_out_fold) + " outside [0, " +
                              std::to_string(k) + ")");
    SplitResult out;
    for (Index i = 0; i < stack.rows(); ++i)
        (fold_assignment[i] == held_out_fold ? out.test_rows : out.train_rows).push_back(i);
    BinaryResponse ytr = y.select(out.train_rows);
    if (!ytr.has_both_classes())
        throw FoldDegenerate("fold degenerate: training part of fold " + std::to_string(held_out_fold) +
                             " lacks a class");
    out.train = {stack.select_rows(out.train_rows), std::move(ytr)};
    out.test = {stack.select_rows(out.test_rows), y.select(out.test_rows)};
    return out;
}

// ---------------------------------------------------------------------------
// CSV / manifest

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

LayerManifest LayerManifest::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("manifest: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest " + path.string() + ": " + e.what());
    }
    LayerManifest m;
    try {
        if (j.contains("response") && !j.at("response").is_null()) m.response = j.at("response").get<std::string>();
        for (const auto& l : j.at("layers")) {
            Entry e;
            e.name = l.at("name").get<std::string>();
            e.columns = l.at("columns").get<std::vector<std::string>>();
            e.penalised = l.value("penalised", true);
            m.layers.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("manifest " + path.string() + ": " + e.what());
    }
    if (m.layers.empty()) throw ParseError("manifest " + path.string() + ": no layers declared");
    return m;
}

LayerManifest LayerManifest::from_stack(const LayerStack& stack, std::string response) {
    LayerManifest m;
    m.response = std::move(response);
    for (const auto& l : stack.layers()) {
        Entry e{l.name, {}, l.penalised};
        for (Index j = l.begin; j < l.end; ++j) e.columns.push_back(stack.column_names()[j]);
        m.layers.push_back(std::move(e));
    }
    return m;
}

void LayerManifest::write(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["response"] = response;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : layers) j["layers"].push_back({{"name", l.name}, {"columns", l.columns}, {"penalised", l.penalised}});
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

double parse_cell(const std::string& text, const std::filesystem::path& file, std::size_t line, const std::string& column) {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || b == e)
        throw ParseError(file.string() + ": line " + std::to_string(line) + ", column '" + column +
                         "': non-numeric value '" + text + "'");
    if (!std::isfinite(v))
        throw ParseError(file.string() + ": line " + std::to_string(line) + ", column '" + column +
                         "': non-finite value");
    return v;
}

}  // namespace

DataPair load_csv(const std::filesystem::path& matrix_path, const std::filesystem::path& manifest_path) {
    return load_csv(matrix_path, LayerManifest::from_json_file(manifest_path));
}

DataPair load_csv(const std::filesystem::path& matrix_path, const LayerManifest& manifest) {
    std::ifstream in(matrix_path);
    if (!in) throw ParseError("cannot open " + matrix_path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(matrix_path.string() + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "id")
        throw ParseError(matrix_path.string() + ": first header cell must be 'id'");

    std::unordered_map<std::string, std::size_t> col_index;
    for (std::size_t c = 1; c < header.size(); ++c)
        if (!col_index.emplace(header[c], c).second)
            throw ParseError(matrix_path.string() + ": duplicate column '" + header[c] + "'");

    auto locate = [&](const std::string& name) {
        auto it = col_index.find(name);
        if (it == col_index.end()) throw ParseError(matrix_path.string() + ": missing column '" + name + "'");
        return it->second;
    };

    std::vector<std::size_t> source;
    std::vector<std::string> names;
    std::vector<Layer> layers;
    for (const auto& e : manifest.layers) {
        Layer l{e.name, static_cast<Index>(source.size()), 0, e.penalised};
        for (const auto& c : e.columns) {
            source.push_back(locate(c));
            names.push_back(c);
        }
        l.end = static_cast<Index>(source.size());
        layers.push_back(std::move(l));
    }
    const bool with_response = !manifest.response.empty();
    const std::size_t response_col = with_response ? locate(manifest.response) : 0;

    std::vector<std::vector<double>> rows;
    std::vector<double> response;
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError(matrix_path.string() + ": line " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()));
        if (!seen.insert(cells[0]).second)
            throw ParseError(matrix_path.string() + ": line " + std::to_string(line_no) + ": duplicate row id '" +
                             cells[0] + "'");
        ids.push_back(cells[0]);
        std::vector<double> r(source.size());
        for (std::size_t k = 0; k < source.size(); ++k)
            r[k] = parse_cell(cells[source[k]], matrix_path, line_no, header[source[k]]);
        rows.push_back(std::move(r));
        if (with_response) {
            const double v = parse_cell(cells[response_col], matrix_path, line_no, manifest.response);
            if (v != 0.0 && v != 1.0)
                throw ParseError(matrix_path.string() + ": line " + std::to_string(line_no) + ", column '" +
                                 manifest.response + "': response value '" + cells[response_col] +
                                 "' is not 0 or 1");
            response.push_back(v);
        }
    }
    Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(source.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < source.size(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];

    DataPair out{LayerStack(std::move(m), std::move(layers), std::move(ids), std::move(names)), {}};
    if (with_response) out.y = BinaryResponse(Eigen::Map<Eigen::VectorXd>(response.data(), static_cast<Index>(response.size())));
    return out;
}

void save_csv(const std::filesystem::path& path, const LayerStack& stack, const BinaryResponse& y,
              const std::string& response) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    const bool with_response = y.size() > 0;
    if (with_response && y.size() != stack.rows()) throw InvalidArgument("save_csv: response length mismatch");
    out << "id";
    for (const auto& c : stack.column_names()) out << ',' << c;
    if (with_response) out << ',' << response;
    out << '\n';
    const auto& m = stack.matrix();
    for (Index i = 0; i < stack.rows(); ++i) {
        out << stack.row_ids()[i];
        for (Index j = 0; j < stack.cols(); ++j) out << ',' << format_double(m(i, j));
        if (with_response) out << ',' << static_cast<int>(y.labels[i]);
        out << '\n';
    }
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "id") throw ParseError(path.string() + ": first header cell must be 'id'");
    NumericTable t;
    t.columns.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    std::unordered_set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()));
        if (!seen.insert(cells[0]).second)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": duplicate row id '" + cells[0] +
                             "'");
        t.ids.push_back(cells[0]);
        std::vector<double> r(header.size() - 1);
        for (std::size_t c = 1; c < header.size(); ++c)
            r[c - 1] = (cells[c].empty() || cells[c] == "NA") ? std::numeric_limits<double>::quiet_NaN()
                                                             : parse_cell(cells[c], path, line_no, header[c]);
        rows.push_back(std::move(r));
    }
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.columns.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < t.columns.size(); ++c) t.values(static_cast<Index>(i), static_cast<Index>(c)) = rows[i][c];
    return t;
}

Index NumericTable::column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c] == name) return static_cast<Index>(c);
    throw ParseError("missing column '" + name + "'");
}

}  // namespace moenet
