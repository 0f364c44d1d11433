#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace moenet {

using Index = Eigen::Index;

/// One block of columns measured on the same individuals.
/// Columns [begin, end) of the parent matrix.
struct Layer {
    std::string name;
    Index begin = 0;
    Index end = 0;
    bool penalised = true;

    Index size() const { return end - begin; }
    bool contains(Index column) const { return column >= begin && column < end; }
    bool operator==(const Layer&) const = default;
};

/// Column-partitioned design matrix. Immutable after construction; the
/// constructor validates the layer partition and rejects non-finite entries.
class LayerStack {
public:
    LayerStack() = default;
    LayerStack(Eigen::MatrixXd matrix, std::vector<Layer> layers,
               std::vector<std::string> row_ids = {}, std::vector<std::string> column_names = {});

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const std::vector<Layer>& layers() const { return layers_; }
    const std::vector<std::string>& row_ids() const { return row_ids_; }
    const std::vector<std::string>& column_names() const { return column_names_; }

    Index rows() const { return matrix_.rows(); }
    Index cols() const { return matrix_.cols(); }

    /// Index of the layer that owns `column`.
    std::size_t layer_of(Index column) const;
    const Layer& layer(const std::string& name) const;
    bool has_unpenalised_block() const { return !layers_.empty() && !layers_.front().penalised; }
    /// Columns of the leading non-penalised block (empty when there is none).
    std::vector<Index> unpenalised_columns() const;
    /// Penalty weights with 0 on unpenalised columns and 1 elsewhere.
    Eigen::VectorXd default_penalty_weights() const;

    LayerStack select_rows(const std::vector<Index>& rows) const;
    /// Keeps `columns` (sorted ascending), shrinking layer ranges accordingly.
    /// Layers that lose every column are kept as empty ranges.
    LayerStack select_columns(const std::vector<Index>& columns) const;
    /// Keeps only the named layers, in the given order.
    LayerStack select_layers(const std::vector<std::string>& names) const;

private:
    Eigen::MatrixXd matrix_;
    std::vector<Layer> layers_;
    std::vector<std::string> row_ids_;
    std::vector<std::string> column_names_;
};

/// Binary labels in {0,1}. Class balance is checked at fit time.
struct BinaryResponse {
    Eigen::VectorXd labels;

    BinaryResponse() = default;
    explicit BinaryResponse(Eigen::VectorXd values);
    explicit BinaryResponse(const std::vector<int>& values);

    Index size() const { return labels.size(); }
    Index count_ones() const;
    bool has_both_classes() const;
    BinaryResponse select(const std::vector<Index>& rows) const;
};

/// Per-column centre and scale. `kept` lists the original column indices
/// retained after dropping zero-variance columns.
struct StandardizationParams {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;  // population standard deviations, 0 for dropped columns
    std::vector<Index> kept;
    std::vector<Index> dropped;
};

/// Centres and scales every column with the population (1/N) variance.
/// Zero-variance columns are dropped and recorded in the params.
/// Throws DegenerateDesign when nothing survives.
std::pair<LayerStack, StandardizationParams> standardize(const LayerStack& stack);

/// Applies a previously estimated transform (including column drops) to new data.
LayerStack apply_standardization(const LayerStack& stack, const StandardizationParams& params);

struct DataPair {
    LayerStack x;
    BinaryResponse y;
};

struct SplitResult {
    DataPair train;
    DataPair test;
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
};

/// Row partition for fold `held_out`. Throws InvalidArgument for fold ids
/// out of range and FoldDegenerate when the training part lacks a class.
SplitResult split(const LayerStack& stack, const BinaryResponse& y, const std::vector<int>& fold_assignment,
                  int held_out_fold);

/// Layer manifest as stored on disk.
struct LayerManifest {
    struct Entry {
        std::string name;
        std::vector<std::string> columns;
        bool penalised = true;
    };
    std::string response;
    std::vector<Entry> layers;

    static LayerManifest from_json_file(const std::filesystem::path& path);
    static LayerManifest from_stack(const LayerStack& stack, std::string response = "y");
    void write(const std::filesystem::path& path) const;
};

/// Reads a matrix CSV (first column `id`, header row) and a layer manifest.
/// Columns are reordered to manifest order and the response column removed.
DataPair load_csv(const std::filesystem::path& matrix_path, const std::filesystem::path& manifest_path);
DataPair load_csv(const std::filesystem::path& matrix_path, const LayerManifest& manifest);

/// Writes the stack plus the response column (named `response`) as CSV with
/// 17 significant digits, so load_csv reproduces every value exactly.
void save_csv(const std::filesystem::path& path, const LayerStack& stack, const BinaryResponse& y,
              const std::string& response = "y");

/// Generic numeric table: header "id,..."; empty or NA cells read as NaN.
struct NumericTable {
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    Eigen::MatrixXd values;

    /// Throws ParseError when the column is absent.
    Index column(const std::string& name) const;
};
NumericTable read_numeric_csv(const std::filesystem::path& path);

/// Text for a double with 17 significant digits ("%.17g"), enough to round-trip.
std::string format_double(double value);

}  // namespace moenet
