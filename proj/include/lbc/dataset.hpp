#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace lbc {

struct Missing {
  friend bool operator==(Missing, Missing) = default;
};

/// One table cell: missing, a finite number, or free text.
using Cell = std::variant<Missing, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<Missing>(c); }

/// Shortest decimal that round-trips the double ("30", "0.1", "1e+20").
std::string format_number(double value);

/// Text form of a cell as it appears in CSV output and prompts. Missing is "".
std::string cell_text(const Cell& cell);

/// Strict decimal parse: surrounding ASCII whitespace allowed, the rest must
/// be consumed entirely and the result must be finite.
std::optional<double> parse_number(std::string_view text);

enum class ColumnKind { numeric, categorical };

std::string_view to_string(ColumnKind kind);

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  std::size_t index = 0;

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

using Row = std::vector<Cell>;

/// Feature table plus class labels. Construction validates shape: every row
/// has one cell per schema column, labels align with rows and every label is
/// a known class name. Immutable once built.
class TabularDataset {
 public:
  TabularDataset(std::vector<ColumnSchema> schema, std::vector<Row> rows, std::vector<std::string> labels,
                 std::vector<std::string> class_names, std::string label_name = "class");

  [[nodiscard]] const std::vector<ColumnSchema>& schema() const noexcept { return schema_; }
  [[nodiscard]] const std::vector<Row>& rows() const noexcept { return rows_; }
  [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  [[nodiscard]] const std::string& label_name() const noexcept { return label_name_; }

  [[nodiscard]] std::size_t num_features() const noexcept { return schema_.size(); }
  [[nodiscard]] std::size_t num_rows() const noexcept { return rows_.size(); }

  /// Index of `label` in class_names().
  [[nodiscard]] std::size_t class_index(std::string_view label) const;
  [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const;

  /// New dataset over a subset of rows (in the given order), same schema and classes.
  [[nodiscard]] TabularDataset select_rows(std::span<const std::size_t> row_indices) const;

  friend bool operator==(const TabularDataset&, const TabularDataset&) = default;

 private:
  std::vector<ColumnSchema> schema_;
  std::vector<Row> rows_;
  std::vector<std::string> labels_;
  std::vector<std::string> class_names_;
  std::string label_name_;
};

/// Infer a dataset from raw text cells. Empty cells are missing; a column is
/// numeric iff all of its non-missing cells parse as finite numbers. Class
/// names are the distinct labels in lexicographic order.
TabularDataset infer_dataset(std::vector<std::string> header, const std::vector<std::vector<std::string>>& cells,
                             std::vector<std::string> labels, std::string label_name);

TabularDataset load_csv(const std::filesystem::path& path, std::string_view class_column);
TabularDataset parse_csv(std::string_view text, std::string_view class_column);

/// Writes features followed by the class column.
void save_csv(const TabularDataset& ds, const std::filesystem::path& path);
std::string to_csv(const TabularDataset& ds);

struct TrainTestSplit {
  TabularDataset train;
  TabularDataset test;
};

/// Seeded disjoint row partition; |test| = round(test_fraction * n). Both
/// sides keep the original row order.
TrainTestSplit train_test_split(const TabularDataset& ds, double test_fraction, std::uint64_t seed);

struct OovSplit {
  std::vector<std::size_t> iv_columns;
  std::vector<std::size_t> oov_columns;
  double ratio = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const OovSplit&, const OovSplit&) = default;
};

/// Number of OOV columns for `k` features: round(ratio * k), half away from zero.
std::size_t oov_count(double ratio, std::size_t k);

/// Picks round(ratio * K) feature columns uniformly at random as
/// out-of-variable columns. Both index lists are ascending.
OovSplit make_oov_split(const TabularDataset& ds, double ratio, std::uint64_t seed);

nlohmann::json to_json(const OovSplit& split);
OovSplit oov_split_from_json(const nlohmann::json& j, std::size_t num_features);

/// Dataset containing exactly `columns`, in that order. Schema indices are renumbered.
TabularDataset project_columns(const TabularDataset& ds, std::span<const std::size_t> columns);

}  // namespace lbc
