#include "lbc/discretizer.hpp"

#include <algorithm>
#include <cmath>

#include "lbc/error.hpp"

namespace lbc {

namespace {
constexpr const char* kModule = "discretizer";

bool contains(std::span<const std::size_t> xs, std::size_t x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}
}  // namespace

NTileBinner::NTileBinner(std::size_t column, std::size_t n_categories, std::vector<double> thresholds)
    : column_(column), n_categories_(n_categories), thresholds_(std::move(thresholds)) {
  if (n_categories_ < 2) {
    throw Error(ErrorKind::config, kModule, "binner", "need at least 2 categories");
  }
  if (thresholds_.size() != n_categories_ - 1) {
    throw Error(ErrorKind::schema, kModule, "binner", "expected N-1 thresholds");
  }
  if (!std::is_sorted(thresholds_.begin(), thresholds_.end())) {
    throw Error(ErrorKind::schema, kModule, "binner", "thresholds must be non-decreasing");
  }
  for (double t : thresholds_) {
    if (!std::isfinite(t)) throw Error(ErrorKind::value, kModule, "binner", "non-finite threshold");
  }
}

std::size_t NTileBinner::category(double v) const {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::value, kModule, "transform_value", "cannot bin a non-finite value");
  }
  // Number of thresholds strictly below v.
  const auto below = std::lower_bound(thresholds_.begin(), thresholds_.end(), v) - thresholds_.begin();
  return static_cast<std::size_t>(below) + 1;
}

std::string category_label(std::size_t i) { return "Category " + std::to_string(i); }

NTileBinner fit_thresholds(const TabularDataset& train, std::size_t column, std::size_t n) {
  if (column >= train.num_features()) {
    throw Error(ErrorKind::schema, kModule, "fit_thresholds", "column index out of range");
  }
  if (train.schema()[column].kind != ColumnKind::numeric) {
    throw Error(ErrorKind::type, kModule, "fit_thresholds",
                "column '" + train.schema()[column].name + "' is categorical");
  }
  if (n < 2) throw Error(ErrorKind::config, kModule, "fit_thresholds", "need at least 2 categories");

  std::vector<double> values;
  values.reserve(train.num_rows());
  for (const auto& row : train.rows()) {
    if (const auto* d = std::get_if<double>(&row[column])) values.push_back(*d);
  }
  if (values.empty()) {
    throw Error(ErrorKind::fit, kModule, "fit_thresholds",
                "column '" + train.schema()[column].name + "' has no non-missing training values");
  }
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  std::vector<double> thresholds;
  thresholds.reserve(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t rank = (i * m + n - 1) / n;  // ceil(i*m/n), >= 1
    thresholds.push_back(values[rank - 1]);
  }
  return NTileBinner(column, n, std::move(thresholds));
}

std::string transform_value(const NTileBinner& binner, double v) { return category_label(binner.category(v)); }

TabularDataset transform_dataset(const TabularDataset& ds, std::span<const NTileBinner> binners,
                                 std::span<const std::size_t> keep_numeric) {
  std::vector<const NTileBinner*> by_column(ds.num_features(), nullptr);
  for (const auto& b : binners) {
    if (b.column() >= ds.num_features()) {
      throw Error(ErrorKind::schema, kModule, "transform_dataset", "binner refers to a missing column");
    }
    if (ds.schema()[b.column()].kind != ColumnKind::numeric) {
      throw Error(ErrorKind::schema, kModule, "transform_dataset",
                  "binner given for categorical column '" + ds.schema()[b.column()].name + "'");
    }
    if (by_column[b.column()] != nullptr) {
      throw Error(ErrorKind::schema, kModule, "transform_dataset", "two binners for one column");
    }
    if (contains(keep_numeric, b.column())) {
      throw Error(ErrorKind::schema, kModule, "transform_dataset", "binner given for a column kept numeric");
    }
    by_column[b.column()] = &b;
  }
  auto schema = ds.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].kind != ColumnKind::numeric || contains(keep_numeric, c)) continue;
    if (by_column[c] == nullptr) {
      throw Error(ErrorKind::schema, kModule, "transform_dataset",
                  "no binner for numeric column '" + schema[c].name + "'");
    }
    schema[c].kind = ColumnKind::categorical;
  }
  std::vector<Row> rows;
  rows.reserve(ds.num_rows());
  for (const auto& src : ds.rows()) {
    Row row = src;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (by_column[c] == nullptr) continue;
      if (const auto* d = std::get_if<double>(&row[c])) row[c] = transform_value(*by_column[c], *d);
    }
    rows.push_back(std::move(row));
  }
  return TabularDataset(std::move(schema), std::move(rows), ds.labels(), ds.class_names(), ds.label_name());
}

std::vector<NTileBinner> fit_all(const TabularDataset& train, std::size_t n, std::span<const std::size_t> keep_numeric) {
  std::vector<NTileBinner> binners;
  for (const auto& col : train.schema()) {
    if (col.kind == ColumnKind::numeric && !contains(keep_numeric, col.index)) {
      binners.push_back(fit_thresholds(train, col.index, n));
    }
  }
  return binners;
}

nlohmann::json to_json(const NTileBinner& binner) {
  return nlohmann::json{{"column", binner.column()}, {"n", binner.n_categories()}, {"thresholds", binner.thresholds()}};
}

NTileBinner binner_from_json(const nlohmann::json& j) {
  try {
    return NTileBinner(j.at("column").get<std::size_t>(), j.at("n").get<std::size_t>(),
                       j.at("thresholds").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, kModule, "binner_from_json", e.what());
  }
}

}  // namespace lbc
