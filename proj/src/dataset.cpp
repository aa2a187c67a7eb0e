#include "lbc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "lbc/csv.hpp"
#include "lbc/error.hpp"
#include "lbc/rng.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "dataset_core";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string cell_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_number(*d);
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  return {};
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

TabularDataset::TabularDataset(std::vector<ColumnSchema> schema, std::vector<Row> rows,
                               std::vector<std::string> labels, std::vector<std::string> class_names,
                               std::string label_name)
    : schema_(std::move(schema)),
      rows_(std::move(rows)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)),
      label_name_(std::move(label_name)) {
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].index != i) {
      throw Error(ErrorKind::schema, kModule, "dataset", "schema index mismatch for column '" + schema_[i].name + "'");
    }
    if (!names.insert(schema_[i].name).second) {
      throw Error(ErrorKind::schema, kModule, "dataset", "duplicate column name '" + schema_[i].name + "'");
    }
  }
  if (names.count(label_name_) != 0) {
    throw Error(ErrorKind::schema, kModule, "dataset", "class column '" + label_name_ + "' also appears as a feature");
  }
  if (class_names_.size() < 2) {
    throw Error(ErrorKind::schema, kModule, "dataset", "at least two classes are required");
  }
  std::set<std::string> classes(class_names_.begin(), class_names_.end());
  if (classes.size() != class_names_.size()) {
    throw Error(ErrorKind::schema, kModule, "dataset", "duplicate class names");
  }
  if (labels_.size() != rows_.size()) {
    throw Error(ErrorKind::schema, kModule, "dataset", "label count does not match row count");
  }
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != schema_.size()) {
      throw Error(ErrorKind::schema, kModule, "dataset",
                  "row " + std::to_string(r) + " has " + std::to_string(rows_[r].size()) + " values, expected " +
                      std::to_string(schema_.size()));
    }
    if (classes.count(labels_[r]) == 0) {
      throw Error(ErrorKind::schema, kModule, "dataset", "label '" + labels_[r] + "' is not a class name");
    }
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      const auto& cell = rows_[r][c];
      if (schema_[c].kind == ColumnKind::numeric && std::holds_alternative<std::string>(cell)) {
        throw Error(ErrorKind::schema, kModule, "dataset", "text value in numeric column '" + schema_[c].name + "'");
      }
      if (const auto* d = std::get_if<double>(&cell); d != nullptr && !std::isfinite(*d)) {
        throw Error(ErrorKind::schema, kModule, "dataset", "non-finite value in column '" + schema_[c].name + "'");
      }
    }
  }
}

std::size_t TabularDataset::class_index(std::string_view label) const {
  const auto it = std::find(class_names_.begin(), class_names_.end(), label);
  if (it == class_names_.end()) {
    throw Error(ErrorKind::config, kModule, "class_index", "unknown class '" + std::string(label) + "'");
  }
  return static_cast<std::size_t>(it - class_names_.begin());
}

std::optional<std::size_t> TabularDataset::find_column(std::string_view name) const {
  for (const auto& col : schema_) {
    if (col.name == name) return col.index;
  }
  return std::nullopt;
}

TabularDataset TabularDataset::select_rows(std::span<const std::size_t> row_indices) const {
  std::vector<Row> rows;
  std::vector<std::string> labels;
  rows.reserve(row_indices.size());
  labels.reserve(row_indices.size());
  for (auto r : row_indices) {
    if (r >= rows_.size()) {
      throw Error(ErrorKind::schema, kModule, "select_rows", "row index " + std::to_string(r) + " out of range");
    }
    rows.push_back(rows_[r]);
    labels.push_back(labels_[r]);
  }
  return TabularDataset(schema_, std::move(rows), std::move(labels), class_names_, label_name_);
}

TabularDataset infer_dataset(std::vector<std::string> header, const std::vector<std::vector<std::string>>& cells,
                             std::vector<std::string> labels, std::string label_name) {
  const std::size_t k = header.size();
  std::vector<ColumnSchema> schema(k);
  for (std::size_t c = 0; c < k; ++c) {
    bool numeric = true;
    for (const auto& row : cells) {
      if (row[c].empty()) continue;
      if (!parse_number(row[c])) {
        numeric = false;
        break;
      }
    }
    schema[c] = ColumnSchema{std::move(header[c]), numeric ? ColumnKind::numeric : ColumnKind::categorical, c};
  }

  std::vector<Row> rows;
  rows.reserve(cells.size());
  for (const auto& raw : cells) {
    Row row;
    row.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
      if (raw[c].empty()) {
        row.emplace_back(Missing{});
      } else if (schema[c].kind == ColumnKind::numeric) {
        row.emplace_back(*parse_number(raw[c]));
      } else {
        row.emplace_back(raw[c]);
      }
    }
    rows.push_back(std::move(row));
  }

  std::set<std::string> distinct(labels.begin(), labels.end());
  std::vector<std::string> class_names(distinct.begin(), distinct.end());
  return TabularDataset(std::move(schema), std::move(rows), std::move(labels), std::move(class_names),
                        std::move(label_name));
}

TabularDataset parse_csv(std::string_view text, std::string_view class_column) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  auto records = csv::parse(text);
  if (records.empty()) {
    throw Error(ErrorKind::parse, kModule, "load_csv", "missing header line");
  }
  const auto& header = records.front().fields;
  std::set<std::string> seen;
  for (const auto& name : header) {
    if (!seen.insert(name).second) {
      throw Error(ErrorKind::schema, kModule, "load_csv", "duplicate header name '" + name + "'");
    }
  }
  const auto class_it = std::find(header.begin(), header.end(), class_column);
  if (class_it == header.end()) {
    throw Error(ErrorKind::config, kModule, "load_csv",
                "class column '" + std::string(class_column) + "' not found in header");
  }
  const auto class_pos = static_cast<std::size_t>(class_it - header.begin());

  std::vector<std::string> features;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != class_pos) features.push_back(header[i]);
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> labels;
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw Error(ErrorKind::parse, kModule, "load_csv",
                  "line " + std::to_string(rec.line) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(rec.fields.size()));
    }
    if (rec.fields[class_pos].empty()) {
      throw Error(ErrorKind::parse, kModule, "load_csv", "line " + std::to_string(rec.line) + ": empty class label");
    }
    labels.push_back(std::move(rec.fields[class_pos]));
    std::vector<std::string> row;
    row.reserve(features.size());
    for (std::size_t i = 0; i < rec.fields.size(); ++i) {
      if (i != class_pos) row.push_back(std::move(rec.fields[i]));
    }
    cells.push_back(std::move(row));
  }
  return infer_dataset(std::move(features), cells, std::move(labels), std::string(class_column));
}

TabularDataset load_csv(const std::filesystem::path& path, std::string_view class_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, kModule, "load_csv", "cannot open dataset '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), class_column);
}

std::string to_csv(const TabularDataset& ds) {
  std::string out;
  std::vector<std::string> fields;
  for (const auto& col : ds.schema()) fields.push_back(col.name);
  fields.push_back(ds.label_name());
  out += csv::format_record(fields);
  out += '\n';
  for (std::size_t r = 0; r < ds.num_rows(); ++r) {
    fields.clear();
    for (const auto& cell : ds.rows()[r]) fields.push_back(cell_text(cell));
    fields.push_back(ds.labels()[r]);
    out += csv::format_record(fields);
    out += '\n';
  }
  return out;
}

void save_csv(const TabularDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, kModule, "save_csv", "cannot write '" + path.string() + "'");
  out << to_csv(ds);
  if (!out) throw Error(ErrorKind::io, kModule, "save_csv", "write failed for '" + path.string() + "'");
}

TrainTestSplit train_test_split(const TabularDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::config, kModule, "train_test_split", "test_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.num_rows();
  if (n < 2) {
    throw Error(ErrorKind::config, kModule, "train_test_split", "need at least two rows to split");
  }
  const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test == n) {
    throw Error(ErrorKind::config, kModule, "train_test_split",
                "test_fraction " + format_number(test_fraction) + " leaves one side empty for " + std::to_string(n) +
                    " rows");
  }
  auto perm = seeded_permutation(n, seed);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return TrainTestSplit{ds.select_rows(train), ds.select_rows(test)};
}

std::size_t oov_count(double ratio, std::size_t k) {
  return static_cast<std::size_t>(std::round(ratio * static_cast<double>(k)));
}

OovSplit make_oov_split(const TabularDataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw Error(ErrorKind::config, kModule, "make_oov_split", "OOV ratio must lie in [0, 1)");
  }
  const std::size_t k = ds.num_features();
  const std::size_t count = oov_count(ratio, k);
  if (k == 0 || count >= k) {
    throw Error(ErrorKind::config, kModule, "make_oov_split",
                "OOV ratio " + format_number(ratio) + " leaves no in-variable column among " + std::to_string(k));
  }
  auto perm = seeded_permutation(k, seed);
  OovSplit split;
  split.ratio = ratio;
  split.seed = seed;
  split.oov_columns.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(split.oov_columns.begin(), split.oov_columns.end());
  for (std::size_t c = 0; c < k; ++c) {
    if (!std::binary_search(split.oov_columns.begin(), split.oov_columns.end(), c)) split.iv_columns.push_back(c);
  }
  return split;
}

nlohmann::json to_json(const OovSplit& split) {
  return nlohmann::json{{"ratio", split.ratio},
                        {"seed", split.seed},
                        {"iv_columns", split.iv_columns},
                        {"oov_columns", split.oov_columns}};
}

OovSplit oov_split_from_json(const nlohmann::json& j, std::size_t num_features) {
  OovSplit split;
  try {
    split.ratio = j.at("ratio").get<double>();
    split.seed = j.at("seed").get<std::uint64_t>();
    split.iv_columns = j.at("iv_columns").get<std::vector<std::size_t>>();
    split.oov_columns = j.at("oov_columns").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, kModule, "oov_split_from_json", e.what());
  }
  std::vector<std::size_t> all = split.iv_columns;
  all.insert(all.end(), split.oov_columns.begin(), split.oov_columns.end());
  std::sort(all.begin(), all.end());
  bool ok = all.size() == num_features;
  for (std::size_t i = 0; ok && i < all.size(); ++i) ok = all[i] == i;
  if (!ok) {
    throw Error(ErrorKind::schema, kModule, "oov_split_from_json",
                "split manifest does not partition the " + std::to_string(num_features) + " feature columns");
  }
  return split;
}

TabularDataset project_columns(const TabularDataset& ds, std::span<const std::size_t> columns) {
  std::vector<bool> used(ds.num_features(), false);
  std::vector<ColumnSchema> schema;
  schema.reserve(columns.size());
  for (auto c : columns) {
    if (c >= ds.num_features()) {
      throw Error(ErrorKind::schema, kModule, "project_columns", "column index " + std::to_string(c) + " out of range");
    }
    if (used[c]) {
      throw Error(ErrorKind::schema, kModule, "project_columns", "column index " + std::to_string(c) + " repeated");
    }
    used[c] = true;
    auto col = ds.schema()[c];
    col.index = schema.size();
    schema.push_back(std::move(col));
  }
  std::vector<Row> rows;
  rows.reserve(ds.num_rows());
  for (const auto& src : ds.rows()) {
    Row row;
    row.reserve(columns.size());
    for (auto c : columns) row.push_back(src[c]);
    rows.push_back(std::move(row));
  }
  return TabularDataset(std::move(schema), std::move(rows), ds.labels(), ds.class_names(), ds.label_name());
}

}  // namespace lbc
