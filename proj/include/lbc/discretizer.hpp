#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/dataset.hpp"

namespace lbc {

/// N-tile thresholds for one numeric column, fitted on training rows.
///
/// Thresholds are nearest-rank quantiles: with the m non-missing training
/// values sorted ascending, Q_i is the value at 1-based rank ceil(i*m/N).
/// Values map to categories over upper-inclusive intervals:
///   v <= Q_1 -> "Category 1", Q_{i-1} < v <= Q_i -> "Category i",
///   v > Q_{N-1} -> "Category N".
/// With these two rules each category receives floor(m/N) or ceil(m/N) of m
/// distinct training values.
class NTileBinner {
 public:
  NTileBinner(std::size_t column, std::size_t n_categories, std::vector<double> thresholds);

  [[nodiscard]] std::size_t column() const noexcept { return column_; }
  [[nodiscard]] std::size_t n_categories() const noexcept { return n_categories_; }
  [[nodiscard]] const std::vector<double>& thresholds() const noexcept { return thresholds_; }

  /// 1-based category of a finite value.
  [[nodiscard]] std::size_t category(double v) const;

  friend bool operator==(const NTileBinner&, const NTileBinner&) = default;

 private:
  std::size_t column_;
  std::size_t n_categories_;
  std::vector<double> thresholds_;
};

/// "Category <i>"
std::string category_label(std::size_t i);

NTileBinner fit_thresholds(const TabularDataset& train, std::size_t column, std::size_t n);

std::string transform_value(const NTileBinner& binner, double v);

/// Replaces every binned numeric column by its "Category i" strings. Exactly
/// one binner is required per numeric column, except columns listed in
/// `keep_numeric`, which pass through untouched.
TabularDataset transform_dataset(const TabularDataset& ds, std::span<const NTileBinner> binners,
                                 std::span<const std::size_t> keep_numeric = {});

/// Fits one binner per numeric column of `train` not in `keep_numeric`.
std::vector<NTileBinner> fit_all(const TabularDataset& train, std::size_t n,
                                 std::span<const std::size_t> keep_numeric = {});

nlohmann::json to_json(const NTileBinner& binner);
NTileBinner binner_from_json(const nlohmann::json& j);

}  // namespace lbc
