#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lbc {

/// Labels are class indices in [0, n_classes).
double accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> predictions);

/// Binary F1 of class `positive`: 2PR/(P+R), 0 when P+R = 0.
double f1_binary(std::span<const std::size_t> truth, std::span<const std::size_t> predictions, std::size_t positive);

/// Unweighted mean of per-class F1 over n_classes.
double f1_macro(std::span<const std::size_t> truth, std::span<const std::size_t> predictions, std::size_t n_classes);

/// Normalized Mann-Whitney statistic: (concordant + 0.5 * tied) / (n_pos * n_neg),
/// where rows with truth == positive are positives and higher scores should
/// mean positive. O(n log n).
double auc_roc(std::span<const std::size_t> truth, std::span<const double> scores, std::size_t positive = 1);

struct ClassStats {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double f1 = 0.0;  // binary F1 of the positive class, macro F1 otherwise
  std::optional<double> auc;
  std::vector<ClassStats> per_class;
  std::size_t unparsed = 0;  // predictions that named no class (text-matching modes)
};

/// Predictions may contain `n_classes` to mean "no class" (scored incorrect).
/// `positive_probability` enables AUC for binary tasks.
EvalReport evaluate_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predictions,
                                const std::vector<std::string>& class_names, std::size_t positive,
                                std::span<const double> positive_probability = {});

nlohmann::json to_json(const EvalReport& report);

}  // namespace lbc
