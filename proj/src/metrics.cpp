#include "lbc/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "lbc/error.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "evaluation";

void check_lengths(std::size_t a, std::size_t b, const char* stage) {
  if (a != b) {
    throw Error(ErrorKind::eval, kModule, stage,
                "length mismatch: " + std::to_string(a) + " truth vs " + std::to_string(b) + " predictions");
  }
}

struct Counts {
  double tp = 0, fp = 0, fn = 0;
};

Counts count_class(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t cls) {
  Counts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == cls;
    const bool p = pred[i] == cls;
    if (t && p) c.tp += 1;
    else if (p) c.fp += 1;
    else if (t) c.fn += 1;
  }
  return c;
}

double f1_from(const Counts& c) {
  const double p = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
  const double r = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

double accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> predictions) {
  check_lengths(truth.size(), predictions.size(), "accuracy");
  if (truth.empty()) throw Error(ErrorKind::eval, kModule, "accuracy", "no samples");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predictions[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double f1_binary(std::span<const std::size_t> truth, std::span<const std::size_t> predictions, std::size_t positive) {
  check_lengths(truth.size(), predictions.size(), "f1_score");
  return f1_from(count_class(truth, predictions, positive));
}

double f1_macro(std::span<const std::size_t> truth, std::span<const std::size_t> predictions, std::size_t n_classes) {
  check_lengths(truth.size(), predictions.size(), "f1_score");
  if (n_classes == 0) throw Error(ErrorKind::eval, kModule, "f1_score", "no classes");
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) sum += f1_from(count_class(truth, predictions, c));
  return sum / static_cast<double>(n_classes);
}

double auc_roc(std::span<const std::size_t> truth, std::span<const double> scores, std::size_t positive) {
  check_lengths(truth.size(), scores.size(), "auc_roc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending score order, counting negatives strictly
  // below each positive and half of the negatives tied with it.
  double n_pos = 0.0;
  double n_neg = 0.0;
  double wins = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_pos = 0.0;
    double group_neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] == positive ? group_pos : group_neg) += 1.0;
      ++j;
    }
    wins += group_pos * (n_neg + 0.5 * group_neg);
    n_pos += group_pos;
    n_neg += group_neg;
    i = j;
  }
  if (n_pos == 0.0 || n_neg == 0.0) {
    throw Error(ErrorKind::eval, kModule, "auc_roc", "AUC needs both positive and negative examples");
  }
  return wins / (n_pos * n_neg);
}

EvalReport evaluate_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> predictions,
                                const std::vector<std::string>& class_names, std::size_t positive,
                                std::span<const double> positive_probability) {
  check_lengths(truth.size(), predictions.size(), "evaluate");
  const std::size_t k = class_names.size();
  EvalReport report;
  report.accuracy = accuracy(truth, predictions);
  report.f1 = k == 2 ? f1_binary(truth, predictions, positive) : f1_macro(truth, predictions, k);
  for (auto p : predictions) report.unparsed += p >= k ? 1 : 0;
  for (std::size_t c = 0; c < k; ++c) {
    const auto counts = count_class(truth, predictions, c);
    ClassStats s;
    s.label = class_names[c];
    s.precision = counts.tp + counts.fp > 0 ? counts.tp / (counts.tp + counts.fp) : 0.0;
    s.recall = counts.tp + counts.fn > 0 ? counts.tp / (counts.tp + counts.fn) : 0.0;
    s.f1 = f1_from(counts);
    s.support = static_cast<std::size_t>(counts.tp + counts.fn);
    report.per_class.push_back(std::move(s));
  }
  if (k == 2 && !positive_probability.empty()) {
    check_lengths(truth.size(), positive_probability.size(), "auc_roc");
    const auto n_pos = std::count(truth.begin(), truth.end(), positive);
    if (n_pos > 0 && static_cast<std::size_t>(n_pos) < truth.size()) {
      report.auc = auc_roc(truth, positive_probability, positive);
    }
  }
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& s : report.per_class) {
    per_class.push_back(
        {{"label", s.label}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
  }
  nlohmann::json j{{"accuracy", report.accuracy}, {"f1", report.f1}, {"per_class", per_class},
                   {"unparsed", report.unparsed}};
  j["auc"] = report.auc ? nlohmann::json(*report.auc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace lbc
