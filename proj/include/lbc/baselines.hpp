#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lbc/dataset.hpp"

namespace lbc {

/// Dense row-major n x d matrix with column names.
struct FeatureMatrix {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::string> feature_names;

  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// Standardizes numeric columns with training mean / population std and
/// one-hot encodes categorical columns over the training categories.
/// Missing numerics encode as 0, missing or unseen categories as an all-zero
/// block, zero-variance numerics as constant 0.
class FeatureEncoder {
 public:
  static FeatureEncoder fit(const TabularDataset& train);

  /// `ds` must have exactly the fitted columns (names and order).
  [[nodiscard]] FeatureMatrix transform(const TabularDataset& ds) const;

  [[nodiscard]] const std::vector<std::string>& source_columns() const noexcept { return source_columns_; }
  [[nodiscard]] nlohmann::json to_json() const;

 private:
  struct Column {
    ColumnKind kind = ColumnKind::numeric;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<std::string> categories;
  };
  std::vector<std::string> source_columns_;
  std::vector<Column> columns_;
  std::vector<std::string> feature_names_;
};

/// Fit-and-transform on the same dataset.
FeatureMatrix encode_features(const TabularDataset& ds);

/// Class indices of the dataset's labels.
std::vector<std::size_t> label_indices(const TabularDataset& ds);

/// Majority vote among the k Euclidean-nearest rows. Distance ties go to the
/// lower row index, vote ties to the lower class index.
std::size_t knn_predict(const FeatureMatrix& train, std::span<const std::size_t> labels, std::span<const double> query,
                        std::size_t k, std::size_t n_classes);

/// Fraction of the k nearest rows in each class.
std::vector<double> knn_votes(const FeatureMatrix& train, std::span<const std::size_t> labels,
                              std::span<const double> query, std::size_t k, std::size_t n_classes);

struct LogRegModel {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  /// n_classes rows of (dim weights, bias).
  std::vector<double> weights;
  double l2 = 0.0;
  std::vector<double> trace;  // objective after each epoch
};

/// Mean multinomial cross-entropy plus (l2/2)||W||^2 (biases unpenalized).
double logreg_objective(std::span<const double> weights, const FeatureMatrix& x, std::span<const std::size_t> labels,
                        std::size_t n_classes, double l2);
std::vector<double> logreg_gradient(std::span<const double> weights, const FeatureMatrix& x,
                                    std::span<const std::size_t> labels, std::size_t n_classes, double l2);

/// Full-batch gradient descent with Armijo backtracking from step `lr`.
LogRegModel logreg_fit(const FeatureMatrix& x, std::span<const std::size_t> labels, std::size_t n_classes, double l2,
                       std::size_t epochs, double lr);
std::pair<std::size_t, std::vector<double>> logreg_predict(const LogRegModel& model, std::span<const double> query);

/// CART tree stored as a node array; node 0 is the root.
struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::vector<double> counts;  // class counts of the training rows reaching the node
  std::size_t depth = 0;

  [[nodiscard]] bool is_leaf() const noexcept { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::size_t n_classes = 0;
};

double gini(std::span<const double> counts);

DecisionTree dtree_fit(const FeatureMatrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                       std::size_t max_depth, std::size_t min_leaf);
std::size_t dtree_predict(const DecisionTree& tree, std::span<const double> query);
/// Class distribution of the leaf reached by `query`.
std::vector<double> dtree_proba(const DecisionTree& tree, std::span<const double> query);

enum class BaselineKind { logreg, knn, dtree };

BaselineKind baseline_kind_from_string(std::string_view s);
std::string_view to_string(BaselineKind kind);

struct BaselineParams {
  std::size_t knn_k = 5;
  double l2 = 1e-3;
  std::size_t epochs = 300;
  double lr = 1.0;
  std::size_t max_depth = 6;
  std::size_t min_leaf = 2;
};

BaselineParams baseline_params_from_json(const nlohmann::json& j);

struct BaselinePrediction {
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> probabilities;
};

/// A traditional classifier bound to the columns it was trained on. Asking it
/// to predict on a dataset with any other column set is a schema error, so an
/// OOV column can never leak into a baseline.
class BaselineModel {
 public:
  static BaselineModel fit(BaselineKind kind, const BaselineParams& params, const TabularDataset& train);

  [[nodiscard]] BaselinePrediction predict(const TabularDataset& ds) const;
  [[nodiscard]] BaselineKind kind() const noexcept { return kind_; }
  [[nodiscard]] nlohmann::json to_json() const;

 private:
  BaselineModel(BaselineKind kind, BaselineParams params, FeatureEncoder encoder, std::size_t n_classes)
      : kind_(kind), params_(params), encoder_(std::move(encoder)), n_classes_(n_classes) {}

  BaselineKind kind_;
  BaselineParams params_;
  FeatureEncoder encoder_;
  std::size_t n_classes_;
  FeatureMatrix train_x_;
  std::vector<std::size_t> train_y_;
  LogRegModel logreg_;
  DecisionTree tree_;
};

}  // namespace lbc
