#include "lbc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lbc/error.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "baselines";

[[noreturn]] void fail(ErrorKind kind, const std::string& stage, const std::string& msg) {
  throw Error(kind, kModule, stage, msg);
}

void check_labels(const FeatureMatrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                  const std::string& stage) {
  if (labels.size() != x.rows) fail(ErrorKind::schema, stage, "label count does not match row count");
  for (auto y : labels) {
    if (y >= n_classes) fail(ErrorKind::schema, stage, "label index out of range");
  }
}

/// Row-wise class logits W x + b.
void linear_scores(std::span<const double> w, std::span<const double> xrow, std::size_t n_classes,
                   std::vector<double>& out) {
  const std::size_t d = xrow.size();
  out.assign(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double* wc = w.data() + c * (d + 1);
    double s = wc[d];
    for (std::size_t j = 0; j < d; ++j) s += wc[j] * xrow[j];
    out[c] = s;
  }
}

void softmax_inplace(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (auto& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (auto& x : v) x /= sum;
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

FeatureEncoder FeatureEncoder::fit(const TabularDataset& train) {
  FeatureEncoder enc;
  for (const auto& col : train.schema()) {
    enc.source_columns_.push_back(col.name);
    Column out;
    out.kind = col.kind;
    if (col.kind == ColumnKind::numeric) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& row : train.rows()) {
        if (const auto* d = std::get_if<double>(&row[col.index])) {
          sum += *d;
          ++n;
        }
      }
      if (n > 0) {
        out.mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& row : train.rows()) {
          if (const auto* d = std::get_if<double>(&row[col.index])) ss += (*d - out.mean) * (*d - out.mean);
        }
        out.stddev = std::sqrt(ss / static_cast<double>(n));
      }
      enc.feature_names_.push_back(col.name);
    } else {
      std::set<std::string> cats;
      for (const auto& row : train.rows()) {
        if (!is_missing(row[col.index])) cats.insert(cell_text(row[col.index]));
      }
      out.categories.assign(cats.begin(), cats.end());
      for (const auto& c : out.categories) enc.feature_names_.push_back(col.name + "=" + c);
    }
    enc.columns_.push_back(std::move(out));
  }
  if (enc.feature_names_.empty()) {
    fail(ErrorKind::schema, "encode_features", "dataset encodes to zero features");
  }
  return enc;
}

FeatureMatrix FeatureEncoder::transform(const TabularDataset& ds) const {
  std::vector<std::string> names;
  for (const auto& col : ds.schema()) names.push_back(col.name);
  if (names != source_columns_) {
    fail(ErrorKind::schema, "encode_features",
         "dataset columns differ from the columns the model was trained on (OOV columns cannot be used by baselines)");
  }
  FeatureMatrix m;
  m.rows = ds.num_rows();
  m.cols = feature_names_.size();
  m.feature_names = feature_names_;
  m.values.assign(m.rows * m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::size_t offset = 0;
    double* out = m.values.data() + r * m.cols;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto& spec = columns_[c];
      const auto& cell = ds.rows()[r][c];
      if (spec.kind == ColumnKind::numeric) {
        if (const auto* d = std::get_if<double>(&cell); d != nullptr && spec.stddev > 0.0) {
          out[offset] = (*d - spec.mean) / spec.stddev;
        }
        offset += 1;
      } else {
        if (!is_missing(cell)) {
          const auto text = cell_text(cell);
          const auto it = std::lower_bound(spec.categories.begin(), spec.categories.end(), text);
          if (it != spec.categories.end() && *it == text) {
            out[offset + static_cast<std::size_t>(it - spec.categories.begin())] = 1.0;
          }
        }
        offset += spec.categories.size();
      }
    }
  }
  return m;
}

nlohmann::json FeatureEncoder::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& spec = columns_[c];
    nlohmann::json j{{"name", source_columns_[c]}, {"kind", std::string(lbc::to_string(spec.kind))}};
    if (spec.kind == ColumnKind::numeric) {
      j["mean"] = spec.mean;
      j["stddev"] = spec.stddev;
    } else {
      j["categories"] = spec.categories;
    }
    cols.push_back(std::move(j));
  }
  return nlohmann::json{{"columns", cols}};
}

FeatureMatrix encode_features(const TabularDataset& ds) { return FeatureEncoder::fit(ds).transform(ds); }

std::vector<std::size_t> label_indices(const TabularDataset& ds) {
  std::vector<std::size_t> out;
  out.reserve(ds.num_rows());
  for (const auto& l : ds.labels()) out.push_back(ds.class_index(l));
  return out;
}

std::vector<double> knn_votes(const FeatureMatrix& train, std::span<const std::size_t> labels,
                              std::span<const double> query, std::size_t k, std::size_t n_classes) {
  if (k < 1 || k > train.rows) {
    fail(ErrorKind::config, "knn_predict", "k=" + std::to_string(k) + " must lie in [1, " + std::to_string(train.rows) + "]");
  }
  if (query.size() != train.cols) fail(ErrorKind::schema, "knn_predict", "query dimension mismatch");
  check_labels(train, labels, n_classes, "knn_predict");
  std::vector<std::pair<double, std::size_t>> dist(train.rows);
  for (std::size_t i = 0; i < train.rows; ++i) {
    const auto row = train.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < train.cols; ++j) s += (row[j] - query[j]) * (row[j] - query[j]);
    dist[i] = {s, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<double> votes(n_classes, 0.0);
  for (std::size_t i = 0; i < k; ++i) votes[labels[dist[i].second]] += 1.0 / static_cast<double>(k);
  return votes;
}

std::size_t knn_predict(const FeatureMatrix& train, std::span<const std::size_t> labels, std::span<const double> query,
                        std::size_t k, std::size_t n_classes) {
  return argmax_lowest(knn_votes(train, labels, query, k, n_classes));
}

double logreg_objective(std::span<const double> weights, const FeatureMatrix& x, std::span<const std::size_t> labels,
                        std::size_t n_classes, double l2) {
  const std::size_t d = x.cols;
  std::vector<double> scores;
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    linear_scores(weights, x.row(i), n_classes, scores);
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - m);
    loss += m + std::log(sum) - scores[labels[i]];
  }
  loss /= static_cast<double>(x.rows);
  double reg = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t j = 0; j < d; ++j) reg += weights[c * (d + 1) + j] * weights[c * (d + 1) + j];
  }
  return loss + 0.5 * l2 * reg;
}

std::vector<double> logreg_gradient(std::span<const double> weights, const FeatureMatrix& x,
                                    std::span<const std::size_t> labels, std::size_t n_classes, double l2) {
  const std::size_t d = x.cols;
  std::vector<double> grad(weights.size(), 0.0);
  std::vector<double> p;
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    linear_scores(weights, row, n_classes, p);
    softmax_inplace(p);
    p[labels[i]] -= 1.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      double* g = grad.data() + c * (d + 1);
      const double coef = p[c] * inv_n;
      for (std::size_t j = 0; j < d; ++j) g[j] += coef * row[j];
      g[d] += coef;
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t j = 0; j < d; ++j) grad[c * (d + 1) + j] += l2 * weights[c * (d + 1) + j];
  }
  return grad;
}

LogRegModel logreg_fit(const FeatureMatrix& x, std::span<const std::size_t> labels, std::size_t n_classes, double l2,
                       std::size_t epochs, double lr) {
  check_labels(x, labels, n_classes, "logreg_fit");
  if (x.rows == 0) fail(ErrorKind::fit, "logreg_fit", "empty training set");
  std::set<std::size_t> present(labels.begin(), labels.end());
  if (present.size() < 2) fail(ErrorKind::fit, "logreg_fit", "training labels contain a single class");
  if (!(l2 >= 0.0) || !(lr > 0.0)) fail(ErrorKind::config, "logreg_fit", "need l2 >= 0 and lr > 0");

  LogRegModel model;
  model.n_classes = n_classes;
  model.dim = x.cols;
  model.l2 = l2;
  model.weights.assign(n_classes * (x.cols + 1), 0.0);
  double current = logreg_objective(model.weights, x, labels, n_classes, l2);
  std::vector<double> candidate(model.weights.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto grad = logreg_gradient(model.weights, x, labels, n_classes, l2);
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 < 1e-20) {
      model.trace.push_back(current);
      break;
    }
    double step = lr;
    double next = current;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] = model.weights[i] - step * grad[i];
      next = logreg_objective(candidate, x, labels, n_classes, l2);
      if (next <= current - 0.5 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (accepted) {
      model.weights = candidate;
      current = next;
    }
    model.trace.push_back(current);
    if (!accepted) break;
  }
  return model;
}

std::pair<std::size_t, std::vector<double>> logreg_predict(const LogRegModel& model, std::span<const double> query) {
  if (query.size() != model.dim) fail(ErrorKind::schema, "logreg_predict", "query dimension mismatch");
  std::vector<double> p;
  linear_scores(model.weights, query, model.n_classes, p);
  softmax_inplace(p);
  return {argmax_lowest(p), p};
}

double gini(std::span<const double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

SplitChoice best_split(const FeatureMatrix& x, std::span<const std::size_t> labels, const std::vector<std::size_t>& rows,
                       std::size_t n_classes, std::size_t min_leaf) {
  SplitChoice best;
  const double n = static_cast<double>(rows.size());
  std::vector<std::size_t> order = rows;
  std::vector<double> left(n_classes);
  std::vector<double> right(n_classes);
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x.at(a, f) < x.at(b, f); });
    std::fill(left.begin(), left.end(), 0.0);
    std::fill(right.begin(), right.end(), 0.0);
    for (auto r : order) right[labels[r]] += 1.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const auto y = labels[order[i]];
      left[y] += 1.0;
      right[y] -= 1.0;
      const double v = x.at(order[i], f);
      const double v_next = x.at(order[i + 1], f);
      if (!(v < v_next)) continue;
      const std::size_t n_left = i + 1;
      if (n_left < min_leaf || order.size() - n_left < min_leaf) continue;
      const double nl = static_cast<double>(n_left);
      const double imp = (nl * gini(left) + (n - nl) * gini(right)) / n;
      if (best.feature < 0 || imp < best.impurity - 1e-15) {
        best.feature = static_cast<int>(f);
        best.threshold = v + (v_next - v) / 2.0;
        best.impurity = imp;
      }
    }
  }
  return best;
}

}  // namespace

DecisionTree dtree_fit(const FeatureMatrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                       std::size_t max_depth, std::size_t min_leaf) {
  check_labels(x, labels, n_classes, "dtree_fit");
  if (x.rows == 0) fail(ErrorKind::fit, "dtree_fit", "empty training set");
  min_leaf = std::max<std::size_t>(1, min_leaf);
  DecisionTree tree;
  tree.n_classes = n_classes;

  struct Pending {
    int node;
    std::vector<std::size_t> rows;
  };
  std::vector<Pending> stack;
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), std::size_t{0});
  tree.nodes.push_back(TreeNode{});
  stack.push_back({0, std::move(all)});
  while (!stack.empty()) {
    auto [id, rows] = std::move(stack.back());
    stack.pop_back();
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.counts.assign(n_classes, 0.0);
    for (auto r : rows) node.counts[labels[r]] += 1.0;
    if (node.depth >= max_depth || gini(node.counts) == 0.0 || rows.size() < 2 * min_leaf) continue;
    const auto split = best_split(x, labels, rows, n_classes, min_leaf);
    if (split.feature < 0) continue;
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (auto r : rows) {
      (x.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left_rows : right_rows).push_back(r);
    }
    const auto depth = node.depth;
    const int left_id = static_cast<int>(tree.nodes.size());
    const int right_id = left_id + 1;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left_id;
    node.right = right_id;
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, {}, depth + 1});
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, {}, depth + 1});
    stack.push_back({right_id, std::move(right_rows)});
    stack.push_back({left_id, std::move(left_rows)});
  }
  return tree;
}

namespace {
const TreeNode& find_leaf(const DecisionTree& tree, std::span<const double> query) {
  const TreeNode* node = &tree.nodes.front();
  while (!node->is_leaf()) {
    const auto f = static_cast<std::size_t>(node->feature);
    if (f >= query.size()) fail(ErrorKind::schema, "dtree_predict", "query dimension mismatch");
    node = &tree.nodes[static_cast<std::size_t>(query[f] <= node->threshold ? node->left : node->right)];
  }
  return *node;
}
}  // namespace

std::size_t dtree_predict(const DecisionTree& tree, std::span<const double> query) {
  return argmax_lowest(find_leaf(tree, query).counts);
}

std::vector<double> dtree_proba(const DecisionTree& tree, std::span<const double> query) {
  auto counts = find_leaf(tree, query).counts;
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (auto& c : counts) c /= total;
  return counts;
}

BaselineKind baseline_kind_from_string(std::string_view s) {
  if (s == "logreg") return BaselineKind::logreg;
  if (s == "knn") return BaselineKind::knn;
  if (s == "dtree") return BaselineKind::dtree;
  fail(ErrorKind::config, "baseline", "unknown baseline '" + std::string(s) + "'");
}

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::logreg: return "logreg";
    case BaselineKind::knn: return "knn";
    case BaselineKind::dtree: return "dtree";
  }
  return "unknown";
}

BaselineParams baseline_params_from_json(const nlohmann::json& j) {
  BaselineParams p;
  try {
    if (j.contains("knn")) p.knn_k = j["knn"].value("k", p.knn_k);
    if (j.contains("logreg")) {
      p.l2 = j["logreg"].value("l2", p.l2);
      p.epochs = j["logreg"].value("epochs", p.epochs);
      p.lr = j["logreg"].value("lr", p.lr);
    }
    if (j.contains("dtree")) {
      p.max_depth = j["dtree"].value("max_depth", p.max_depth);
      p.min_leaf = j["dtree"].value("min_leaf", p.min_leaf);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, "baseline", e.what());
  }
  return p;
}

BaselineModel BaselineModel::fit(BaselineKind kind, const BaselineParams& params, const TabularDataset& train) {
  auto encoder = FeatureEncoder::fit(train);
  BaselineModel model(kind, params, encoder, train.class_names().size());
  auto x = encoder.transform(train);
  auto y = label_indices(train);
  switch (kind) {
    case BaselineKind::logreg:
      model.logreg_ = logreg_fit(x, y, model.n_classes_, params.l2, params.epochs, params.lr);
      break;
    case BaselineKind::dtree:
      model.tree_ = dtree_fit(x, y, model.n_classes_, params.max_depth, params.min_leaf);
      break;
    case BaselineKind::knn:
      if (params.knn_k < 1 || params.knn_k > x.rows) {
        fail(ErrorKind::config, "knn_fit", "k must lie in [1, n_train]");
      }
      model.train_x_ = std::move(x);
      model.train_y_ = std::move(y);
      break;
  }
  return model;
}

BaselinePrediction BaselineModel::predict(const TabularDataset& ds) const {
  const auto x = encoder_.transform(ds);
  BaselinePrediction out;
  out.labels.reserve(x.rows);
  out.probabilities.reserve(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    switch (kind_) {
      case BaselineKind::logreg: {
        auto [label, p] = logreg_predict(logreg_, row);
        out.labels.push_back(label);
        out.probabilities.push_back(std::move(p));
        break;
      }
      case BaselineKind::dtree: {
        auto p = dtree_proba(tree_, row);
        out.labels.push_back(dtree_predict(tree_, row));
        out.probabilities.push_back(std::move(p));
        break;
      }
      case BaselineKind::knn: {
        auto p = knn_votes(train_x_, train_y_, row, params_.knn_k, n_classes_);
        out.labels.push_back(argmax_lowest(p));
        out.probabilities.push_back(std::move(p));
        break;
      }
    }
  }
  return out;
}

nlohmann::json BaselineModel::to_json() const {
  nlohmann::json j{{"kind", std::string(lbc::to_string(kind_))}, {"encoder", encoder_.to_json()}};
  switch (kind_) {
    case BaselineKind::logreg:
      j["weights"] = logreg_.weights;
      j["l2"] = logreg_.l2;
      j["epochs_run"] = logreg_.trace.size();
      break;
    case BaselineKind::dtree: {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : tree_.nodes) {
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                         {"counts", n.counts}});
      }
      j["nodes"] = nodes;
      break;
    }
    case BaselineKind::knn:
      j["k"] = params_.knn_k;
      j["n_train"] = train_x_.rows;
      break;
  }
  return j;
}

}  // namespace lbc
