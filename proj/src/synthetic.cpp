#include "lbc/synthetic.hpp"

#include "lbc/discretizer.hpp"
#include <cmath>

#include "lbc/rng.hpp"

namespace lbc {

SyntheticTask make_additive_task(std::size_t rows, std::size_t features, std::size_t n_categories,
                                 std::uint64_t seed, double position_decay) {
  SplitMix64 rng(seed);
  std::vector<ColumnSchema> schema;
  for (std::size_t j = 0; j < features; ++j) {
    schema.push_back({"x" + std::to_string(j), ColumnKind::numeric, j});
  }
  std::vector<Row> data;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < rows; ++i) {
    Row row;
    double sum = 0.0;
    for (std::size_t j = 0; j < features; ++j) {
      // Three decimals keep the CSV form exact.
      const double v = std::round((2.0 * rng.uniform() - 1.0) * 1000.0) / 1000.0;
      row.emplace_back(v);
      sum += v;
    }
    data.push_back(std::move(row));
    labels.emplace_back(sum > 0.0 ? "Yes" : "No");
  }

  MockModelSpec mock;
  mock.bias = {0.0, 0.0};
  mock.class_words = {{"No", "no", "false", "nope"}, {"Yes", "yes", "yeah", "true"}};
  mock.position_decay = position_decay;
  const double center = (static_cast<double>(n_categories) + 1.0) / 2.0;
  for (std::size_t j = 0; j < features; ++j) {
    for (std::size_t c = 1; c <= n_categories; ++c) {
      const double w = static_cast<double>(c) - center;
      mock.token_weights["x" + std::to_string(j) + " is " + category_label(c)] = {-w, w};
    }
  }
  return SyntheticTask{TabularDataset(std::move(schema), std::move(data), std::move(labels), {"No", "Yes"}, "class"),
                       std::move(mock)};
}

}  // namespace lbc
