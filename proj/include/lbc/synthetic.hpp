#pragma once

#include <cstdint>

#include "lbc/dataset.hpp"
#include "lbc/mock_backend.hpp"

namespace lbc {

/// A binary task with a planted additive rule, and a mock model that knows it.
struct SyntheticTask {
  TabularDataset data;
  MockModelSpec mock;
};

/// Features x0..x{K-1} drawn uniformly from [-1, 1]; the label is "Yes" when
/// their sum is positive, "No" otherwise. The mock weights every
/// "x<j> is Category <c>" phrase by (c - (N+1)/2) toward "Yes" and the
/// opposite toward "No", so it scores the discretized rule whether a column
/// appears in the IV or the OOV part of the prompt.
SyntheticTask make_additive_task(std::size_t rows, std::size_t features, std::size_t n_categories,
                                 std::uint64_t seed, double position_decay = 1.0);

}  // namespace lbc
