#pragma once

#include <span>
#include <utility>

#include <nlohmann/json.hpp>

namespace lbc {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1],
/// evaluated by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

struct TTestResult {
  double t_stat = 0.0;
  double p_value = 1.0;  // two-sided
  double dof = 0.0;
  std::pair<double, double> means;
  bool reject = false;  // p < alpha
};

/// Welch's unequal-variance two-sample t-test. The two-sided p-value is
/// I_x(dof/2, 1/2) with x = dof / (dof + t^2).
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

double mean(std::span<const double> xs);
/// Sample variance (n - 1 denominator).
double sample_variance(std::span<const double> xs);

nlohmann::json to_json(const TTestResult& r);

}  // namespace lbc
