#include "lbc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lbc/error.hpp"

namespace lbc {

namespace {

constexpr const char* kModule = "evaluation";

/// Continued fraction for I_x(a,b) (modified Lentz), valid for x < (a+1)/(a+b+2).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error(ErrorKind::stat, kModule, "incomplete_beta", "continued fraction did not converge");
}

/// I_x(a,b) with y = 1 - x supplied separately to avoid cancellation.
double ibeta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, y) / b;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorKind::stat, kModule, "incomplete_beta", "arguments out of domain");
  }
  return ibeta(a, b, x, 1.0 - x);
}

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  // Shifting by the first value keeps a constant sample at exactly zero.
  const double shift = xs.front();
  double m = 0.0;
  for (double x : xs) m += x - shift;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - shift - m) * (x - shift - m);
  return ss / static_cast<double>(xs.size() - 1);
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorKind::stat, kModule, "welch_ttest", "each sample needs at least two values");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a);
  const double mb = mean(b);
  const double va = sample_variance(a) / na;
  const double vb = sample_variance(b) / nb;
  const double se2 = va + vb;
  if (!(se2 > 0.0) || !std::isfinite(se2)) {
    throw Error(ErrorKind::stat, kModule, "welch_ttest", "both samples have zero variance");
  }
  TTestResult r;
  r.means = {ma, mb};
  r.t_stat = (ma - mb) / std::sqrt(se2);
  r.dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const double t2 = r.t_stat * r.t_stat;
  const double x = r.dof / (r.dof + t2);
  const double y = t2 / (r.dof + t2);
  r.p_value = std::clamp(ibeta(r.dof / 2.0, 0.5, x, y), 0.0, 1.0);
  r.reject = r.p_value < alpha;
  return r;
}

nlohmann::json to_json(const TTestResult& r) {
  return nlohmann::json{{"t_stat", r.t_stat},
                        {"p_value", r.p_value},
                        {"dof", r.dof},
                        {"mean_a", r.means.first},
                        {"mean_b", r.means.second},
                        {"reject_h0", r.reject}};
}

}  // namespace lbc
