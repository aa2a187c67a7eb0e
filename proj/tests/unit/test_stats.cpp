#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "lbc/error.hpp"
#include "lbc/rng.hpp"
#include "lbc/stats.hpp"

using namespace lbc;

TEST_CASE("incomplete beta against boost") {
  SplitMix64 rng(77);
  for (int i = 0; i < 2000; ++i) {
    const double a = 0.05 + 30.0 * rng.uniform();
    const double b = 0.05 + 30.0 * rng.uniform();
    const double x = rng.uniform();
    CHECK(regularized_incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-11));
  }
  CHECK(regularized_incomplete_beta(2, 3, 0) == 0.0);
  CHECK(regularized_incomplete_beta(2, 3, 1) == 1.0);
  CHECK_THROWS_AS(regularized_incomplete_beta(-1, 3, 0.5), Error);
}

TEST_CASE("welch golden") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{1, 2, 3, 4, 5};
  const auto r = welch_ttest(a, b);
  // 50-digit reference values.
  CHECK(std::abs(r.t_stat - -1.0954451150103322269) <= 1e-9);
  CHECK(std::abs(r.dof - 5.8823529411764705882) <= 1e-9);
  CHECK(std::abs(r.p_value - 0.31613342192639328687) <= 1e-9);
  CHECK_FALSE(r.reject);
}

TEST_CASE("welch identities") {
  const std::vector<double> a{0.8, 0.82, 0.79};
  const auto same = welch_ttest(a, a);
  CHECK(same.t_stat == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> b{0.7, 0.71, 0.73, 0.69};
  const auto ab = welch_ttest(a, b);
  const auto ba = welch_ttest(b, a);
  CHECK(ab.t_stat == -ba.t_stat);
  CHECK(ab.p_value == ba.p_value);
  CHECK(ab.reject);
  // Agrees with the Student t tail at the Welch dof.
  const boost::math::students_t dist(ab.dof);
  CHECK(ab.p_value == doctest::Approx(2 * boost::math::cdf(boost::math::complement(dist, std::abs(ab.t_stat))))
                          .epsilon(1e-10));
}

TEST_CASE("welch degenerate inputs") {
  CHECK_THROWS_AS(welch_ttest(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
  CHECK_THROWS_AS(welch_ttest(std::vector<double>{1, 1}, std::vector<double>{2, 2}), Error);
  const auto one_flat = welch_ttest(std::vector<double>{1, 1}, std::vector<double>{1, 2, 3});
  CHECK(one_flat.p_value >= 0.0);
}

TEST_CASE("p values stay in range on random samples") {
  SplitMix64 rng(4);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> a(2 + rng.below(8));
    std::vector<double> b(2 + rng.below(8));
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = 3.0 * rng.normal() + 1.0;
    const auto r = welch_ttest(a, b);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
}
