#include "hvsim/stats.hpp"

#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

using namespace hvsim;

TEST_CASE("student t quantiles") {
  CHECK(student_t_quantile(0.975, 9) == doctest::Approx(2.2621571628).epsilon(1e-9));
  CHECK(student_t_quantile(0.975, 1) == doctest::Approx(12.7062047362).epsilon(1e-9));
  CHECK(student_t_quantile(0.975, 1000) == doctest::Approx(1.96).epsilon(2e-3));
  CHECK_THROWS_AS(student_t_quantile(0.975, 0), std::invalid_argument);
  CHECK_THROWS_AS(student_t_quantile(1.0, 5), std::invalid_argument);
}

TEST_CASE("aggregate") {
  SUBCASE("one to ten") {
    std::vector<double> x(10);
    std::iota(x.begin(), x.end(), 1.0);
    const auto m = aggregate("x", x);
    CHECK(m.mean == 5.5);
    CHECK(m.samples == 10);
    // s^2 = sum (i - 5.5)^2 / 9 = 82.5 / 9
    const double s = std::sqrt(82.5 / 9.0);
    REQUIRE(m.half_width);
    CHECK(*m.half_width == doctest::Approx(2.2621571628 * s / std::sqrt(10.0)).epsilon(1e-9));
  }
  SUBCASE("identical samples give a zero-width interval") {
    const std::vector<double> x(7, 3.25);
    const auto m = aggregate("x", x);
    CHECK(m.mean == 3.25);
    REQUIRE(m.half_width);
    CHECK(*m.half_width == 0.0);
  }
  SUBCASE("a single run has no interval") {
    const std::vector<double> x{4.0};
    const auto m = aggregate("x", x);
    CHECK(m.mean == 4.0);
    CHECK_FALSE(m.half_width);
  }
  SUBCASE("coverage of the interval") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(2.0, 1.5);
    int covered = 0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> x(10);
      for (auto& v : x) v = n(rng);
      const auto m = aggregate("x", x);
      covered += std::abs(m.mean - 2.0) <= *m.half_width;
    }
    CHECK(covered / double(trials) == doctest::Approx(0.95).epsilon(0.015));
  }
}

TEST_CASE("spearman") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{10, 20, 30, 40, 50}) == doctest::Approx(1.0));
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(x, std::vector<double>{1, 8, 27, 64, 125}) == doctest::Approx(1.0));
  // Ties get average ranks: ranks (1.5, 1.5, 3) against (1, 2, 3).
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 1}) ==
        doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("linear fit") {
  const std::vector<double> x{4, 8, 16, 32, 64};
  std::vector<double> y;
  for (double v : x) y.push_back(0.5 + 0.25 * v);
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(0.25));
  CHECK(f.intercept == doctest::Approx(0.5));
  CHECK(f.r_squared == doctest::Approx(1.0));
  const auto q = linear_fit(std::vector<double>{-2, -1, 0, 1, 2}, std::vector<double>{4, 1, 0, 1, 4});
  CHECK(q.r_squared == doctest::Approx(0.0));
}
