#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hvsim {

struct MetricSummary {
  std::string name;
  std::size_t samples = 0;
  double mean = 0.0;
  std::optional<double> half_width;  // absent for a single sample
};

// Two-sided Student-t quantile, e.g. t(0.975, 9) = 2.262.
double student_t_quantile(double p, int dof);

// Mean and confidence half-width t_{(1+c)/2, n-1} * s / sqrt(n).
MetricSummary aggregate(std::string name, std::span<const double> samples,
                        double confidence = 0.95);

double mean(std::span<const double> x);

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

}  // namespace hvsim
