#pragma once

#include <cstddef>
#include <vector>

namespace interlace {

struct Summary {
  std::size_t n = 0;
  double mean = 0;
  double var = 0;  // unbiased sample variance
  double se() const;
  // Standard error of the sample variance, using the fourth central moment.
  double var_se = 0;
};
Summary summarize(const std::vector<double>& x);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
  double r2 = 0;
  std::size_t n = 0;
};
// Ordinary least squares; with weights (1/sigma^2) when given.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& weights = {});
// Fit of log y against log x; sigma_y (optional) are absolute errors of y.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& sigma_y = {});

struct TestResult {
  double statistic = 0;
  double dof = 0;
  double p_value = 0;
};

// Pearson chi-square goodness of fit; cells with expected count below
// min_expected are pooled.
TestResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probs,
                          double min_expected = 5.0);

// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);
// Two-sample Kolmogorov-Smirnov test (asymptotic p-value with the
// Stephens small-sample correction; conservative for discrete data).
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Pearson correlation with its large-sample standard error (1 - r^2)/sqrt(n).
struct Correlation {
  double r = 0;
  double se = 0;
  std::size_t n = 0;
};
Correlation pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace interlace
