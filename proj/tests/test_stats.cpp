#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "interlace/rng.hpp"
#include "interlace/stats.hpp"

using namespace interlace;

TEST_CASE("summarize: mean, unbiased variance and standard error") {
  const auto s = summarize({1, 2, 3, 4});
  CHECK(s.n == 4);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.var == doctest::Approx(5.0 / 3));
  CHECK(s.se() == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
}

TEST_CASE("linear and log-log fits recover exact relations") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(3 - 2 * v);
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(-2));
  CHECK(f.intercept == doctest::Approx(3));
  CHECK(f.r2 == doctest::Approx(1));

  std::vector<double> X{2, 4, 8, 16, 32}, Y, S;
  for (double v : X) {
    Y.push_back(7 * std::pow(v, -1.5));
    S.push_back(0.01 * Y.back());
  }
  const auto g = loglog_fit(X, Y, S);
  CHECK(g.slope == doctest::Approx(-1.5).epsilon(1e-9));
  CHECK(g.n == 5);
}

TEST_CASE("log-log fit standard error covers the truth under noise") {
  RngStream r(1, 1);
  std::size_t covered = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> X{4, 8, 16, 32, 64}, Y, S;
    for (double v : X) {
      const double y = std::pow(v, 2.0);
      const double noise = 0.05 * y;
      // Box-Muller from two uniforms.
      const double z = std::sqrt(-2 * std::log(1 - r.uniform())) * std::cos(2 * M_PI * r.uniform());
      Y.push_back(y + noise * z);
      S.push_back(noise);
    }
    const auto f = loglog_fit(X, Y, S);
    covered += std::abs(f.slope - 2) <= 2 * f.slope_se;
  }
  CHECK(double(covered) / trials > 0.9);
}

TEST_CASE("chi-square goodness of fit against the Boost law") {
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> obs{12, 18, 33, 37};
  const auto t = chi_square_gof(obs, probs);
  double stat = 0;
  for (int i = 0; i < 4; ++i) stat += std::pow(obs[i] - 100 * probs[i], 2) / (100 * probs[i]);
  CHECK(t.statistic == doctest::Approx(stat));
  CHECK(t.dof == 3);
  const boost::math::chi_squared_distribution<double> law(3);
  CHECK(t.p_value == doctest::Approx(boost::math::cdf(complement(law, stat))));
  CHECK(chi_square_gof({10, 20, 30, 40}, probs).p_value == doctest::Approx(1.0));
}

TEST_CASE("Kolmogorov tail function reference values") {
  CHECK(kolmogorov_q(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
  CHECK(kolmogorov_q(0.5) == doctest::Approx(0.96394524).epsilon(1e-6));
  CHECK(kolmogorov_q(2.0) == doctest::Approx(0.00067093).epsilon(1e-4));
  CHECK(kolmogorov_q(0.0) == 1.0);
}

TEST_CASE("two-sample KS: identical and shifted samples") {
  RngStream r(2, 1);
  std::vector<double> a, b, c;
  for (int i = 0; i < 2000; ++i) {
    a.push_back(r.uniform());
    b.push_back(r.uniform());
    c.push_back(r.uniform() + 0.2);
  }
  CHECK(ks_two_sample(a, a).p_value == doctest::Approx(1.0));
  CHECK(ks_two_sample(a, b).p_value > 0.001);
  CHECK(ks_two_sample(a, c).p_value < 1e-6);
}

TEST_CASE("Pearson correlation") {
  std::vector<double> x, y, z;
  RngStream r(3, 1);
  for (int i = 0; i < 1000; ++i) {
    x.push_back(i);
    y.push_back(3 * i + 1);
    z.push_back(r.uniform());
  }
  CHECK(pearson(x, y).r == doctest::Approx(1.0));
  const auto c = pearson(x, z);
  CHECK(std::abs(c.r) <= 4 * c.se);
}
