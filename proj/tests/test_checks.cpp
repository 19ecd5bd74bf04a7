#include "doctest.h"

#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <sstream>

#include "interlace/checks.hpp"
#include "interlace/green.hpp"

using namespace interlace;

namespace {

std::string csv(const std::vector<CheckReport>& r) {
  std::ostringstream os;
  write_reports_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("reports: CSV header and text line") {
  CheckReport r;
  r.id = "x.y";
  r.parameters = "a=1;b=2";
  r.statistic = 0.5;
  r.bound = 1;
  r.pass = true;
  r.seed = 9;
  const auto s = csv({r});
  CHECK(s.rfind("id,parameters,statistic,bound,sigma,pass,replicas,seed,criterion,note\n", 0) == 0);
  CHECK(s.find("x.y") != std::string::npos);
  CHECK(r.text().rfind("PASS x.y", 0) == 0);
  CHECK(all_pass({r}));
  r.pass = false;
  CHECK_FALSE(all_pass({r}));
}

TEST_CASE("checks are reproducible and independent of the worker count") {
  CheckContext one{77, 1}, three{77, 3};
  const auto g = graph_check_params(CheckScale::Quick);
  CHECK(csv(check_graph(g, one)) == csv(check_graph(g, three)));
  const auto q = inequality_params(CheckScale::Quick);
  const auto a = check_inequalities(q, one);
  CHECK(csv(a) == csv(check_inequalities(q, three)));
  CHECK(all_pass(a));
  CheckContext other{78, 1};
  CHECK(csv(a) != csv(check_inequalities(q, other)));
}

TEST_CASE("Paley-Zygmund worked example against the exact Poisson law") {
  // theta = 1/2, mean 1: bound (1/4) * 1 / 2 = 1/8, exact P(xi >= 1/2) = 1 - e^-1.
  const double bound = 0.25 * 1.0 / (1.0 + 1.0);
  CHECK(bound == doctest::Approx(0.125));
  const boost::math::poisson_distribution<double> law(1.0);
  const double exact = boost::math::cdf(complement(law, 0.0));
  CHECK(exact == doctest::Approx(1 - std::exp(-1.0)));
  CHECK(exact >= bound);
}

TEST_CASE("convolution: empty product and axis reduction") {
  const int d = 5;
  for (std::int64_t k : {0, 1, 3, 9}) {
    const auto v = convolution_exact(0, Point::zero(d), Point::axis(d, 0, k), 4);
    CHECK(v.value == doctest::Approx(k == 0 ? 1.0 : std::pow(double(k), 2.0 - d)));
  }
  // n = 1 with both points on the first axis uses the reduced sum; the same
  // value with a rotated end point takes the plain enumeration.
  const auto a = convolution_exact(1, Point::zero(d), Point::axis(d, 0, 2), 4);
  const auto b = convolution_exact(1, Point::zero(d), Point::axis(d, 3, 2), 4);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
  CHECK_THROWS(convolution_exact(3, Point::zero(d), Point::axis(d, 0, 2), 2));
}

TEST_CASE("convolution: Monte Carlo agrees with exact sums") {
  const int d = 5;
  for (int n : {1, 2}) {
    const std::int64_t L = n == 1 ? 6 : 3;
    const auto r = check_convolution(n, Point::zero(d), Point::axis(d, 0, 2), L, 100000, CheckContext{5, 1});
    MESSAGE(r.text());
    CHECK(r.pass);
  }
}

TEST_CASE("convolution: n below s_d converges as the box grows") {
  // Increments between doubling boxes shrink geometrically for n = 1, d = 5.
  const int d = 5;
  const auto z = Point::axis(d, 0, 2);
  std::vector<double> v;
  for (std::int64_t L : {4, 8, 16, 32, 64}) v.push_back(convolution_exact(1, Point::zero(d), z, L).value);
  for (std::size_t i = 2; i < v.size(); ++i) {
    CHECK(v[i] > v[i - 1]);
    CHECK((v[i] - v[i - 1]) < 0.75 * (v[i - 1] - v[i - 2]));
  }
}

TEST_CASE("layer epsilon selection") {
  CHECK(choose_layer_eps(5, 1, {8, 16, 32}, {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8}) == doctest::Approx(1.0 / 8));
  CHECK(choose_layer_eps(5, 1, {64}, {1.0 / 64, 1.0 / 32}) == doctest::Approx(1.0 / 64));
  CHECK_THROWS(choose_layer_eps(5, 2, {8}, {1.0 / 64}));
}

TEST_CASE("quick presets run and pass") {
  CheckContext ctx{20240601, 1};
  auto all = check_capacity_cross(capacity_cross_params(CheckScale::Quick), ctx);
  for (auto&& v : {check_sampler_law(sampler_law_params(CheckScale::Quick), ctx),
                   check_mu_S_bound(mu_S_params(CheckScale::Quick), ctx)})
    all.insert(all.end(), v.begin(), v.end());
  for (const auto& r : all) MESSAGE(r.text());
  CHECK(all_pass(all));
}
