#include "doctest.h"

#include <cmath>
#include <sstream>

#include "interlace/green.hpp"

using namespace interlace;

TEST_CASE("green: return probabilities match reference values") {
  // Return probabilities F_d of the simple random walk; g(0) = 1/(1 - F_d).
  const double F[] = {0, 0, 0, 0.340537, 0.193206, 0.135178, 0.104715, 0.085844, 0.072912};
  for (int d = 3; d <= 8; ++d) {
    const auto& t = GreenTable::shared(d);
    const double g0 = t.g0();
    MESSAGE("d=" << d << " g0=" << g0 << " err=" << t.lookup(Point::zero(d)).error << " cells=" << t.cells());
    CHECK(g0 == doctest::Approx(1.0 / (1.0 - F[d])).epsilon(2e-5));
  }
  CHECK(GreenTable::shared(3).g0() == doctest::Approx(1.516386059).epsilon(2e-6));
}

TEST_CASE("green: symmetric under sign flips and coordinate permutations") {
  const auto& t = GreenTable::shared(5);
  RngStream r(7, 1);
  for (int i = 0; i < 100; ++i) {
    Point v(5);
    for (int k = 0; k < 5; ++k) v[k] = std::int64_t(r.below(61)) - 30;
    Point w(5);
    for (int k = 0; k < 5; ++k) w[k] = -v[4 - k];
    CHECK(t(v) == t(-v));
    CHECK(t(v) == t(w));
  }
}

TEST_CASE("green: d=3 g(0) against visit counts of capped walks") {
  // Truncation at sup-norm 100 loses E g(X_exit, 0) <= g(100 e1), well
  // below the statistical error.
  const auto mc = green_mc(Point::zero(3), 4000, 100, RngStream(11, 2));
  const double g0 = GreenTable::shared(3).g0();
  const double cut = GreenTable::shared(3)(Point::axis(3, 0, 100));
  MESSAGE("mc " << mc.value << " +- " << mc.error << " table " << g0);
  CHECK(std::abs(mc.value - g0) <= 3 * mc.error + cut);
}

TEST_CASE("green: table and far asymptotics agree across the valid radius") {
  const auto& t = GreenTable::shared(5);
  const int R = t.valid_radius();
  const auto in = t.lookup(Point::axis(5, 0, R));
  const auto out = t.lookup(Point::axis(5, 0, R + 1));
  CHECK(in.method == GreenMethod::TruncatedSum);
  CHECK(out.method == GreenMethod::Asymptotic);
  // Continuity of the ratio to |v|^{-3} across the switch.
  const double a = in.value * std::pow(R, 3), b = out.value * std::pow(R + 1, 3);
  CHECK(std::abs(a - b) / a < 0.02);
  CHECK(green(Point::axis(5, 0, 32), 0.05).value < green(Point::axis(5, 0, 8)).value);
}

TEST_CASE("green: save and load round-trip") {
  const auto& t = GreenTable::shared(4);
  std::stringstream ss;
  t.save(ss);
  const GreenTable u = GreenTable::load(ss);
  CHECK(u.dim() == 4);
  CHECK(u.valid_radius() == t.valid_radius());
  RngStream r(3, 3);
  for (int i = 0; i < 200; ++i) {
    Point v(4);
    for (int k = 0; k < 4; ++k) v[k] = std::int64_t(r.below(41)) - 20;
    CHECK(u(v) == doctest::Approx(t(v)).epsilon(1e-15));
  }
}

TEST_CASE("green: unattainable accuracy is an error") {
  CHECK_THROWS_AS(green(Point::axis(5, 0, 200), 1e-9), std::runtime_error);
  CHECK_THROWS(GreenTable::shared(2));
}
