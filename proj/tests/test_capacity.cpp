#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "interlace/capacity.hpp"
#include "interlace/escape_field.hpp"
#include "interlace/green.hpp"

using namespace interlace;

namespace {

SiteSet random_set(int d, std::size_t n, std::int64_t spread, RngStream& r) {
  SiteSet K(d);
  while (K.size() < n) {
    Point x(d);
    for (int k = 0; k < d; ++k) x[k] = std::int64_t(r.below(std::uint32_t(2 * spread + 1))) - spread;
    K.insert(x);
  }
  return K;
}

SiteSet box_set(int d, std::int64_t a) {
  SiteSet K(d);
  Point x(d);
  for (int k = 0; k < d; ++k) x[k] = -a;
  for (;;) {
    K.insert(x);
    int k = 0;
    while (k < d && x[k] == a) x[k++] = -a;
    if (k == d) break;
    ++x[k];
  }
  return K;
}

}  // namespace

TEST_CASE("green matrix: singleton and pair entries") {
  const auto& g = GreenTable::shared(5);
  const auto x = Point::axis(5, 1, 3);
  auto G1 = green_matrix(SiteSet(5, {Point::zero(5)}));
  REQUIRE(G1.rows() == 1);
  CHECK(G1(0, 0) == doctest::Approx(g.g0()));
  auto G2 = green_matrix(SiteSet(5, {Point::zero(5), x}));
  CHECK(G2(0, 0) == doctest::Approx(g.g0()));
  CHECK(G2(1, 1) == doctest::Approx(g.g0()));
  CHECK(G2(0, 1) == doctest::Approx(g(x)));
  CHECK(G2(1, 0) == doctest::Approx(g(x)));
}

TEST_CASE("green matrix is positive definite") {
  RngStream r(1, 1);
  for (int i = 0; i < 20; ++i) {
    const int d = 3 + i % 3;
    const auto K = random_set(d, 1 + r.below(12), 3, r);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(green_matrix(K));
    CHECK(es.eigenvalues().minCoeff() > 0);
  }
}

TEST_CASE("capacity: closed forms for one and two points") {
  for (int d : {3, 5, 7}) {
    const auto& g = GreenTable::shared(d);
    CHECK(capacity_variational(SiteSet(d, {Point::axis(d, 0, 4)})).capacity ==
          doctest::Approx(1 / g.g0()).epsilon(1e-9));
    for (std::int64_t k : {1, 2, 5}) {
      const auto x = Point::axis(d, d - 1, k);
      const auto c = capacity_variational(SiteSet(d, {Point::zero(d), x}));
      CHECK(c.capacity == doctest::Approx(2 / (g.g0() + g(x))).epsilon(1e-9));
      const auto nu = c.measure.normalized();
      REQUIRE(nu.size() == 2);
      CHECK(nu[0] == doctest::Approx(0.5).epsilon(1e-9));
      CHECK(nu[1] == doctest::Approx(0.5).epsilon(1e-9));
    }
  }
}

TEST_CASE("capacity: monotone under inclusion") {
  RngStream r(2, 1);
  for (int i = 0; i < 50; ++i) {
    const int d = i % 2 ? 5 : 3;
    const auto K2 = random_set(d, 2 + r.below(29), 3, r);
    SiteSet K1(d);
    for (const auto& p : K2.points())
      if (r.below(2) || K1.empty()) K1.insert(p);
    const double c1 = capacity_variational(K1).capacity, c2 = capacity_variational(K2).capacity;
    CHECK(c1 <= c2 * (1 + 1e-9));
  }
}

TEST_CASE("capacity: subadditive and bounded by the point count") {
  RngStream r(5, 1);
  const double g0 = GreenTable::shared(5).g0();
  for (int i = 0; i < 20; ++i) {
    const auto A = random_set(5, 1 + r.below(10), 3, r), B = random_set(5, 1 + r.below(10), 3, r);
    SiteSet U = A;
    for (const auto& p : B.points()) U.insert(p);
    const double cu = capacity_variational(U).capacity;
    CHECK(cu <= (capacity_variational(A).capacity + capacity_variational(B).capacity) * (1 + 1e-9));
    CHECK(cu <= double(U.size()) / g0 * (1 + 1e-9));
  }
}

TEST_CASE("capacity: Monte Carlo for a singleton") {
  const SiteSet K(5, {Point::zero(5)});
  const auto R = certified_outer_radius(K, 1, 1e-3);
  const auto mc = capacity_mc(K, 40000, R, RngStream(4, 4));
  const double exact = 1 / GreenTable::shared(5).g0();
  MESSAGE("mc " << mc.capacity << " +- " << mc.stderr << " exact " << exact);
  CHECK(std::abs(mc.capacity - exact) <= 3 * mc.stderr + mc.bias_bound);
}

TEST_CASE("capacity: dispatcher picks a method by exposed size") {
  const auto small = capacity(box_set(5, 1), RngStream(1, 2));
  CHECK(small.method == "variational");
  const auto big = capacity(box_set(5, 3), RngStream(1, 2), 4000);
  CHECK(big.method == "monte-carlo");
  CHECK(big.capacity > small.capacity);
}

TEST_CASE("hitting formula: start inside, point target and decay") {
  const auto& g = GreenTable::shared(5);
  const SiteSet K = box_set(5, 2);
  const auto e = capacity_variational(K).measure;
  CHECK(hitting_prob(Point::axis(5, 0, 1), K, e, g).value >= 1 - 1e-6);
  CHECK(hitting_prob(Point::axis(5, 0, 32), K, e, g).value < hitting_prob(Point::axis(5, 0, 8), K, e, g).value);

  // K = {0}: formula g(x)/g(0) against the frequency of hitting 0 before
  // leaving B(0, 60); hits after that exit are at most g(60 e1)/g(0) in mass.
  const SiteSet O(5, {Point::zero(5)});
  const auto x = Point::axis(5, 0, 3);
  const double formula = hitting_prob(x, O, capacity_variational(O).measure, g).value;
  CHECK(formula == doctest::Approx(g(x) / g.g0()).epsilon(1e-6));
  const std::size_t n = 20000;
  std::size_t hits = 0;
  const RngStream base(9, 9);
  for (std::size_t i = 0; i < n; ++i) {
    StopRule rule;
    rule.hit_set = &O;
    rule.exit_ball = Ball(Point::zero(5), 60);
    RngStream r = base.child(i);
    hits += walk_until(x, rule, r).cause == StopCause::Hit;
  }
  const double p = double(hits) / n, se = std::sqrt(p * (1 - p) / n);
  const double lost = g(Point::axis(5, 0, 60)) / g.g0();
  MESSAGE("hit frequency " << p << " +- " << se << " formula " << formula);
  CHECK(p <= formula + 3 * se);
  CHECK(p >= formula - 3 * se - lost);
}

TEST_CASE("escape field: empty set, harmonicity and complement of hitting") {
  const auto& g = GreenTable::shared(5);
  {
    const SiteSet K(5);
    const EscapeField h(K, Ball(Point::zero(5), 4), EquilibriumMeasure{5, {}, {}, {}}, g);
    CHECK(h.at(Point::zero(5)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h.at(Point::axis(5, 2, 3)) == doctest::Approx(1.0).epsilon(1e-12));
  }
  const SiteSet K = box_set(5, 1);
  const auto e = capacity_variational(K).measure;
  const EscapeField h(K, Ball(Point::zero(5), 7), e, g);
  CHECK(h.max_harmonic_residual() < 1e-10);
  CHECK(h.at(Point::zero(5)) == 0.0);
  for (std::int64_t k : {2, 3, 4}) {
    const auto z = Point::axis(5, 1, k);
    CHECK(h.at(z) + hitting_prob(z, K, e, g).value == doctest::Approx(1.0).epsilon(0.02));
  }
}
