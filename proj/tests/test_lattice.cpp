#include "doctest.h"

#include <array>
#include <cmath>
#include <map>
#include <set>

#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

using namespace interlace;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(RngStream::philox({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(RngStream::philox({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(RngStream::philox({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8), e(43, 7);
  bool diff_c = false, diff_e = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    diff_c |= x != c();
    diff_e |= x != e();
  }
  CHECK(diff_c);
  CHECK(diff_e);
  CHECK(a.child(3).stream() == b.child(3).stream());
  CHECK(a.child(3).stream() != a.child(4).stream());
}

TEST_CASE("uniform and below stay in range and are unbiased") {
  RngStream r(1, 0);
  std::array<int, 10> counts{};
  double s = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    const auto k = r.below(10);
    REQUIRE(k < 10);
    ++counts[k];
  }
  CHECK(std::abs(s / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  for (int c : counts) CHECK(std::abs(c - n / 10.0) < 5 * std::sqrt(n * 0.1 * 0.9));
}

TEST_CASE("dimension limits") {
  CHECK_THROWS_AS(Point(2), std::invalid_argument);
  CHECK_THROWS_AS(Point(9), std::invalid_argument);
  CHECK_THROWS_AS((Point{1, 2}), std::invalid_argument);
  CHECK_NOTHROW(Point(3));
  CHECK_NOTHROW(Point(8));
  CHECK_THROWS((Point{1, 2, 3} + Point{1, 2, 3, 4}));
}

TEST_CASE("sup_norm") {
  CHECK(sup_norm(Point::zero(5)) == 0);
  CHECK(sup_norm(Point{1, -3, 2}) == 3);
  RngStream r(5, 0);
  for (int i = 0; i < 1000; ++i) {
    Point p(4);
    for (int k = 0; k < 4; ++k) p[k] = static_cast<std::int64_t>(r.below(2001)) - 1000;
    CHECK(sup_norm(p) == sup_norm(-p));
  }
}

TEST_CASE("ball membership is sup-norm") {
  Ball b(Point{1, 1, 1}, 2);
  CHECK(b.contains(Point{3, -1, 3}));
  CHECK_FALSE(b.contains(Point{4, 1, 1}));
  CHECK(b.volume() == 125);
  CHECK_THROWS(Ball(Point{0, 0, 0}, -1));
}

TEST_CASE("packed keys round-trip in every dimension") {
  RngStream r(9, 0);
  for (int d = 3; d <= 8; ++d) {
    const std::int64_t lim = key_coordinate_limit(d);
    for (int i = 0; i < 200; ++i) {
      Point p(d);
      for (int k = 0; k < d; ++k) {
        const auto span = static_cast<std::uint32_t>(std::min<std::int64_t>(2 * lim + 1, 1u << 31));
        p[k] = static_cast<std::int64_t>(r.below(span)) - std::min<std::int64_t>(lim, span / 2);
      }
      CHECK(unpack(pack(p), d) == p);
    }
    Point far(d);
    far[0] = lim + 1;
    CHECK_THROWS_AS(pack(far), std::out_of_range);
  }
}

TEST_CASE("SiteSet behaves like std::set") {
  RngStream r(11, 0);
  SiteSet s(5);
  std::set<Point> ref;
  for (int i = 0; i < 5000; ++i) {
    Point p(5);
    for (int k = 0; k < 5; ++k) p[k] = static_cast<std::int64_t>(r.below(9)) - 4;
    CHECK(s.insert(p) == ref.insert(p).second);
  }
  CHECK(s.size() == ref.size());
  for (const auto& p : ref) CHECK(s.contains(p));
  CHECK_FALSE(s.contains(Point{5, 0, 0, 0, 0}));
  CHECK(s.max_sup_norm() == 4);
  auto pts = s.points();
  CHECK(std::vector<Point>(ref.begin(), ref.end()) == pts);
}

TEST_CASE("exposed sites of a ball are its surface") {
  SiteSet b(3);
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y)
      for (int z = -2; z <= 2; ++z) b.insert(Point{x, y, z});
  const auto ex = exposed_sites(b);
  CHECK(ex.size() == 125 - 27);
  for (const auto& p : ex) CHECK(sup_norm(p) == 2);
}

TEST_CASE("walk_until: hit at time zero") {
  SiteSet K(3, {Point{0, 0, 0}});
  RngStream r(1, 1);
  auto res = walk_until(Point{0, 0, 0}, StopRule{100, std::nullopt, &K}, r);
  CHECK(res.cause == StopCause::Hit);
  CHECK(res.path.length() == 0);
}

TEST_CASE("walk_until rejects an uncapped hit rule") {
  SiteSet K(3, {Point{5, 0, 0}});
  RngStream r(1, 1);
  CHECK_THROWS_AS(walk_until(Point{0, 0, 0}, StopRule{std::nullopt, std::nullopt, &K}, r),
                  std::invalid_argument);
}

TEST_CASE("walk_until: exit from B(0,1) matches enumeration of short paths") {
  // From 0 the first step lands on the sphere |x| = 1. The walk exits at step 2
  // unless it steps back (to 0) or sideways; exact law from enumerating
  // two-step prefixes: P(T = 2) = P(second step increases the moved
  // coordinate) = 1/(2d).
  const int d = 3;
  std::map<std::size_t, int> hist;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    RngStream r(3, static_cast<std::uint64_t>(i));
    auto res = walk_until(Point::zero(d), StopRule::exit(Ball(Point::zero(d), 1)), r);
    CHECK(res.cause == StopCause::Exit);
    ++hist[res.path.length()];
  }
  CHECK(hist[0] == 0);
  CHECK(hist[1] == 0);
  // Enumerate the 36 two-step prefixes.
  int exits = 0;
  for (int a = 0; a < 2 * d; ++a)
    for (int b = 0; b < 2 * d; ++b) {
      std::array<std::int64_t, 8> x{};
      apply_move(x.data(), static_cast<std::uint8_t>(a));
      apply_move(x.data(), static_cast<std::uint8_t>(b));
      std::int64_t m = 0;
      for (int k = 0; k < d; ++k) m = std::max(m, std::abs(x[k]));
      exits += m > 1;
    }
  const double p2 = exits / 36.0;
  CHECK(p2 == doctest::Approx(1.0 / 6));
  CHECK(std::abs(hist[2] / double(n) - p2) < 5 * std::sqrt(p2 * (1 - p2) / n));
}

TEST_CASE("walk_until: coordinate variance n/d and step symmetry") {
  const int d = 5;
  const std::size_t steps = 10000;
  const int reps = 2000;
  double s = 0, s2 = 0;
  std::array<long, 10> dir{};
  long total = 0;
  for (int i = 0; i < reps; ++i) {
    RngStream r(17, static_cast<std::uint64_t>(i));
    auto res = walk_until(Point::zero(d), StopRule::length(steps), r);
    REQUIRE(res.path.length() == steps);
    if (i < 20) {
      for (auto k : res.path.moves) ++dir[k];
      total += static_cast<long>(steps);
    }
    const Point e = res.path.end();
    const double q = l2_norm_sq(e) / d;
    s += q;
    s2 += q * q;
    if (i < 3) CHECK(is_nearest_neighbor(res.path.points()));
  }
  const double mean = s / reps;
  const double se = std::sqrt((s2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean - double(steps) / d) < 3 * se);
  for (long c : dir) {
    const double p = 1.0 / 10;
    CHECK(std::abs(c - p * total) < 5 * std::sqrt(total * p * (1 - p)));
  }
}

TEST_CASE("walk paths are reproducible") {
  RngStream a(99, 4), b(99, 4);
  auto ra = walk_until(Point{1, 2, 3, 4}, StopRule::length(500), a);
  auto rb = walk_until(Point{1, 2, 3, 4}, StopRule::length(500), b);
  CHECK(ra.path.moves == rb.path.moves);
  CHECK(ra.path.seed == 99);
  CHECK(ra.path.stream == 4);
}

TEST_CASE("stop cause priority: hit before exit at the same time") {
  SiteSet K(3, {Point{2, 0, 0}});
  // Start outside the exit ball but inside K: hit wins.
  RngStream r(1, 2);
  auto res = walk_until(Point{2, 0, 0}, StopRule{5, Ball(Point::zero(3), 1), &K}, r);
  CHECK(res.cause == StopCause::Hit);
  auto res2 = walk_until(Point{3, 0, 0}, StopRule{0, Ball(Point::zero(3), 1), nullptr}, r);
  CHECK(res2.cause == StopCause::Exit);
}
