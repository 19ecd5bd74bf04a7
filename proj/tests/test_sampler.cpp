#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "interlace/capacity.hpp"
#include "interlace/green.hpp"
#include "interlace/parallel.hpp"
#include "interlace/sampler.hpp"
#include "interlace/stats.hpp"

using namespace interlace;

namespace {

SiteSet ball_set(int d, std::int64_t a) {
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

Ball window(int d, std::int64_t r) { return Ball(Point::zero(d), r); }

}  // namespace

TEST_CASE("sampler: N_A has mean u cap(A) on B(0,2)") {
  SamplerOptions o;
  o.paths = false;
  o.method = BackwardMethod::Rejection;
  const Sampler S(ball_set(5, 2), window(5, 3), o);
  const std::size_t n = 10000;
  std::vector<double> counts(n);
  const RngStream base(1, 1);
  for (std::size_t i = 0; i < n; ++i) counts[i] = double(S.sample(1.0, base.child(i)).count());
  const auto s = summarize(counts);
  const double lambda = S.capacity();
  MESSAGE("cap " << lambda << " mean " << s.mean << " var " << s.var);
  CHECK(std::abs(s.mean - lambda) <= 3 * std::sqrt(lambda / n));
}

TEST_CASE("sampler: anchors follow the normalised equilibrium measure") {
  SamplerOptions o;
  o.paths = false;
  o.method = BackwardMethod::Rejection;
  const SiteSet A = ball_set(5, 2);
  const Sampler S(A, window(5, 3), o);
  const auto e = capacity_variational(A).measure;
  std::map<Point, std::size_t> where;
  for (std::size_t i = 0; i < e.sites.size(); ++i) where[e.sites[i]] = i;
  std::vector<double> observed(e.sites.size(), 0.0);
  std::size_t total = 0;
  const RngStream base(2, 1);
  for (std::size_t i = 0; total < 100000; ++i)
    for (const auto& t : S.sample(1.0, base.child(i)).trajectories) {
      observed[where.at(t.anchor)] += 1;
      ++total;
    }
  const auto res = chi_square_gof(observed, e.normalized());
  MESSAGE("chi2 " << res.statistic << " dof " << res.dof << " p " << res.p_value);
  CHECK(res.p_value >= 0.01);
}

TEST_CASE("sampler: backward halves never enter A") {
  const SiteSet A = ball_set(5, 1);
  for (auto m : {BackwardMethod::HTransform, BackwardMethod::Rejection, BackwardMethod::JointRejection}) {
    SamplerOptions o;
    o.method = m;
    o.eps_trunc = 1e-2;
    const Sampler S(A, window(5, 3), o);
    std::size_t checked = 0, bad = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
      for (const auto& t : S.sample(0.05, RngStream(3, i), i).trajectories) {
        ++checked;
        bad += !A.contains(t.anchor);
        Point x = t.anchor;
        for (auto mv : t.backward.moves) {
          apply_move(x.x.data(), mv);
          bad += A.contains(x);
        }
      }
    }
    MESSAGE(to_string(m) << ": " << checked << " trajectories");
    CHECK(checked > 0);
    CHECK(bad == 0);
  }
}

TEST_CASE("sampler: reproducible and independent of the worker count") {
  SamplerOptions o;
  o.eps_trunc = 1e-2;  // d = 3 paths run long before truncation
  const Sampler S(ball_set(3, 1), window(3, 4), o);
  const RngStream base(4, 1);
  auto run = [&](std::size_t jobs) {
    return parallel_map(8, jobs, [&](std::size_t i) {
      std::ostringstream os;
      write_sample(os, S.sample(0.5, base.child(i), i));
      return os.str();
    });
  };
  const auto a = run(1), b = run(3), c = run(1);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a[0] != a[1]);
}

TEST_CASE("sampler: text serialisation round-trip") {
  const Sampler S(ball_set(4, 1), window(4, 3));
  const auto s = S.sample(0.3, RngStream(5, 1), 7);
  std::stringstream ss;
  write_sample(ss, s);
  const auto t = read_sample(ss);
  std::ostringstream again;
  write_sample(again, t);
  CHECK(again.str() == ss.str());
  CHECK(t.count() == s.count());
  CHECK(t.sample_id == 7);
  for (std::size_t i = 0; i < s.count(); ++i) {
    CHECK(t.trajectories[i].anchor == s.trajectories[i].anchor);
    CHECK(t.trajectories[i].trace == s.trajectories[i].trace);
  }
}

TEST_CASE("superpose: empty second sample and compatibility") {
  const SiteSet A = ball_set(5, 1);
  const Sampler S(A, window(5, 2));
  const auto s = S.sample(0.2, RngStream(6, 1));
  auto empty = s;
  empty.trajectories.clear();
  empty.u = 0.3;
  const auto sp = superpose(s, empty);
  REQUIRE(sp.count() == s.count());
  for (std::size_t i = 0; i < s.count(); ++i) CHECK(sp.trajectories[i].trace == s.trajectories[i].trace);
  CHECK(sp.u == doctest::Approx(0.5));
  const Sampler T(ball_set(5, 0), window(5, 2));
  CHECK_THROWS_AS(superpose(s, T.sample(0.2, RngStream(6, 2))), std::invalid_argument);
}

TEST_CASE("superpose: counts match a direct sample at the summed level") {
  SamplerOptions o;
  o.paths = false;
  o.method = BackwardMethod::Rejection;
  const Sampler S(ball_set(5, 1), window(5, 2), o);
  std::vector<double> a, b;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    a.push_back(double(superpose(S.sample(0.5, RngStream(7, 2 * i)), S.sample(0.5, RngStream(7, 2 * i + 1))).count()));
    b.push_back(double(S.sample(1.0, RngStream(8, i)).count()));
  }
  CHECK(ks_two_sample(a, b).p_value >= 0.01);
  const double lambda = S.capacity();
  const auto s = summarize(a);
  CHECK(std::abs(s.mean - lambda) <= 3 * std::sqrt(lambda / 10000));
  CHECK(std::abs(s.var - lambda) <= 3 * std::sqrt((lambda + 2 * lambda * lambda) / 10000));
}

TEST_CASE("split_by_ball: partition and the trivial radius") {
  SamplerOptions o;
  o.method = BackwardMethod::JointRejection;
  const Sampler S(ball_set(5, 2), window(5, 4), o);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto s = S.sample(0.05, RngStream(9, i));
    const auto [near, far] = split_by_ball(s, 1);
    CHECK(near.count() + far.count() == s.count());
    for (const auto& t : near.trajectories) CHECK(t.closest_approach <= 1);
    for (const auto& t : far.trajectories) CHECK(t.closest_approach > 1);
    // Every trajectory meets A, and A lies in B(0, 2).
    CHECK(split_by_ball(s, 2).first.count() == s.count());
  }
  CHECK_THROWS_AS(split_by_ball(S.sample(0.05, RngStream(9, 99)), 5), std::invalid_argument);
}

TEST_CASE("occupation field: empty sample and anchors") {
  const SiteSet A = ball_set(5, 1);
  const Sampler S(A, window(5, 3));
  auto s = S.sample(0.2, RngStream(10, 1));
  const Ball region(Point::zero(5), 2);
  const auto I = occupation_field(s, region);
  for (const auto& t : s.trajectories) CHECK(I.contains(t.anchor));
  s.trajectories.clear();
  CHECK(occupation_field(s, region).empty());
}

TEST_CASE("vacancy of the origin matches exp(-u/g(0))") {
  const SiteSet A(5, {Point::zero(5)});
  SamplerOptions o;
  o.paths = false;
  o.method = BackwardMethod::Rejection;
  const Sampler S(A, window(5, 1), o);
  const double u = 1.0;
  const std::size_t n = 10000;
  std::size_t vacant = 0;
  for (std::uint64_t i = 0; i < n; ++i) vacant += S.sample(u, RngStream(11, i)).count() == 0;
  const double p = double(vacant) / n, exact = std::exp(-u / GreenTable::shared(5).g0());
  CHECK(std::abs(p - exact) <= 3 * std::sqrt(exact * (1 - exact) / n));
}

TEST_CASE("sampler: invalid configurations are rejected") {
  const SiteSet A = ball_set(5, 1);
  CHECK_THROWS(Sampler(A, window(5, 0)));
  SamplerOptions o;
  o.paths = false;
  o.method = BackwardMethod::JointRejection;
  CHECK_THROWS(Sampler(A, window(5, 2), o));
  SamplerOptions bad;
  bad.eps_trunc = 0;
  CHECK_THROWS(Sampler(A, window(5, 2), bad));
}
