#include "doctest.h"

#include <algorithm>

#include "interlace/graph.hpp"
#include "interlace/sampler.hpp"

using namespace interlace;

namespace {

// Hand-built sample: one trajectory per trace.
InterlacementSample manual(int d, const std::vector<std::vector<Point>>& traces) {
  InterlacementSample s;
  s.d = d;
  s.A = SiteSet(d, {Point::zero(d)});
  s.window = Ball(Point::zero(d), 10);
  s.has_paths = false;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Trajectory t;
    t.anchor = traces[i].front();
    t.index = i;
    for (const auto& p : traces[i]) t.trace.push_back(pack(p));
    std::sort(t.trace.begin(), t.trace.end());
    t.trace.erase(std::unique(t.trace.begin(), t.trace.end()), t.trace.end());
    s.trajectories.push_back(std::move(t));
  }
  return s;
}

Point P(std::int64_t a, std::int64_t b, std::int64_t c) { return Point{a, b, c}; }

}  // namespace

TEST_CASE("graph: single trajectory and a shared site") {
  auto g1 = build_graph({manual(3, {{P(0, 0, 0), P(1, 0, 0)}})});
  CHECK(g1.vertex_count() == 1);
  CHECK(g1.edge_count() == 0);
  auto g2 = build_graph({manual(3, {{P(0, 0, 0), P(1, 0, 0)}, {P(1, 0, 0), P(2, 0, 0)}, {P(5, 5, 5)}})});
  CHECK(g2.vertex_count() == 3);
  CHECK(g2.edge_count() == 1);
  CHECK(g2.has_edge(0, 1));
  CHECK_FALSE(g2.has_edge(0, 2));
  CHECK(g2.visitors(P(1, 0, 0)).size() == 2);
  CHECK(graph_distance(g2, 0, 1) == 1);
  CHECK_FALSE(graph_distance(g2, 0, 2).has_value());
}

TEST_CASE("graph: chain distances") {
  // 0 - 1 - 2 - 3 through consecutive shared sites.
  auto g = build_graph({manual(3, {{P(0, 0, 0), P(1, 0, 0)},
                                   {P(1, 0, 0), P(2, 0, 0)},
                                   {P(2, 0, 0), P(3, 0, 0)},
                                   {P(3, 0, 0), P(4, 0, 0)}})});
  const auto dist = bfs_distances(g, 0);
  CHECK(dist == std::vector<std::int64_t>{0, 1, 2, 3});
}

TEST_CASE("graph: indexed edges equal brute force on random samples") {
  for (std::uint64_t i = 0; i < 50; ++i) {
    const int d = i % 2 ? 5 : 3;
    const SiteSet A(d, {Point::zero(d), Point::axis(d, 0, 1)});
    SamplerOptions o;
    o.eps_trunc = 1e-2;
    const Sampler S(A, Ball(Point::zero(d), 3), o);
    const double u = 5.0 / S.capacity();
    std::vector<InterlacementSample> ss;
    for (std::uint64_t k = 0;; ++k) {
      auto s = S.sample(u, RngStream(100 + i, k), 0);
      if (s.count() <= 20) {
        ss.push_back(std::move(s));
        break;
      }
    }
    const auto g = build_graph(ss);
    CHECK(g.edges() == brute_force_edges(ss));
    // Metric properties on every triple.
    const auto n = g.vertex_count();
    std::vector<std::vector<std::int64_t>> D;
    for (std::size_t v = 0; v < n; ++v) D.push_back(bfs_distances(g, IntersectionGraph::Vertex(v)));
    for (std::size_t a = 0; a < n; ++a) {
      CHECK(D[a][a] == 0);
      for (std::size_t b = 0; b < n; ++b) {
        CHECK(D[a][b] == D[b][a]);
        for (std::size_t c = 0; c < n; ++c)
          if (D[a][b] >= 0 && D[b][c] >= 0) CHECK((D[a][c] >= 0 && D[a][c] <= D[a][b] + D[b][c]));
      }
    }
  }
}

TEST_CASE("graph: samples must share A and window") {
  auto a = manual(3, {{P(0, 0, 0)}});
  auto b = a;
  b.window = Ball(Point::zero(3), 11);
  CHECK_THROWS(build_graph({a, b}));
}

TEST_CASE("phi: size bound and ball clipping") {
  RngStream r(1, 1);
  for (std::int64_t R : {1, 2, 5, 9}) {
    std::vector<WalkPath> paths;
    for (int i = 0; i < 4; ++i) {
      Point start(5);
      start[0] = 3 * i;
      paths.push_back(walk_until(start, StopRule::length(std::size_t(phi_length(R))), r).path);
    }
    const auto F = phi_set(paths, R);
    CHECK(F.size() <= paths.size() * std::size_t(phi_length(R)));
    for (const auto& p : F.points()) {
      bool inside = false;
      for (const auto& w : paths) inside = inside || Ball(w.start, R).contains(p);
      CHECK(inside);
    }
    if (R == 1) CHECK(F.empty());  // floor(1/2) = 0 steps
  }
  std::vector<std::uint8_t> short_moves(3, 0);
  SiteSet out(5);
  CHECK_THROWS_AS(add_phi(out, Point::zero(5), short_moves, 4), std::length_error);
}

TEST_CASE("psi: empty without meetings and clipped to pieces") {
  const int d = 5;
  const SiteSet A(d, {Point::zero(d)});
  const Sampler S(A, Ball(Point::zero(d), 12));
  const std::int64_t R = 4;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto s = S.sample(2.0, RngStream(2, i));
    const auto none = psi_set(s, SiteSet(d), R);
    CHECK(none.sites.empty());
    const auto T = psi_set(s, A, R);
    CHECK(T.meeting == s.count());
    for (const auto& p : T.sites.points()) {
      bool inside = false;
      for (const auto& piece : T.pieces) inside = inside || Ball(piece.start, R).contains(p);
      CHECK(inside);
      REQUIRE(T.witness_of(pack(p)).has_value());
    }
    for (const auto& piece : T.pieces) CHECK(A.contains(piece.start));
  }
}

TEST_CASE("layers: containment and witness chains") {
  LayerOptions lo;
  lo.d = 5;
  lo.u = 2;
  lo.r = 1;
  lo.R = 6;
  lo.s_max = 2;
  for (std::uint64_t i = 0; i < 3; ++i) {
    const auto layers = build_layers(lo, RngStream(3, i));
    REQUIRE(layers.size() == 2);
    CHECK(verify_layers(layers, lo).empty());
    // A^(1) lies in B(Y(0), R).
    REQUIRE(layers[0].trace.pieces.size() == 1);
    for (const auto& p : layers[0].sites.points()) CHECK(Ball(layers[0].trace.pieces[0].start, lo.R).contains(p));
    for (std::size_t s = 0; s < layers.size(); ++s)
      CHECK(layers[s].sites.max_sup_norm() <= std::int64_t(s + 2) * lo.R + 1);
    CHECK(layers[1].source_capacity > 0);
  }
}
