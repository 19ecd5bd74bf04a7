#include "interlace/graph.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace interlace {

std::string VertexLabel::str() const { return std::to_string(sample_id) + ":" + std::to_string(index); }

bool IntersectionGraph::has_edge(Vertex v, Vertex w) const {
  const auto& a = adj_.at(v);
  return std::binary_search(a.begin(), a.end(), w);
}

std::vector<IntersectionGraph::Edge> IntersectionGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edges_);
  for (Vertex v = 0; v < adj_.size(); ++v)
    for (Vertex w : adj_[v])
      if (v < w) out.emplace_back(v, w);
  return out;
}

std::vector<IntersectionGraph::Vertex> IntersectionGraph::visitors(const Point& p) const {
  std::vector<Vertex> out;
  if (p.d != d_) return out;
  const SiteKey k = pack(p);
  auto it = std::lower_bound(index_.begin(), index_.end(), std::make_pair(k, Vertex{0}));
  for (; it != index_.end() && it->first == k; ++it) out.push_back(it->second);
  return out;
}

namespace {

void check_compatible(const std::vector<InterlacementSample>& samples) {
  for (const auto& s : samples) {
    if (s.d != samples.front().d) throw std::invalid_argument("build_graph: samples differ in dimension");
    if (!(s.window.center == samples.front().window.center) || s.window.radius != samples.front().window.radius)
      throw std::invalid_argument("build_graph: samples have different windows");
  }
}

std::vector<SiteKey> trace_of(const InterlacementSample& s, const Trajectory& t) {
  if (t.trace.empty() && s.has_paths) return window_trace(t, s.window);
  return t.trace;
}

}  // namespace

IntersectionGraph build_graph(const std::vector<InterlacementSample>& samples) {
  IntersectionGraph g;
  if (samples.empty()) return g;
  check_compatible(samples);
  g.d_ = samples.front().d;
  using Vertex = IntersectionGraph::Vertex;
  for (const auto& s : samples) {
    for (const auto& t : s.trajectories) {
      const Vertex v = Vertex(g.labels_.size());
      g.labels_.push_back({t.sample_id, t.index});
      g.closest_.push_back(t.closest_approach);
      g.anchors_.push_back(t.anchor);
      for (SiteKey k : trace_of(s, t)) g.index_.emplace_back(k, v);
    }
  }
  std::sort(g.index_.begin(), g.index_.end());
  g.index_.erase(std::unique(g.index_.begin(), g.index_.end()), g.index_.end());

  std::vector<std::pair<Vertex, Vertex>> pairs;
  for (std::size_t i = 0; i < g.index_.size();) {
    std::size_t j = i;
    while (j < g.index_.size() && g.index_[j].first == g.index_[i].first) ++j;
    ++g.site_count_;
    g.max_visitors_ = std::max(g.max_visitors_, j - i);
    for (std::size_t a = i; a < j; ++a)
      for (std::size_t b = a + 1; b < j; ++b) pairs.emplace_back(g.index_[a].second, g.index_[b].second);
    i = j;
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  g.adj_.assign(g.labels_.size(), {});
  for (auto [v, w] : pairs) {
    g.adj_[v].push_back(w);
    g.adj_[w].push_back(v);
  }
  for (auto& a : g.adj_) std::sort(a.begin(), a.end());
  g.edges_ = pairs.size();
  return g;
}

std::vector<IntersectionGraph::Edge> brute_force_edges(const std::vector<InterlacementSample>& samples) {
  std::vector<std::vector<SiteKey>> traces;
  if (!samples.empty()) check_compatible(samples);
  for (const auto& s : samples)
    for (const auto& t : s.trajectories) traces.push_back(trace_of(s, t));
  std::vector<IntersectionGraph::Edge> out;
  for (std::size_t v = 0; v < traces.size(); ++v)
    for (std::size_t w = v + 1; w < traces.size(); ++w) {
      bool meet = false;
      for (SiteKey a : traces[v]) {
        for (SiteKey b : traces[w])
          if (a == b) {
            meet = true;
            break;
          }
        if (meet) break;
      }
      if (meet) out.emplace_back(IntersectionGraph::Vertex(v), IntersectionGraph::Vertex(w));
    }
  return out;
}

std::vector<std::int64_t> bfs_distances(const IntersectionGraph& g, IntersectionGraph::Vertex v) {
  if (v >= g.vertex_count()) throw std::out_of_range("bfs_distances: unknown vertex");
  std::vector<std::int64_t> dist(g.vertex_count(), -1);
  std::deque<IntersectionGraph::Vertex> q{v};
  dist[v] = 0;
  while (!q.empty()) {
    const auto a = q.front();
    q.pop_front();
    for (auto b : g.neighbors(a))
      if (dist[b] < 0) {
        dist[b] = dist[a] + 1;
        q.push_back(b);
      }
  }
  return dist;
}

std::optional<std::int64_t> graph_distance(const IntersectionGraph& g, IntersectionGraph::Vertex v,
                                           IntersectionGraph::Vertex w) {
  if (w >= g.vertex_count()) throw std::out_of_range("graph_distance: unknown vertex");
  const auto dist = bfs_distances(g, v);
  if (dist[w] < 0) return std::nullopt;
  return dist[w];
}

namespace {

std::vector<IntersectionGraph::Vertex> inner_vertices(const IntersectionGraph& g, std::int64_t inner_radius) {
  std::vector<IntersectionGraph::Vertex> out;
  for (IntersectionGraph::Vertex v = 0; v < g.vertex_count(); ++v)
    if (g.closest_approach(v) <= inner_radius) out.push_back(v);
  return out;
}

std::int64_t dyadic_bin(std::int64_t x) {
  if (x <= 0) return 0;
  std::int64_t b = 1;
  while (2 * b <= x) b *= 2;
  return b;
}

}  // namespace

DiameterProbe window_diameter(const IntersectionGraph& g, std::int64_t inner_radius) {
  DiameterProbe p;
  const auto inner = inner_vertices(g, inner_radius);
  p.vertices = inner.size();
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const auto dist = bfs_distances(g, inner[i]);
    for (std::size_t j = i + 1; j < inner.size(); ++j) {
      ++p.pairs;
      if (dist[inner[j]] < 0)
        p.connected = false;
      else
        p.diameter = std::max(p.diameter, dist[inner[j]]);
    }
  }
  return p;
}

std::vector<DistanceHistogramRow> distance_histogram(const IntersectionGraph& g, std::int64_t inner_radius) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> counts;
  const auto inner = inner_vertices(g, inner_radius);
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const auto dist = bfs_distances(g, inner[i]);
    for (std::size_t j = i + 1; j < inner.size(); ++j) {
      const auto sep = dyadic_bin(sup_norm(g.anchor(inner[i]) - g.anchor(inner[j])));
      ++counts[{sep, dist[inner[j]]}];
    }
  }
  std::vector<DistanceHistogramRow> rows;
  for (auto [k, c] : counts) rows.push_back({k.first, k.second, c});
  return rows;
}

void write_edge_list(std::ostream& os, const IntersectionGraph& g) {
  os << "a,b\n";
  for (auto [v, w] : g.edges()) os << g.label(v).str() << "," << g.label(w).str() << "\n";
}

void write_site_summary(std::ostream& os, const IntersectionGraph& g) {
  os << "vertices," << g.vertex_count() << "\n"
     << "edges," << g.edge_count() << "\n"
     << "indexed_sites," << g.indexed_sites() << "\n"
     << "max_visitors," << g.max_visitors() << "\n";
}

void write_distance_histogram_csv(std::ostream& os, const std::vector<DistanceHistogramRow>& rows) {
  os << "separation_bin,rho,count\n";
  for (const auto& r : rows) os << r.separation_bin << "," << r.rho << "," << r.count << "\n";
}

void add_phi(SiteSet& out, const Point& start, const std::vector<std::uint8_t>& moves, std::int64_t R) {
  if (R < 1) throw std::invalid_argument("phi: R must be at least 1");
  const std::size_t n = std::size_t(phi_length(R));
  if (moves.size() < n) throw std::length_error("phi: path shorter than floor(R^2/2)");
  std::array<std::int64_t, kMaxDim> x = start.x;
  const int d = start.d;
  for (std::size_t t = 0; t < n; ++t) {
    apply_move(x.data(), moves[t]);
    bool inside = true;
    for (int i = 0; i < d && inside; ++i) inside = std::abs(x[i] - start.x[i]) <= R;
    if (inside) out.insert_key(pack(x.data(), d));
  }
}

SiteSet phi_set(const std::vector<WalkPath>& paths, std::int64_t R) {
  if (paths.empty()) throw std::invalid_argument("phi_set: no paths");
  SiteSet out(paths.front().start.d);
  for (const auto& p : paths) add_phi(out, p.start, p.moves, R);
  return out;
}

std::optional<std::uint32_t> TraceSet::witness_of(SiteKey key) const {
  auto it = std::lower_bound(witness.begin(), witness.end(), std::make_pair(key, std::uint32_t{0}));
  if (it == witness.end() || it->first != key) return std::nullopt;
  return it->second;
}

std::optional<TracePiece> first_entry_piece(const Trajectory& t, const SiteSet& A, std::size_t length) {
  const int d = t.anchor.d;
  // Backward points b_0 = anchor, b_j after j backward moves; time runs
  // b_k, ..., b_1, b_0, f_1, ... so the earliest visit is the largest j.
  const auto& bm = t.backward.moves;
  std::array<std::int64_t, kMaxDim> x = t.anchor.x;
  std::optional<std::size_t> entry;
  if (A.contains(x.data())) entry = 0;
  for (std::size_t j = 0; j < bm.size(); ++j) {
    apply_move(x.data(), bm[j]);
    if (A.contains(x.data())) entry = j + 1;
  }
  TracePiece piece;
  piece.label = {t.sample_id, t.index};
  std::size_t f_from = 0;
  if (entry) {
    piece.start = t.anchor;
    for (std::size_t j = 0; j < *entry; ++j) apply_move(piece.start.x.data(), bm[j]);
    for (std::size_t j = *entry; j > 0 && piece.moves.size() < length; --j)
      piece.moves.push_back(std::uint8_t(bm[j - 1] ^ 1));
  } else {
    x = t.anchor.x;
    std::size_t i = 0;
    for (; i < t.forward.moves.size(); ++i) {
      apply_move(x.data(), t.forward.moves[i]);
      if (A.contains(x.data())) break;
    }
    if (i == t.forward.moves.size()) return std::nullopt;
    piece.start = Point(d);
    piece.start.x = x;
    f_from = i + 1;
  }
  for (std::size_t i = f_from; i < t.forward.moves.size() && piece.moves.size() < length; ++i)
    piece.moves.push_back(t.forward.moves[i]);
  if (piece.moves.size() < length) throw std::length_error("psi_set: trajectory too short after its entry into A");
  return piece;
}

TraceSet psi_set(const InterlacementSample& s, const SiteSet& A, std::int64_t R, std::int64_t skip_closer_than) {
  if (!s.has_paths) throw std::invalid_argument("psi_set: sample has no paths");
  if (A.dim() != s.d) throw std::invalid_argument("psi_set: dimension mismatch");
  TraceSet out;
  out.sites = SiteSet(s.d);
  const std::size_t n = std::size_t(phi_length(R));
  for (const auto& t : s.trajectories) {
    if (skip_closer_than >= 0 && t.closest_approach <= skip_closer_than) continue;
    auto piece = first_entry_piece(t, A, n);
    if (!piece) continue;
    ++out.meeting;
    const auto id = std::uint32_t(out.pieces.size());
    SiteSet local(s.d);
    add_phi(local, piece->start, piece->moves, R);
    local.for_each_key([&](SiteKey k) {
      if (out.sites.insert_key(k)) out.witness.emplace_back(k, id);
    });
    out.pieces.push_back(std::move(*piece));
  }
  std::sort(out.witness.begin(), out.witness.end());
  return out;
}

std::vector<LayerSet> build_layers(const LayerOptions& o, RngStream rng) {
  require_dimension(o.d);
  if (o.r < 0 || o.r >= o.R) throw std::invalid_argument("build_layers: need 0 <= r < R");
  if (o.s_max < 1) throw std::invalid_argument("build_layers: s_max must be at least 1");
  const Point x = o.start.value_or(Point::zero(o.d));
  if (x.d != o.d || sup_norm(x) > o.R) throw std::invalid_argument("build_layers: start must lie in B(R)");
  const std::size_t n = std::size_t(phi_length(o.R));

  std::vector<LayerSet> layers;
  {
    RngStream ry = rng.child(0);
    auto exit = walk_until(x, StopRule::exit(Ball(Point::zero(o.d), o.R)), ry);
    auto tail = walk_until(exit.path.end(), StopRule::length(n), ry);
    LayerSet L;
    L.s = 1;
    L.r = o.r;
    L.R = o.R;
    L.u = o.u;
    L.sample_ids = {0};
    L.sites = SiteSet(o.d);
    add_phi(L.sites, tail.path.start, tail.path.moves, o.R);
    L.trace.pieces.push_back({tail.path.start, tail.path.moves, {0, 0}});
    L.sites.for_each_key([&](SiteKey k) { L.trace.witness.emplace_back(k, 0); });
    std::sort(L.trace.witness.begin(), L.trace.witness.end());
    L.trace.meeting = 1;
    layers.push_back(std::move(L));
  }
  for (int s = 2; s <= o.s_max; ++s) {
    const SiteSet& prev = layers.back().sites;
    LayerSet L;
    L.s = s;
    L.r = o.r;
    L.R = o.R;
    L.u = o.u;
    L.sample_ids = {std::uint64_t(s)};
    if (prev.empty()) {
      L.sites = SiteSet(o.d);
      layers.push_back(std::move(L));
      continue;
    }
    SamplerOptions so;
    so.eps_trunc = o.eps_trunc;
    so.certify = std::vector<Ball>{Ball(Point::zero(o.d), o.r)};
    so.min_forward_steps = n;
    so.record_traces = false;
    so.mc_walkers = o.mc_walkers;
    so.capacity_seed = rng.child(1000 + std::uint64_t(s))();
    Sampler sampler(prev, Ball(Point::zero(o.d), std::max(prev.max_sup_norm(), o.r) + 1), so);
    L.source_capacity = sampler.capacity();
    const auto sample = sampler.sample(o.u, rng.child(s), std::uint64_t(s));
    L.trace = psi_set(sample, prev, o.R, o.r);
    L.excluded = sample.count() - L.trace.meeting;
    L.sites = std::move(L.trace.sites);
    L.trace.sites = SiteSet(o.d);
    layers.push_back(std::move(L));
  }
  return layers;
}

std::string verify_layers(const std::vector<LayerSet>& layers, const LayerOptions& o) {
  std::ostringstream why;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& L = layers[li];
    const int s = L.s;
    if (s != int(li) + 1) return "layer index out of order";
    const std::int64_t bound = (s + 1) * o.R + 1;
    if (!L.sites.empty() && L.sites.max_sup_norm() > bound) {
      why << "layer " << s << " leaves B(" << bound << ")";
      return why.str();
    }
    if (L.trace.witness.size() != L.sites.size()) {
      why << "layer " << s << ": " << L.sites.size() << " sites but " << L.trace.witness.size() << " witnesses";
      return why.str();
    }
    // Union of Phi over the pieces must reproduce the layer exactly.
    std::vector<SiteSet> phis;
    SiteSet uni(o.d);
    for (const auto& p : L.trace.pieces) {
      SiteSet one(o.d);
      add_phi(one, p.start, p.moves, o.R);
      one.for_each_key([&](SiteKey k) { uni.insert_key(k); });
      phis.push_back(std::move(one));
      if (s == 1) {
        if (sup_norm(p.start) != o.R + 1) return "layer 1 piece does not start at the exit from B(R)";
      } else if (!layers[li - 1].sites.contains(p.start)) {
        why << "layer " << s << " piece " << p.label.str() << " starts outside A^(" << s - 1 << ")";
        return why.str();
      } else if (!layers[li - 1].trace.witness_of(pack(p.start))) {
        why << "layer " << s << " piece " << p.label.str() << " has a broken chain";
        return why.str();
      }
    }
    if (!(uni == L.sites)) {
      why << "layer " << s << " differs from the union of its pieces' Phi sets";
      return why.str();
    }
    for (auto [k, id] : L.trace.witness) {
      if (id >= phis.size() || !phis[id].contains_key(k) || !L.sites.contains_key(k)) {
        why << "layer " << s << " site " << unpack(k, o.d).str() << " has an invalid witness";
        return why.str();
      }
    }
  }
  return {};
}

}  // namespace interlace
