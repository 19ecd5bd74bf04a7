#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"
#include "interlace/sampler.hpp"

namespace interlace {

struct VertexLabel {
  std::uint64_t sample_id = 0;
  std::uint64_t index = 0;
  bool operator==(const VertexLabel&) const = default;
  std::string str() const;
};

// Vertices are trajectories; v ~ w iff v != w and their window traces share a site.
class IntersectionGraph {
 public:
  using Vertex = std::uint32_t;
  using Edge = std::pair<Vertex, Vertex>;  // first < second

  std::size_t vertex_count() const { return labels_.size(); }
  std::size_t edge_count() const { return edges_; }
  const VertexLabel& label(Vertex v) const { return labels_.at(v); }
  std::int64_t closest_approach(Vertex v) const { return closest_.at(v); }
  const Point& anchor(Vertex v) const { return anchors_.at(v); }
  const std::vector<Vertex>& neighbors(Vertex v) const { return adj_.at(v); }
  bool has_edge(Vertex v, Vertex w) const;
  // Sorted, deduplicated.
  std::vector<Edge> edges() const;
  // Trajectories whose trace contains p.
  std::vector<Vertex> visitors(const Point& p) const;
  std::size_t indexed_sites() const { return site_count_; }
  std::size_t max_visitors() const { return max_visitors_; }
  int dim() const { return d_; }

 private:
  friend IntersectionGraph build_graph(const std::vector<InterlacementSample>& samples);
  int d_ = 0;
  std::vector<VertexLabel> labels_;
  std::vector<std::int64_t> closest_;
  std::vector<Point> anchors_;
  std::vector<std::vector<Vertex>> adj_;
  std::vector<std::pair<SiteKey, Vertex>> index_;  // sorted by site, then vertex
  std::size_t edges_ = 0;
  std::size_t site_count_ = 0;
  std::size_t max_visitors_ = 0;
};

// One vertex per trajectory, in sample order. Traces missing from samples
// that carry paths are recomputed from the paths.
IntersectionGraph build_graph(const std::vector<InterlacementSample>& samples);

// Pairwise sorted-trace intersection, O(N^2 L); the reference for build_graph.
std::vector<IntersectionGraph::Edge> brute_force_edges(const std::vector<InterlacementSample>& samples);

// BFS distances from v; -1 for unreachable vertices.
std::vector<std::int64_t> bfs_distances(const IntersectionGraph& g, IntersectionGraph::Vertex v);
// Shortest-path length; nullopt when unreachable. Throws on unknown vertices.
std::optional<std::int64_t> graph_distance(const IntersectionGraph& g, IntersectionGraph::Vertex v,
                                           IntersectionGraph::Vertex w);

// Max of rho over pairs of trajectories that both come within sup-distance
// inner_radius of the origin (usually window/4).
struct DiameterProbe {
  std::int64_t diameter = -1;  // -1 when fewer than two vertices qualify
  bool connected = true;       // all qualifying pairs reachable
  std::size_t vertices = 0;
  std::size_t pairs = 0;
};
DiameterProbe window_diameter(const IntersectionGraph& g, std::int64_t inner_radius);

// Counts of rho per dyadic bin of the anchor separation, over qualifying pairs.
struct DistanceHistogramRow {
  std::int64_t separation_bin = 0;  // lower edge: 0, 1, 2, 4, 8, ...
  std::int64_t rho = 0;             // -1: unreachable
  std::size_t count = 0;
};
std::vector<DistanceHistogramRow> distance_histogram(const IntersectionGraph& g, std::int64_t inner_radius);

// CSV with header a,b; vertices as sample:index labels.
void write_edge_list(std::ostream& os, const IntersectionGraph& g);
void write_site_summary(std::ostream& os, const IntersectionGraph& g);
void write_distance_histogram_csv(std::ostream& os, const std::vector<DistanceHistogramRow>& rows);

// A walk segment started at its time-0 point; the raw material of trace sets.
struct TracePiece {
  Point start;
  std::vector<std::uint8_t> moves;
  VertexLabel label;
};

inline std::int64_t phi_length(std::int64_t R) { return R * R / 2; }

// Sites X(t), 1 <= t <= floor(R^2/2), within B(X(0), R). Throws
// std::length_error if the path is shorter than floor(R^2/2).
void add_phi(SiteSet& out, const Point& start, const std::vector<std::uint8_t>& moves, std::int64_t R);
SiteSet phi_set(const std::vector<WalkPath>& paths, std::int64_t R);

// Psi: phi applied to the trajectories of s that meet A, each re-parametrised
// so that time 0 is its first entry into A. Pieces and, for every site, the
// index of the first piece producing it are kept.
struct TraceSet {
  SiteSet sites;
  std::vector<TracePiece> pieces;
  std::vector<std::pair<SiteKey, std::uint32_t>> witness;  // sorted by site
  std::size_t meeting = 0;  // trajectories that met A

  std::optional<std::uint32_t> witness_of(SiteKey key) const;
};
// Requires paths. When skip_closer_than >= 0, trajectories whose closest
// approach to the origin is at most that value are ignored (the mu_{r,inf} part).
TraceSet psi_set(const InterlacementSample& s, const SiteSet& A, std::int64_t R,
                 std::int64_t skip_closer_than = -1);

// Piece of `t` of the given length, started at its first visit to A.
std::optional<TracePiece> first_entry_piece(const Trajectory& t, const SiteSet& A, std::size_t length);

struct LayerOptions {
  int d = 5;
  double u = 1.0;
  std::int64_t r = 1;
  std::int64_t R = 16;
  int s_max = 2;
  std::optional<Point> start;  // x in B(R); the origin by default
  double eps_trunc = 1e-3;
  std::size_t mc_walkers = 20000;
};

struct LayerSet {
  int s = 0;
  SiteSet sites;
  std::int64_t r = 0;
  std::int64_t R = 0;
  double u = 0;
  std::vector<std::uint64_t> sample_ids;
  TraceSet trace;  // pieces and witnesses; trace.sites is empty, see `sites`
  std::size_t excluded = 0;  // trajectories dropped for meeting B(r)
  double source_capacity = 0;  // cap(A^(s-1)) used by the sampler (s >= 2)
};

// A^(1) = Phi(Y, R) with Y the walk from x after its exit from B(R);
// A^(s) = Psi(mu^(s)_{r,inf}, A^(s-1), R) with an independent sample per layer.
std::vector<LayerSet> build_layers(const LayerOptions& opts, RngStream rng);

// Hard check: every site of every layer has a witness piece that visits it
// within the Phi window; for s >= 2 the piece starts in the previous layer,
// whose own witness continues the chain. Also checks A^(s) = union of Phi of
// its pieces and A^(s) inside B((s+1)R + 1). Returns an empty string on success.
std::string verify_layers(const std::vector<LayerSet>& layers, const LayerOptions& opts);

}  // namespace interlace
