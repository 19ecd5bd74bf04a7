#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "interlace/capacity.hpp"
#include "interlace/escape_field.hpp"
#include "interlace/green.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

namespace interlace {

// How the backward half (the walk conditioned never to return to A) is drawn.
//   HTransform: Doob transform with the escape field inside a box around A,
//     continued outside the box by restarting from the box exit point
//     whenever the proposal re-enters A.
//   Rejection: simple walk from the anchor, restarted from the anchor on
//     re-entry to A.
//   JointRejection: anchor uniform on the exposed sites of A, restarted
//     with a fresh anchor on re-entry; the accepted pair has the law
//     (normalised equilibrium measure) x (conditioned walk). Needs no e_A,
//     and so cannot produce anchors-only samples.
//   Auto: JointRejection for sets with many exposed sites when paths are
//     drawn, otherwise HTransform or Rejection by the size of the field box.
enum class BackwardMethod { Auto, HTransform, Rejection, JointRejection };
std::string to_string(BackwardMethod m);

// A set the truncated walk must not return to with probability above
// eps_trunc: the walk stops only once cap_upper * g(dist e_1) < eps_trunc,
// dist being the sup-norm distance to `bound`.
struct Certificate {
  Ball bound;
  double cap_upper = 0;
};

// Upper confidence bound (estimate + 3 sigma, Monte Carlo with a fixed
// internal seed) for cap(B(0, R)), memoised per (d, R).
double ball_capacity_upper(int d, std::int64_t R);

struct SamplerOptions {
  double eps_trunc = 1e-3;
  BackwardMethod method = BackwardMethod::Auto;
  // Balls whose return probability is certified in addition to A itself;
  // defaults to the window when unset.
  std::optional<std::vector<Ball>> certify;
  std::size_t min_forward_steps = 0;
  bool record_traces = true;  // window traces as sorted key vectors
  bool paths = true;          // false: Poisson count and anchors only
  std::int64_t field_margin = 2;
  std::size_t mc_walkers = 20000;  // capacity of large A
  std::uint64_t capacity_seed = 0xCA9ACE5ULL;
};

struct Trajectory {
  Point anchor;
  WalkPath forward;   // from the anchor, t = 0, 1, ...
  WalkPath backward;  // from the anchor, t = 0, -1, -2, ...
  std::vector<SiteKey> trace;  // sites in the window, sorted, unique
  std::int64_t closest_approach = 0;  // min over both halves of |X(t)|
  std::uint64_t sample_id = 0;
  std::uint64_t index = 0;
  std::uint64_t backward_restarts = 0;
};

struct InterlacementSample {
  int d = 0;
  double u = 0;
  SiteSet A;
  Ball window;
  double eps_trunc = 0;
  double cap_A = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t sample_id = 0;
  bool has_paths = true;
  std::vector<Trajectory> trajectories;

  std::size_t count() const { return trajectories.size(); }
};

// Everything about A that does not depend on u or the seed: capacity,
// equilibrium measure, anchor table, escape field and certificates.
class Sampler {
 public:
  Sampler(SiteSet A, Ball window, SamplerOptions opts = {});

  InterlacementSample sample(double u, RngStream rng, std::uint64_t sample_id = 0) const;

  const SiteSet& A() const { return A_; }
  const Ball& window() const { return window_; }
  const SamplerOptions& options() const { return opts_; }
  double capacity() const { return cap_.capacity; }
  const CapacityEstimate& capacity_estimate() const { return cap_; }
  BackwardMethod method() const { return method_; }
  const EscapeField* field() const { return field_.get(); }
  const std::vector<Certificate>& certificates() const { return certs_; }
  // sup-norm radius around the origin a walk must reach before it may stop.
  std::int64_t stop_radius() const { return stop_radius_; }
  // Anchor sites and their normalised equilibrium weights (empty for JointRejection).
  const std::vector<Point>& anchor_sites() const { return anchor_sites_; }
  const std::vector<double>& anchor_weights() const { return anchor_weights_; }

 private:
  Point draw_anchor(RngStream& r) const;
  WalkPath forward_half(const Point& x, RngStream& r, std::int64_t& closest) const;
  WalkPath backward_half(Point& anchor, RngStream& r, std::int64_t& closest, std::uint64_t& restarts,
                         bool redraw_anchor) const;
  void run_until_certified(std::array<std::int64_t, kMaxDim>& x, std::vector<std::uint8_t>& moves,
                           std::size_t min_steps, const SiteSet* avoid, RngStream& r, std::int64_t& closest,
                           bool& hit) const;
  bool certified(const std::int64_t* x) const;

  SiteSet A_;
  Ball window_;
  SamplerOptions opts_;
  int d_;
  CapacityEstimate cap_;
  BackwardMethod method_;
  std::vector<Point> anchor_sites_;
  std::vector<double> anchor_weights_;
  std::vector<double> alias_prob_;
  std::vector<std::uint32_t> alias_idx_;
  std::vector<Point> exposed_;
  std::unique_ptr<EscapeField> field_;
  std::vector<Certificate> certs_;
  std::vector<std::int64_t> cert_dist_;  // required sup-distance per certificate
  std::int64_t stop_radius_ = 0;
};

// One-shot convenience wrapper.
InterlacementSample sample(double u, const SiteSet& A, const Ball& window, double eps_trunc, RngStream rng,
                           SamplerOptions opts = {});

// Concatenation; requires equal A, window and dimension.
InterlacementSample superpose(const InterlacementSample& s1, const InterlacementSample& s2);

// (trajectories meeting B(0, r), the rest).
std::pair<InterlacementSample, InterlacementSample> split_by_ball(const InterlacementSample& s, std::int64_t r);

// Union of the window traces intersected with the region.
SiteSet occupation_field(const InterlacementSample& s, const Ball& region);

// Window trace of one trajectory recomputed from its paths.
std::vector<SiteKey> window_trace(const Trajectory& t, const Ball& window);

// Line-oriented text; fields in a fixed order, moves run-length encoded.
void write_sample(std::ostream& os, const InterlacementSample& s);
InterlacementSample read_sample(std::istream& is);
std::string serialize(const InterlacementSample& s);

}  // namespace interlace
