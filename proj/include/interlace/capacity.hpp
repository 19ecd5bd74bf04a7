#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "interlace/green.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

namespace interlace {

// e_K(x) = P_x(X(t) not in K for all t >= 1) on the listed sites; zero elsewhere.
struct EquilibriumMeasure {
  int d = 0;
  std::vector<Point> sites;
  std::vector<double> weights;
  std::vector<double> stderrs;  // zero for the variational method

  double total() const;
  double total_stderr() const;
  std::vector<double> normalized() const;
  double weight(const Point& x) const;
};

struct CapacityEstimate {
  double capacity = 0;
  double stderr = 0;
  EquilibriumMeasure measure;  // empty for sampled estimates
  std::string method;          // "variational" or "monte-carlo"
  // Monte Carlo only: bound on the upward bias from walkers that leave the
  // outer ball and return to K later, cap^2 * g((R_out + 1 - |K|) e_1).
  double bias_bound = 0;
  std::int64_t outer_radius = 0;
  std::size_t walkers = 0;
  int iterations = 0;
};

// Entry (i, j) = g(sites[j] - sites[i]).
Eigen::MatrixXd green_matrix(const std::vector<Point>& sites, const GreenTable& table);
// Rows ordered as K.points(). Throws on empty K or on Green values less
// accurate than target_rel_err; the worst relative error is reported.
Eigen::MatrixXd green_matrix(const SiteSet& K, double target_rel_err = 1e-2, double* worst_rel_err = nullptr);

// Entry tolerance used by capacity_variational(K). Entries of G are
// positive, so relative entry errors below delta move cap by at most delta;
// the value is reported as bias_bound.
inline constexpr double kVariationalGreenTolerance = 0.05;

// Minimises nu^T G nu over probability vectors nu (active-set, started from
// the uniform measure); cap = 1 / min energy. G must be ordered as K.points().
CapacityEstimate capacity_variational(const SiteSet& K, const Eigen::MatrixXd& G);
// Same, solved on the exposed sites of K only (interior sites carry no
// equilibrium mass).
CapacityEstimate capacity_variational(const SiteSet& K);

// Escape fraction of n walkers per site, counted as escaped on leaving
// B(0, outer_radius) before returning to K. Requires K inside B(0, R_out/4).
CapacityEstimate capacity_mc(const SiteSet& K, std::size_t walkers_per_site, std::int64_t outer_radius,
                             RngStream rng);

// A set known through membership and uniform sampling of its exposed sites.
struct Region {
  int d = 0;
  std::int64_t radius = 0;  // the set lies in B(0, radius)
  double exposed_count = 0;
  std::function<bool(const std::int64_t*)> contains;
  std::function<Point(RngStream&)> sample_exposed;
};
Region ball_region(int d, std::int64_t R);
Region set_region(const SiteSet& K);  // copies K
Region set_region(std::shared_ptr<const SiteSet> K);

// cap = |exposed| * mean escape indicator from uniformly sampled exposed
// sites. Escape means leaving B(0, outer_radius) before returning.
CapacityEstimate capacity_mc_sampled(const Region& region, std::size_t walkers, std::int64_t outer_radius,
                                     RngStream rng);

// Outer radius beyond which a walker returns to K with probability below
// rel_bias, using cap(K) <= |exposed| / g(0).
std::int64_t certified_outer_radius(const SiteSet& K, std::size_t exposed_count, double rel_bias = 1e-3);
// Same, for a set inside B(0, radius) with a known capacity bound.
std::int64_t certified_outer_radius(int d, std::int64_t radius, double cap_upper, double rel_bias);

// Two-stage sampled estimate: a pilot run with a short outer radius is
// biased upwards, so pilot + 3 sigma bounds cap; that bound certifies the
// outer radius of the main run at relative bias rel_bias.
CapacityEstimate capacity_mc_certified(const Region& region, std::size_t walkers, RngStream rng,
                                       double rel_bias = 1e-3);

// Variational on the exposed sites when there are at most exposed_limit of
// them, capacity_mc_certified otherwise.
inline constexpr std::size_t kExposedVariationalLimit = 3000;
CapacityEstimate capacity(const SiteSet& K, RngStream rng, std::size_t mc_walkers = 20000,
                          std::size_t exposed_limit = kExposedVariationalLimit);

struct HittingValue {
  double value = 0;  // clamped to [0, 1]
  double raw = 0;
  double error = 0;      // propagated from Green and equilibrium errors
  bool warning = false;  // raw exceeded 1 by more than error
};

// P_x(H(K) < infinity) = sum_y g(x, y) e_K(y).
HittingValue hitting_prob(const Point& x, const SiteSet& K, const EquilibriumMeasure& e, const GreenTable& g);

}  // namespace interlace
