#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "interlace/lattice.hpp"

namespace interlace {

// One statistic compared against one bound. Everything needed to rerun it
// is in `parameters` and `seed`.
struct CheckReport {
  std::string id;
  std::string parameters;  // "key=value;key=value"
  double statistic = 0;
  double bound = 0;
  double sigma = 0;
  std::string criterion;
  bool pass = false;
  std::size_t replicas = 0;
  std::uint64_t seed = 0;
  std::string note;

  std::string text() const;
};

void write_reports_csv(std::ostream& os, const std::vector<CheckReport>& reports);
void write_reports_text(std::ostream& os, const std::vector<CheckReport>& reports);
bool all_pass(const std::vector<CheckReport>& reports);

struct CheckContext {
  std::uint64_t seed = 20240601;
  unsigned jobs = 1;
};

// ---- potential theory -------------------------------------------------

// Variational vs Monte Carlo capacity on random small sets, and the
// closed forms cap({0}) = 1/g(0), cap({0, x}) = 2 / (g(0) + g(x)).
struct CapacityCrossParams {
  int sets = 20;
  std::size_t max_size = 20;
  std::vector<int> dims{3, 5};
  std::int64_t spread = 3;        // sites uniform in B(0, spread)
  std::size_t walkers = 40000;    // total Monte Carlo walkers per set
  double rel_bias = 1e-2;         // certified outer-radius bias
  std::int64_t pair_offset = 2;   // x = pair_offset e_1
};
std::vector<CheckReport> check_capacity_cross(const CapacityCrossParams& p, const CheckContext& ctx);

// Log-log slopes of cap(B(0, R)), g(v) along an axis and E g(X(s), 0).
struct ScalingParams {
  int d = 5;
  std::vector<std::int64_t> ball_radii{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::size_t ball_walkers = 200000;
  std::int64_t outer_factor = 8;  // escape radius = outer_factor * R
  std::vector<std::int64_t> green_distances{4, 8, 16, 32};
  std::vector<std::int64_t> times{16, 32, 64, 128, 256};
  std::size_t walks = 20000;
  double cap_tol = 0.25, green_tol = 0.15, time_tol = 0.3;
};
std::vector<CheckReport> check_scaling(const ScalingParams& p, const CheckContext& ctx);

// sum_{i,j} sum_{s,t=n+1}^{2n} g(X_i(s), X_j(t)) for N walks from the origin:
// the diagonal part grows linearly in n, the part per ordered pair i != j
// like n^{3 - d/2}.
struct GfSumParams {
  int d = 5;
  std::vector<std::size_t> walkers{1, 2, 4, 8};
  std::vector<std::size_t> lengths{16, 32, 64, 128};
  std::size_t replicas = 200;
  double tol = 0.3;
};
std::vector<CheckReport> check_gf_sum(const GfSumParams& p, const CheckContext& ctx);

// ---- sampler ----------------------------------------------------------

// N_A ~ Poisson(u cap(A)); anchors ~ normalised equilibrium measure (drawn
// by joint rejection, which never uses e_A); no backward step enters A.
struct SamplerLawParams {
  int d = 5;
  std::int64_t A_radius = 1;
  double u = 0.1;
  std::size_t replicas = 10000;
  std::size_t anchors = 100000;
  double anchor_u = 20;           // level of the anchor-law samples
  std::size_t full_samples = 1000;
  double eps_trunc = 1e-3;
  double alpha = 0.01;
};
std::vector<CheckReport> check_sampler_law(const SamplerLawParams& p, const CheckContext& ctx);

// Superposition vs direct level (KS on N_A), independence of the split
// parts, and the vacancy probability of a single site.
struct ProcessAlgebraParams {
  int d = 5;
  std::int64_t A_radius = 1;
  double u1 = 0.05, u2 = 0.07;
  std::size_t replicas = 10000;
  std::int64_t split_A_radius = 3;
  std::int64_t split_r = 1;
  double split_u = 0.01;
  std::size_t split_replicas = 10000;
  std::size_t vacancy_replicas = 10000;
  double vacancy_u = 1.0;
  double eps_trunc = 1e-3;
  double alpha = 0.01;
};
std::vector<CheckReport> check_process_algebra(const ProcessAlgebraParams& p, const CheckContext& ctx);

// E mu(S(x, y)) (trajectories through both x and y) against 2 u g(x - y)
// and the exact value 2 u g / (g(0) (g(0) + g)), plus its decay in |x - y|.
struct MuSParams {
  int d = 5;
  std::int64_t separation = 4;
  double u = 1.0;
  std::size_t replicas = 100000;
  std::vector<std::int64_t> decay_separations{2, 4, 8};
  double decay_events = 400;  // u is scaled so that about this many events occur
  std::size_t decay_replicas = 20000;
  double decay_tol = 0.4;
  double eps_trunc = 1e-3;
};
std::vector<CheckReport> check_mu_S_bound(const MuSParams& p, const CheckContext& ctx);

// Frequency with which a trajectory through x and a different trajectory
// through y intersect (graph distance 1), windows scaled with |x - y|.
struct PairDecayParams {
  int d = 5;
  std::vector<std::int64_t> separations{8, 16, 32, 64};
  double u = 4.0;
  std::vector<std::size_t> replicas{4000, 3000, 2000, 1500};
  std::int64_t window_factor = 2;  // window radius = window_factor * separation
  double eps_trunc = 1e-3;
};
std::vector<CheckReport> check_pair_decay(const PairDecayParams& p, const CheckContext& ctx);

// ---- trace sets and layers --------------------------------------------

struct TraceCapacityParams {
  int d = 5;
  std::vector<std::int64_t> sparse_radii{8, 16, 32, 64};
  std::vector<std::size_t> sparse_replicas{40, 30, 20, 12};
  std::vector<std::int64_t> saturated_radii{4, 8, 16};
  std::vector<std::size_t> saturated_replicas{6, 3, 1};
  std::int64_t density = 64;  // N = density * R^3 walkers started uniformly in B(0, R)
  std::size_t mc_walkers = 50000;
  double sparse_tol = 0.3, saturated_tol = 0.4;
};
std::vector<CheckReport> check_trace_capacity(const TraceCapacityParams& p, const CheckContext& ctx);

// Smallest eps in the grid with r^{d-2} <= eps R for every R.
double choose_layer_eps(int d, std::int64_t r, const std::vector<std::int64_t>& radii,
                        const std::vector<double>& grid);

struct LayerCapacityParams {
  int d = 5;
  double u = 16;
  std::int64_t r = 1;
  std::vector<std::int64_t> radii{8, 16, 32};
  std::vector<std::size_t> replicas{8, 6, 4};
  std::vector<std::size_t> first_layer_replicas{40, 40, 40};
  std::vector<double> eps_grid{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};
  std::size_t mc_walkers = 20000;
  double eps_trunc = 1e-3;
  double tol = 0.4;
};
std::vector<CheckReport> check_layer_capacity(const LayerCapacityParams& p, const CheckContext& ctx);

struct HittingParams {
  int d = 5;
  double u = 4;
  std::int64_t r = 1;
  std::vector<std::int64_t> radii{16, 32, 64};
  std::vector<std::size_t> layers{12, 10, 8};
  std::size_t walks_per_layer = 40;
  double return_bound = 0.01;  // truncation of Z: certified return probability
  double floor = 0.02;
  double trend_tol = 0.15;
  double contrast_slope = -0.2;
  std::vector<double> eps_grid{1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4};
  std::size_t schedule_steps = 3;
  double eps_trunc = 1e-3;
};
std::vector<CheckReport> check_hitting_lemma(const HittingParams& p, const CheckContext& ctx);

// ---- convolution sums -------------------------------------------------

// sum over z_1..z_n in B(0, L) of prod_{i=0}^{n} min(1, |z_i - z_{i+1}|^{2-d}),
// Euclidean |.|, z_{n+1} = z_end.
struct ConvolutionValue {
  double value = 0;
  double stderr = 0;  // 0 for exact sums
  std::string method;
};
// Exact: n = 0 directly, n = 1 by summing over z_1 with the squared norm
// of the last d - 1 coordinates tabulated (z_0 - z_end must lie on an axis
// for that reduction; otherwise plain enumeration), n = 2 by enumeration
// for small boxes only.
ConvolutionValue convolution_exact(int n, const Point& z0, const Point& z_end, std::int64_t L);
// Importance sampling, any n >= 1.
ConvolutionValue convolution_mc(int n, const Point& z0, const Point& z_end, std::int64_t L, std::size_t samples,
                                std::uint64_t seed);
CheckReport check_convolution(int n, const Point& z0, const Point& z_end, std::int64_t L, std::size_t samples,
                              const CheckContext& ctx);

struct ConvolutionParams {
  int d = 5;
  std::vector<std::int64_t> separations{8, 16, 32, 64};
  std::int64_t box_factor = 4;  // L = box_factor * separation for the decay fit
  std::vector<std::int64_t> divergence_radii{8, 16, 32, 64};
  std::int64_t divergence_end = 4;
  std::size_t samples = 400000;
  std::size_t validation_samples = 200000;
  double tol = 0.3;
};
std::vector<CheckReport> check_convolution_suite(const ConvolutionParams& p, const CheckContext& ctx);

// ---- inequalities and graph -------------------------------------------

struct InequalityParams {
  std::vector<int> dims{3, 5};
  std::vector<std::size_t> steps{10, 100, 1000};
  std::vector<double> lambda_factors{0.5, 1.0, 2.0, 3.0};  // lambda = factor sqrt(n)
  std::size_t walks = 20000;
  std::vector<double> poisson_means{0.5, 1.0, 5.0};
  std::vector<double> thetas{0.25, 0.5};
  std::size_t poisson_draws = 100000;
  double slack = 5.0;
};
std::vector<CheckReport> check_inequalities(const InequalityParams& p, const CheckContext& ctx);

struct GraphCheckParams {
  std::size_t instances = 50;
  std::size_t max_trajectories = 20;
  std::size_t metric_queries = 1000;
};
std::vector<CheckReport> check_graph(const GraphCheckParams& p, const CheckContext& ctx);

// ---- suite ------------------------------------------------------------

enum class CheckScale { Quick, Full };
// Parameter sets used by the CLI `checks` command (Quick) and by the
// acceptance run (Full).
CapacityCrossParams capacity_cross_params(CheckScale s);
ScalingParams scaling_params(CheckScale s);
GfSumParams gf_sum_params(CheckScale s);
SamplerLawParams sampler_law_params(CheckScale s);
ProcessAlgebraParams process_algebra_params(CheckScale s);
MuSParams mu_S_params(CheckScale s);
PairDecayParams pair_decay_params(CheckScale s);
TraceCapacityParams trace_capacity_params(CheckScale s);
LayerCapacityParams layer_capacity_params(CheckScale s);
HittingParams hitting_params(CheckScale s);
ConvolutionParams convolution_params(CheckScale s);
InequalityParams inequality_params(CheckScale s);
GraphCheckParams graph_check_params(CheckScale s);

}  // namespace interlace
