#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "check_util.hpp"
#include "interlace/capacity.hpp"
#include "interlace/checks.hpp"
#include "interlace/graph.hpp"
#include "interlace/green.hpp"
#include "interlace/parallel.hpp"
#include "interlace/stats.hpp"

namespace interlace {

using detail::ParamList;

namespace {

Point uniform_in_ball(int d, std::int64_t R, RngStream& r) {
  Point x(d);
  for (int k = 0; k < d; ++k) x[k] = std::int64_t(r.below(std::uint32_t(2 * R + 1))) - R;
  return x;
}

// Capacity with its one-sigma error and systematic bound.
struct CapValue {
  double cap = 0, se = 0, bias = 0;
  std::size_t size = 0;
};

CapValue measure(const SiteSet& K, RngStream r, std::size_t walkers) {
  const auto c = capacity(K, r, walkers);
  return {c.capacity, c.stderr, c.bias_bound, K.size()};
}

struct RadiusMean {
  double mean = 0, se = 0;
};

RadiusMean mean_of(const std::vector<CapValue>& v) {
  std::vector<double> x;
  double inner = 0;
  for (const auto& c : v) x.push_back(c.cap), inner += c.se * c.se;
  const auto s = summarize(x);
  // Replica scatter already contains the estimator noise; with a single
  // replica fall back to the estimator error.
  const double se = v.size() > 1 ? s.se() : std::sqrt(inner);
  return {s.mean, se};
}

}  // namespace

std::vector<CheckReport> check_trace_capacity(const TraceCapacityParams& p, const CheckContext& ctx) {
  if (p.sparse_radii.size() != p.sparse_replicas.size() || p.saturated_radii.size() != p.saturated_replicas.size())
    throw std::invalid_argument("check_trace_capacity: one replica count per radius");
  std::vector<CheckReport> out;
  const RngStream base(ctx.seed, 8);
  const int d = p.d;
  const double g0 = GreenTable::shared(d).g0();
  double worst_ratio = 0;  // max over replicas of lower confidence cap / cardinality bound
  std::size_t total_sets = 0;

  auto one_regime = [&](const std::vector<std::int64_t>& radii, const std::vector<std::size_t>& reps, bool saturated,
                        std::uint64_t stream) {
    std::vector<double> xs, ys, ss;
    std::ostringstream note;
    for (std::size_t k = 0; k < radii.size(); ++k) {
      const std::int64_t R = radii[k];
      const std::size_t N = saturated ? std::size_t(p.density * R * R * R) : 1;
      const RngStream b = base.child(stream).child(k);
      // Saturated sets are large; keep them sequential to bound memory.
      const unsigned jobs = saturated ? 1u : ctx.jobs;
      auto caps = parallel_map(reps[k], jobs, [&](std::size_t i) {
        RngStream r = b.child(i);
        SiteSet phi(d);
        for (std::size_t w = 0; w < N; ++w) {
          RngStream rw = r.child(w);
          const Point x = saturated ? uniform_in_ball(d, R, rw) : Point::zero(d);
          const auto path = walk_until(x, StopRule::length(std::size_t(phi_length(R))), rw).path;
          add_phi(phi, path.start, path.moves, R);
        }
        return measure(phi, r.child(N), p.mc_walkers);
      });
      for (const auto& c : caps) {
        const double card = double(N) * double(phi_length(R)) / g0;
        worst_ratio = std::max(worst_ratio, (c.cap - 3 * c.se - c.bias) / card);
        if (double(c.size) > double(N) * double(phi_length(R))) worst_ratio = std::max(worst_ratio, 2.0);
        ++total_sets;
      }
      const auto m = mean_of(caps);
      xs.push_back(double(R));
      ys.push_back(m.mean);
      ss.push_back(m.se);
      note << "R=" << R << " N=" << N << " E cap=" << m.mean << "+-" << m.se << " ";
    }
    return std::make_pair(loglog_fit(xs, ys, ss), note.str());
  };

  {
    auto [fit, note] = one_regime(p.sparse_radii, p.sparse_replicas, false, 0);
    auto r = detail::slope_report("trace_capacity.sparse", fit, 2.0, p.sparse_tol,
                                  ParamList().add("d", d).add("N", 1).add_list("R", p.sparse_radii)
                                      .add_list("replicas", p.sparse_replicas).str(),
                                  0, ctx.seed, "log E cap(Phi) vs log R, one walk");
    for (auto n : p.sparse_replicas) r.replicas += n;
    r.note = note;
    out.push_back(r);
  }
  {
    auto [fit, note] = one_regime(p.saturated_radii, p.saturated_replicas, true, 1);
    auto r = detail::slope_report("trace_capacity.saturated", fit, d - 2.0, p.saturated_tol,
                                  ParamList().add("d", d).add("N", std::to_string(p.density) + "R^3")
                                      .add_list("R", p.saturated_radii).add_list("replicas", p.saturated_replicas)
                                      .str(),
                                  0, ctx.seed, "log E cap(Phi) vs log R, N = density R^3 walks from B(R)");
    for (auto n : p.saturated_replicas) r.replicas += n;
    r.note = note;
    out.push_back(r);
  }
  {
    CheckReport r;
    r.id = "trace_capacity.cardinality_bound";
    r.parameters = ParamList().add("d", d).str();
    r.statistic = worst_ratio;
    r.bound = 1;
    r.criterion = "|Phi| <= N floor(R^2/2) and cap(Phi) <= N floor(R^2/2) / g(0) for every set (hard; cap at its "
                  "lower confidence limit)";
    r.pass = worst_ratio <= 1;
    r.replicas = total_sets;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  return out;
}

double choose_layer_eps(int d, std::int64_t r, const std::vector<std::int64_t>& radii,
                        const std::vector<double>& grid) {
  if (radii.empty()) throw std::invalid_argument("choose_layer_eps: no radii");
  const double rd = std::pow(double(r), d - 2.0);
  const double Rmin = double(*std::min_element(radii.begin(), radii.end()));
  std::vector<double> g = grid;
  std::sort(g.begin(), g.end());
  for (double e : g)
    if (rd <= e * Rmin) return e;
  throw std::invalid_argument("choose_layer_eps: no eps in the grid satisfies r^{d-2} <= eps R");
}

std::vector<CheckReport> check_layer_capacity(const LayerCapacityParams& p, const CheckContext& ctx) {
  if (p.radii.size() != p.replicas.size() || p.radii.size() != p.first_layer_replicas.size())
    throw std::invalid_argument("check_layer_capacity: one replica count per radius");
  std::vector<CheckReport> out;
  const RngStream base(ctx.seed, 9);
  const int d = p.d;
  const double eps = choose_layer_eps(d, p.r, p.radii, p.eps_grid);
  std::vector<double> xs, y1, s1, y2, s2;
  std::ostringstream n1, n2, hard;
  std::size_t failures = 0, built = 0, reps1 = 0, reps2 = 0;
  for (std::size_t k = 0; k < p.radii.size(); ++k) {
    const std::int64_t R = p.radii[k];
    LayerOptions o;
    o.d = d;
    o.u = p.u;
    o.r = p.r;
    o.R = R;
    o.eps_trunc = p.eps_trunc;
    o.mc_walkers = p.mc_walkers;
    // First layer alone: cheap, so more replicas.
    o.s_max = 1;
    const RngStream b1 = base.child(k).child(0);
    auto c1 = parallel_map(p.first_layer_replicas[k], ctx.jobs, [&](std::size_t i) {
      const auto L = build_layers(o, b1.child(i));
      return measure(L[0].sites, b1.child(i).child(999), p.mc_walkers);
    });
    reps1 += c1.size();
    // Two layers; sequential, the second layer can hold millions of sites.
    o.s_max = 2;
    const RngStream b2 = base.child(k).child(1);
    std::vector<CapValue> c2;
    for (std::size_t i = 0; i < p.replicas[k]; ++i) {
      const auto L = build_layers(o, b2.child(i));
      const auto why = verify_layers(L, o);
      ++built;
      if (!why.empty()) {
        ++failures;
        hard << "R=" << R << " replica " << i << ": " << why << "; ";
      }
      c2.push_back(measure(L[1].sites, b2.child(i).child(999), p.mc_walkers));
    }
    reps2 += c2.size();
    const auto m1 = mean_of(c1), m2 = mean_of(c2);
    xs.push_back(double(R));
    y1.push_back(m1.mean);
    s1.push_back(m1.se);
    y2.push_back(m2.mean);
    s2.push_back(m2.se);
    n1 << "R=" << R << ":" << m1.mean << "+-" << m1.se << " ";
    n2 << "R=" << R << ":" << m2.mean << "+-" << m2.se << " ";
  }
  const auto params = ParamList().add("d", d).add("u", p.u).add("r", p.r).add("eps", eps).add_list("R", p.radii)
                          .str();
  for (int s = 1; s <= 2; ++s) {
    const double target = std::min(d - 2.0, 2.0 * s);
    auto r = detail::slope_report("layers.capacity_s" + std::to_string(s),
                                  loglog_fit(xs, s == 1 ? y1 : y2, s == 1 ? s1 : s2), target, p.tol, params,
                                  s == 1 ? reps1 : reps2, ctx.seed, "log E cap(A^(s)) vs log R");
    r.note = (s == 1 ? n1 : n2).str();
    out.push_back(r);
  }
  {
    CheckReport r;
    r.id = "layers.witness_chains";
    r.parameters = params;
    r.statistic = double(failures);
    r.bound = 0;
    r.criterion = "every site of every layer has a verified witness chain (hard)";
    r.note = hard.str();
    r.pass = failures == 0 && built > 0;
    r.replicas = built;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  {
    CheckReport r;
    r.id = "layers.precondition";
    r.parameters = params;
    r.statistic = std::pow(double(p.r), d - 2.0);
    r.bound = eps * double(*std::min_element(p.radii.begin(), p.radii.end()));
    r.criterion = "r^{d-2} <= eps R for the smallest eps in the grid (eps reported)";
    r.pass = r.statistic <= r.bound;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  return out;
}

namespace {

// Walk from z until it hits K, leaves B(0, exit_radius) or reaches sup-norm
// trunc_radius (treated as a miss). True on a hit.
bool hits_before(const Point& z, const SiteSet& K, std::int64_t exit_radius, std::int64_t trunc_radius,
                 RngStream& r) {
  const int d = z.d;
  const std::int64_t stop = std::min(exit_radius + 1, trunc_radius);
  std::array<std::int64_t, kMaxDim> x = z.x;
  if (K.contains(x.data())) return true;
  const auto two_d = std::uint32_t(2 * d);
  const std::int64_t far = K.max_sup_norm();
  for (;;) {
    const auto k = std::uint8_t(r.below(two_d));
    apply_move(x.data(), k);
    const std::int64_t a = std::abs(x[k >> 1]);
    if (a >= stop) return false;
    if (a <= far && K.contains(x.data())) return true;
  }
}

}  // namespace

std::vector<CheckReport> check_hitting_lemma(const HittingParams& p, const CheckContext& ctx) {
  if (p.d != 5) throw std::invalid_argument("check_hitting_lemma: only d = 5 is supported");
  if (p.radii.size() != p.layers.size()) throw std::invalid_argument("check_hitting_lemma: one layer count per radius");
  std::vector<CheckReport> out;
  const RngStream base(ctx.seed, 10);
  const int d = p.d;
  const auto& g = GreenTable::shared(d);
  const double eps = choose_layer_eps(d, p.r, p.radii, p.eps_grid);
  std::vector<double> xs, hit, hit_se, con, con_se;
  std::ostringstream note, cnote;
  std::size_t walks = 0, trivial_fail = 0;
  std::vector<int> gammas;
  for (std::size_t k = 0; k < p.radii.size(); ++k) {
    const std::int64_t R = p.radii[k];
    LayerOptions o;
    o.d = d;
    o.u = p.u;
    o.r = p.r;
    o.R = R;
    o.s_max = 2;
    o.eps_trunc = p.eps_trunc;
    std::vector<double> frac, contrast;
    std::int64_t trunc_used = 0;
    for (std::size_t i = 0; i < p.layers[k]; ++i) {
      const RngStream b = base.child(k).child(i);
      auto L = build_layers(o, b.child(0));
      const SiteSet& A2 = L[1].sites;
      if (A2.empty()) {
        frac.push_back(0);
      } else {
        // Z is stopped once a return to A^(2) has probability below
        // return_bound, so the estimate is low by at most that much.
        const double cap_ub = double(exposed_keys(A2).size()) / g.g0();
        const std::int64_t trunc = certified_outer_radius(d, A2.max_sup_norm(), cap_ub, p.return_bound);
        trunc_used = std::max(trunc_used, trunc);
        const RngStream zb = b.child(1);
        auto h = parallel_map(p.walks_per_layer, ctx.jobs, [&](std::size_t w) {
          RngStream r = zb.child(w);
          const Point z = uniform_in_ball(d, R, r);
          return hits_before(z, A2, R * R, trunc, r) ? 1.0 : 0.0;
        });
        frac.push_back(summarize(h).mean);
        if (i == 0 && !h.empty()) gammas.push_back(int(h[0]));
        walks += h.size();
        // Started inside the set, the hitting time is 0.
        RngStream r0 = b.child(2);
        const Point inside = unpack(A2.sorted_keys().front(), d);
        if (!hits_before(inside, A2, R * R, trunc, r0)) ++trivial_fail;
      }
      // Contrast: A^(1) alone, exact hitting formula averaged over z.
      const SiteSet& A1 = L[0].sites;
      const auto e = capacity_variational(A1);
      RngStream zc = b.child(3);
      double acc = 0;
      const std::size_t nz = 64;
      for (std::size_t j = 0; j < nz; ++j) acc += hitting_prob(uniform_in_ball(d, R, zc), A1, e.measure, g).value;
      contrast.push_back(acc / double(nz));
      L.clear();
    }
    const auto h = summarize(frac), c = summarize(contrast);
    xs.push_back(double(R));
    hit.push_back(h.mean);
    // Identical layer fractions give se = 0; fall back to the binomial resolution.
    hit_se.push_back(std::max(h.se(), 0.5 / double(p.layers[k] * p.walks_per_layer)));
    con.push_back(c.mean);
    con_se.push_back(c.se() > 0 ? c.se() : 1e-3 * c.mean);
    note << "R=" << R << ":" << h.mean << "+-" << h.se() << "(truncation radius " << trunc_used << ") ";
    cnote << "R=" << R << ":" << c.mean << "+-" << c.se() << " ";
  }
  const auto params = ParamList().add("d", d).add("u", p.u).add("r", p.r).add("eps", eps).add_list("R", p.radii)
                          .add_list("layers", p.layers).add("walks_per_layer", p.walks_per_layer)
                          .add("return_bound", p.return_bound).str();
  {
    // Desk-scale schedule: R_k runs through the dyadic radii above with r
    // fixed, in place of the true recursion r_k = d R_{k-1}^2; gamma_k is
    // the first walk of the first layer replica at scale k.
    std::ostringstream sched;
    sched << "schedule (R_k = radii[k], r_k = " << p.r << ", capped):";
    for (std::size_t k = 0; k < std::min(p.schedule_steps, gammas.size()); ++k) sched << " gamma_" << k << "=" << gammas[k];
    const double lowest = *std::min_element(hit.begin(), hit.end());
    // A zero estimate has no logarithm; it is below the floor anyway.
    const auto fit = lowest > 0 ? loglog_fit(xs, hit, hit_se) : LinearFit{-INFINITY, 0, 0, 0, xs.size()};
    CheckReport r;
    r.id = "hitting.layer_sd";
    r.parameters = params;
    r.statistic = fit.slope;
    r.sigma = fit.slope_se;
    r.bound = -p.trend_tol;
    r.criterion = "P(hit A^(2) before leaving B(R^2)) >= floor at every R and fitted log-log slope >= -trend_tol";
    std::ostringstream n;
    n << note.str() << " min=" << lowest << " floor=" << p.floor << " |slope|<=" << p.trend_tol << ":"
      << (std::abs(fit.slope) <= p.trend_tol ? "yes" : "no") << "; " << sched.str();
    r.note = n.str();
    r.pass = lowest >= p.floor && fit.slope >= -p.trend_tol;
    r.replicas = walks;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  {
    const auto fit = loglog_fit(xs, con, con_se);
    CheckReport r;
    r.id = "hitting.single_layer_contrast";
    r.parameters = params;
    r.statistic = fit.slope;
    r.sigma = fit.slope_se;
    r.bound = p.contrast_slope;
    r.criterion = "mean hitting probability of A^(1) (hitting formula) has log-log slope < contrast_slope";
    r.note = cnote.str();
    r.pass = fit.slope < p.contrast_slope;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  {
    CheckReport r;
    r.id = "hitting.start_inside";
    r.parameters = params;
    r.statistic = double(trivial_fail);
    r.bound = 0;
    r.criterion = "a walk started in A^(2) hits it at time 0";
    r.pass = trivial_fail == 0;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  return out;
}

}  // namespace interlace
