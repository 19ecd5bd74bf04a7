#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/poisson.hpp>

#include "check_util.hpp"
#include "interlace/checks.hpp"
#include "interlace/graph.hpp"
#include "interlace/parallel.hpp"
#include "interlace/sampler.hpp"
#include "interlace/stats.hpp"

namespace interlace {

using detail::ParamList;

std::vector<CheckReport> check_inequalities(const InequalityParams& p, const CheckContext& ctx) {
  std::vector<CheckReport> out;
  const RngStream base(ctx.seed, 11);
  {
    // P(max_{t <= n} |X(t)| >= lambda) <= n / lambda^2 (Euclidean norm), and
    // per coordinate with n / d in place of n.
    double worst_euclid = -1e300, worst_coord = -1e300;
    std::ostringstream note;
    std::size_t cells = 0;
    for (std::size_t di = 0; di < p.dims.size(); ++di) {
      const int d = p.dims[di];
      for (std::size_t ni = 0; ni < p.steps.size(); ++ni) {
        const std::size_t n = p.steps[ni];
        const RngStream b = base.child(di * 1000 + ni);
        auto maxima = parallel_map(p.walks, ctx.jobs, [&](std::size_t w) {
          RngStream r = b.child(w);
          std::array<std::int64_t, kMaxDim> x{};
          double m2 = 0, m1 = 0;
          for (std::size_t t = 0; t < n; ++t) {
            apply_move(x.data(), std::uint8_t(r.below(std::uint32_t(2 * d))));
            double s = 0;
            for (int k = 0; k < d; ++k) s += double(x[k] * x[k]);
            m2 = std::max(m2, s);
            m1 = std::max(m1, double(std::abs(x[0])));
          }
          return std::pair<double, double>(std::sqrt(m2), m1);
        });
        for (double f : p.lambda_factors) {
          const double lambda = f * std::sqrt(double(n));
          double ce = 0, cc = 0;
          for (auto& [e, c] : maxima) ce += e >= lambda, cc += c >= lambda;
          const double M = double(p.walks);
          const double pe = ce / M, pc = cc / M;
          auto sigma = [&](double q) { return std::sqrt(std::max(q * (1 - q), 1.0 / M) / M); };
          const double be = double(n) / (lambda * lambda), bc = double(n) / d / (lambda * lambda);
          worst_euclid = std::max(worst_euclid, (pe - be) / sigma(pe));
          worst_coord = std::max(worst_coord, (pc - bc) / sigma(pc));
          ++cells;
        }
      }
    }
    for (int k = 0; k < 2; ++k) {
      CheckReport r;
      r.id = k == 0 ? "inequality.kolmogorov_euclidean" : "inequality.kolmogorov_coordinate";
      r.parameters = ParamList().add_list("d", p.dims).add_list("n", p.steps).add_list("lambda/sqrt(n)",
                                                                                         p.lambda_factors)
                         .add("walks", p.walks).str();
      r.statistic = k == 0 ? worst_euclid : worst_coord;
      r.bound = p.slack;
      r.criterion = k == 0 ? "max over the grid of (P(max|X| >= lambda) - n/lambda^2) / sigma <= slack"
                           : "max over the grid of (P(max|X_1| >= lambda) - (n/d)/lambda^2) / sigma <= slack";
      r.pass = r.statistic <= r.bound;
      r.replicas = p.walks * cells;
      r.seed = ctx.seed;
      out.push_back(r);
    }
  }
  {
    // Paley-Zygmund for Poisson variables, with the exact law as oracle.
    double worst_pz = -1e300, worst_oracle = 0;
    bool exact_ok = true;
    std::ostringstream note;
    std::size_t cell = 0;
    for (double mean : p.poisson_means) {
      const RngStream b = base.child(50000 + cell++);
      auto draws = parallel_map(p.poisson_draws, ctx.jobs, [&](std::size_t i) {
        RngStream r = b.child(i);
        std::poisson_distribution<long> pois(mean);
        return double(pois(r));
      });
      const boost::math::poisson_distribution<double> law(mean);
      for (double theta : p.thetas) {
        const double thr = theta * mean;
        double c = 0;
        for (double x : draws) c += x >= thr;
        const double M = double(p.poisson_draws);
        const double ph = c / M;
        const double sigma = std::sqrt(std::max(ph * (1 - ph), 1.0 / M) / M);
        const double lower = (1 - theta) * (1 - theta) * mean * mean / (mean + mean * mean);
        // P(xi >= thr) = 1 - P(xi <= ceil(thr) - 1).
        const double k = std::ceil(thr) - 1;
        const double exact = k < 0 ? 1.0 : boost::math::cdf(complement(law, k));
        worst_pz = std::max(worst_pz, (lower - ph) / sigma);
        worst_oracle = std::max(worst_oracle, std::abs(ph - exact) / sigma);
        exact_ok = exact_ok && exact >= lower;
        note << "mean=" << mean << " theta=" << theta << " P=" << ph << " exact=" << exact << " bound=" << lower
             << "; ";
      }
    }
    const auto params = ParamList().add_list("mean", p.poisson_means).add_list("theta", p.thetas)
                            .add("draws", p.poisson_draws).str();
    {
      CheckReport r;
      r.id = "inequality.paley_zygmund";
      r.parameters = params;
      r.statistic = worst_pz;
      r.bound = p.slack;
      r.criterion = "max over the grid of ((1-theta)^2 (E xi)^2 / E xi^2 - P(xi >= theta E xi)) / sigma <= slack, "
                    "and the exact probability obeys the bound";
      r.note = note.str();
      r.pass = worst_pz <= p.slack && exact_ok;
      r.replicas = p.poisson_draws * p.poisson_means.size();
      r.seed = ctx.seed;
      out.push_back(r);
    }
    {
      CheckReport r;
      r.id = "inequality.poisson_oracle";
      r.parameters = params;
      r.statistic = worst_oracle;
      r.bound = p.slack;
      r.criterion = "|empirical - exact Poisson tail| / sigma <= slack";
      r.pass = worst_oracle <= p.slack;
      r.replicas = p.poisson_draws * p.poisson_means.size();
      r.seed = ctx.seed;
      out.push_back(r);
    }
  }
  return out;
}

std::vector<CheckReport> check_graph(const GraphCheckParams& p, const CheckContext& ctx) {
  const RngStream base(ctx.seed, 12);
  struct Outcome {
    std::size_t mismatched = 0, metric_violations = 0, vertices = 0, edges = 0;
  };
  auto results = parallel_map(p.instances, ctx.jobs, [&](std::size_t i) {
    RngStream r = base.child(i);
    const int d = (i % 2) ? 5 : 3;
    const Ball window(Point::zero(d), 3 + std::int64_t(r.below(3)));
    std::vector<InterlacementSample> samples;
    std::size_t total = 0;
    for (std::uint64_t sid = 0; sid < 2; ++sid) {
      SiteSet A(d);
      const std::size_t na = 1 + r.below(4);
      while (A.size() < na) {
        Point x(d);
        for (int k = 0; k < d; ++k) x[k] = std::int64_t(r.below(3)) - 1;
        A.insert(x);
      }
      SamplerOptions o;
      o.eps_trunc = 1e-2;
      o.method = BackwardMethod::Rejection;
      const Sampler S(A, window, o);
      // Level chosen so that both samples together stay below the cap.
      const double u = double(p.max_trajectories) / (4 * S.capacity());
      for (std::uint64_t attempt = 0;; ++attempt) {
        auto s = S.sample(u, r.child(100 * sid + attempt), sid);
        if (total + s.count() <= p.max_trajectories) {
          total += s.count();
          samples.push_back(std::move(s));
          break;
        }
      }
    }
    Outcome o;
    const auto g = build_graph(samples);
    const auto brute = brute_force_edges(samples);
    o.mismatched = g.edges() == brute ? 0 : 1;
    o.vertices = total;
    o.edges = g.edge_count();
    const auto n = g.vertex_count();
    if (n > 0) {
      std::vector<std::vector<std::int64_t>> dist(n);
      for (std::size_t v = 0; v < n; ++v) dist[v] = bfs_distances(g, IntersectionGraph::Vertex(v));
      RngStream q = r.child(999);
      for (std::size_t k = 0; k < p.metric_queries; ++k) {
        const auto a = q.below(std::uint32_t(n)), b = q.below(std::uint32_t(n)), c = q.below(std::uint32_t(n));
        if (dist[a][a] != 0) ++o.metric_violations;
        if (dist[a][b] != dist[b][a]) ++o.metric_violations;
        if (dist[a][b] >= 0 && dist[b][c] >= 0 && (dist[a][c] < 0 || dist[a][c] > dist[a][b] + dist[b][c]))
          ++o.metric_violations;
        if ((dist[a][b] == 1) != g.has_edge(IntersectionGraph::Vertex(a), IntersectionGraph::Vertex(b)))
          ++o.metric_violations;
      }
    }
    return o;
  });
  Outcome all;
  for (const auto& o : results) {
    all.mismatched += o.mismatched;
    all.metric_violations += o.metric_violations;
    all.vertices += o.vertices;
    all.edges += o.edges;
  }
  std::vector<CheckReport> out;
  const auto params = ParamList().add("instances", p.instances).add("max_trajectories", p.max_trajectories)
                          .add("dims", "3|5").str();
  {
    CheckReport r;
    r.id = "graph.brute_force_edges";
    r.parameters = params;
    r.statistic = double(all.mismatched);
    r.bound = 0;
    r.criterion = "indexed edge set equals pairwise trace intersection on every instance (hard)";
    r.note = "vertices " + std::to_string(all.vertices) + " edges " + std::to_string(all.edges);
    r.pass = all.mismatched == 0;
    r.replicas = p.instances;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  {
    CheckReport r;
    r.id = "graph.metric";
    r.parameters = ParamList(params).add("queries", p.metric_queries).str();
    r.statistic = double(all.metric_violations);
    r.bound = 0;
    r.criterion = "rho(v,v) = 0, symmetry, triangle inequality and rho = 1 iff edge on random triples (hard)";
    r.pass = all.metric_violations == 0;
    r.replicas = p.instances * p.metric_queries;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets. Full is the acceptance configuration; Quick keeps every check
// to seconds for the command-line default.

CapacityCrossParams capacity_cross_params(CheckScale s) {
  CapacityCrossParams p;
  if (s == CheckScale::Quick) {
    p.sets = 6;
    p.max_size = 8;
    p.walkers = 4000;
    p.rel_bias = 3e-2;
  }
  return p;
}

ScalingParams scaling_params(CheckScale s) {
  ScalingParams p;
  if (s == CheckScale::Quick) {
    p.ball_radii = {2, 4, 6};
    p.ball_walkers = 20000;
    p.times = {16, 32, 64};
    p.walks = 2000;
  }
  return p;
}

GfSumParams gf_sum_params(CheckScale s) {
  GfSumParams p;
  if (s == CheckScale::Quick) {
    p.walkers = {1, 2, 4};
    p.lengths = {16, 32, 64};
    p.replicas = 200;
  }
  return p;
}

SamplerLawParams sampler_law_params(CheckScale s) {
  SamplerLawParams p;
  if (s == CheckScale::Quick) {
    p.replicas = 2000;
    p.anchors = 5000;
    p.full_samples = 60;
  }
  return p;
}

ProcessAlgebraParams process_algebra_params(CheckScale s) {
  ProcessAlgebraParams p;
  if (s == CheckScale::Quick) {
    p.replicas = 2000;
    p.split_A_radius = 2;
    p.split_replicas = 500;
    p.vacancy_replicas = 500;
  }
  return p;
}

MuSParams mu_S_params(CheckScale s) {
  MuSParams p;
  if (s == CheckScale::Quick) {
    p.replicas = 20000;
    p.decay_events = 100;
    p.decay_replicas = 2000;
  }
  return p;
}

PairDecayParams pair_decay_params(CheckScale s) {
  PairDecayParams p;
  if (s == CheckScale::Quick) {
    p.separations = {8, 16};
    p.replicas = {400, 300};
  }
  return p;
}

TraceCapacityParams trace_capacity_params(CheckScale s) {
  TraceCapacityParams p;
  if (s == CheckScale::Quick) {
    p.sparse_radii = {8, 16, 32};
    p.sparse_replicas = {8, 6, 4};
    p.saturated_radii = {4, 8};
    p.saturated_replicas = {2, 1};
    p.density = 16;
    p.mc_walkers = 5000;
    // Two radii this small sit well before the cubic regime.
    p.saturated_tol = 0.7;
  }
  return p;
}

LayerCapacityParams layer_capacity_params(CheckScale s) {
  LayerCapacityParams p;
  if (s == CheckScale::Quick) {
    p.u = 4;
    p.radii = {8, 16};
    p.replicas = {2, 2};
    p.first_layer_replicas = {8, 8};
    p.mc_walkers = 5000;
    p.tol = 0.7;
  }
  return p;
}

HittingParams hitting_params(CheckScale s) {
  HittingParams p;
  if (s == CheckScale::Quick) {
    p.radii = {16, 32};
    p.layers = {3, 2};
    p.walks_per_layer = 60;
    // Two radii and a handful of layers leave the slope noise-dominated;
    // the quick run exercises the pipeline and the floor.
    p.trend_tol = 1.5;
    p.schedule_steps = 2;
  }
  return p;
}

ConvolutionParams convolution_params(CheckScale s) {
  ConvolutionParams p;
  if (s == CheckScale::Quick) {
    p.separations = {8, 16};
    p.divergence_radii = {8, 16};
    p.samples = 40000;
    p.validation_samples = 20000;
  }
  return p;
}

InequalityParams inequality_params(CheckScale s) {
  InequalityParams p;
  if (s == CheckScale::Quick) {
    p.steps = {10, 100};
    p.walks = 2000;
    p.poisson_draws = 10000;
  }
  return p;
}

GraphCheckParams graph_check_params(CheckScale s) {
  GraphCheckParams p;
  if (s == CheckScale::Quick) {
    p.instances = 10;
    p.metric_queries = 200;
  }
  return p;
}

}  // namespace interlace
