#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "interlace/capacity.hpp"
#include "interlace/checks.hpp"
#include "interlace/graph.hpp"
#include "interlace/green.hpp"
#include "interlace/parallel.hpp"
#include "interlace/sampler.hpp"
#include "interlace/stats.hpp"

namespace fs = std::filesystem;

namespace interlace::cli {
namespace {

// One summary row: ordered (column, value) pairs.
using Row = std::vector<std::pair<std::string, std::string>>;

template <class T>
std::string fmt(const T& v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parse_scalar(const std::string& field, const std::string& text) {
  std::istringstream is(text);
  T v{};
  is >> v;
  if (!is || !(is >> std::ws).eof()) throw ConfigError(field, "cannot parse '" + text + "'");
  return v;
}

template <class T>
void parse_into(const std::string& field, const std::string& text, T& out) {
  out = parse_scalar<T>(field, text);
}

template <class T>
void parse_into(const std::string& field, const std::string& text, std::vector<T>& out) {
  out.clear();
  for (const auto& part : split(text, text.find('|') != std::string::npos ? '|' : ','))
    out.push_back(parse_scalar<T>(field, part));
}

std::size_t jobs_of(const ExperimentConfig& cfg) { return cfg.jobs ? cfg.jobs : default_jobs(); }

BackwardMethod parse_method(const std::string& m) {
  if (m == "auto") return BackwardMethod::Auto;
  if (m == "htransform") return BackwardMethod::HTransform;
  if (m == "rejection") return BackwardMethod::Rejection;
  if (m == "joint") return BackwardMethod::JointRejection;
  throw ConfigError("method", "expected auto, htransform, rejection or joint, got '" + m + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.d < 3 || c.d > kMaxDim) throw ConfigError("dim", "must lie in [3, " + std::to_string(kMaxDim) + "]");
  if (!(c.u > 0) || !std::isfinite(c.u)) throw ConfigError("u", "must be positive");
  if (c.window < 0) throw ConfigError("window", "must be non-negative");
  if (c.replicas == 0) throw ConfigError("replicas", "must be positive");
  if (!(c.eps_trunc > 0 && c.eps_trunc < 1)) throw ConfigError("eps-trunc", "must lie in (0, 1)");
  if (!(c.rel_bias > 0 && c.rel_bias < 1)) throw ConfigError("rel-bias", "must lie in (0, 1)");
  if (c.walkers < 2) throw ConfigError("walkers", "must be at least 2");
  if (c.r < 1) throw ConfigError("r", "must be at least 1");
  if (c.s_max < 1) throw ConfigError("s-max", "must be at least 1");
  for (auto R : c.radii)
    if (R <= c.r) throw ConfigError("radii", "every R must exceed r");
  if (c.scale != "quick" && c.scale != "full") throw ConfigError("scale", "expected quick or full");
  parse_method(c.method);
}

SiteSet anchor_set(const ExperimentConfig& cfg) {
  SiteSet A(cfg.d);
  for (const auto& c : parse_set_points(cfg)) {
    Point p(cfg.d);
    for (int k = 0; k < cfg.d; ++k) p[k] = c[k];
    A.insert(p);
  }
  return A;
}

Ball window_of(const ExperimentConfig& cfg, const SiteSet& A) {
  const std::int64_t w = cfg.window ? cfg.window : A.max_sup_norm() + 1;
  if (w < A.max_sup_norm()) throw ConfigError("window", "the window must contain the anchor set");
  return Ball(Point::zero(cfg.d), w);
}

// Output directory bookkeeping shared by all subcommands.
class Artifacts {
 public:
  explicit Artifacts(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }
  bool enabled() const { return !dir_.empty(); }
  fs::path path(const std::string& name) const { return fs::path(dir_) / name; }
  std::ofstream open(const std::string& name) const {
    std::ofstream os(path(name));
    if (!os) throw std::runtime_error("cannot write " + path(name).string());
    os << std::setprecision(12);
    return os;
  }

 private:
  std::string dir_;
};

void write_rows_csv(std::ostream& os, const std::vector<Row>& rows) {
  if (rows.empty()) return;
  for (std::size_t i = 0; i < rows[0].size(); ++i) os << (i ? "," : "") << rows[0][i].first;
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i].second;
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns a summary row; artifacts are written when the
// output directory is enabled.

Row run_green(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  const auto& table = GreenTable::shared(cfg.d);
  const char* cache = std::getenv("INTERLACE_CACHE_DIR");
  if (art.enabled()) {
    // A copy of the table next to the results, loadable with GreenTable::load.
    auto os = art.open("green_table.txt");
    table.save(os);
    auto csv = art.open("green_axis.csv");
    csv << "distance,value,error,method\n";
    for (std::int64_t k = 0; k <= cfg.max_radius; ++k) {
      const auto g = table.lookup(Point::axis(cfg.d, 0, k));
      csv << k << "," << g.value << "," << g.error << "," << to_string(g.method) << "\n";
    }
  }
  const auto far = table.lookup(Point::axis(cfg.d, 0, cfg.max_radius));
  out << "green d=" << cfg.d << " g(0)=" << table.g0() << " valid radius " << table.valid_radius()
      << (cache ? std::string(" cache ") + cache : std::string(" (no INTERLACE_CACHE_DIR)")) << "\n";
  return {{"d", fmt(cfg.d)},
          {"g0", fmt(table.g0())},
          {"max_radius", fmt(cfg.max_radius)},
          {"g_max_radius", fmt(far.value)},
          {"g_max_radius_error", fmt(far.error)},
          {"valid_radius", fmt(table.valid_radius())}};
}

Row run_capacity(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  const SiteSet K = anchor_set(cfg);
  const RngStream rng(cfg.seed, 0x100);
  const CapacityEstimate var = capacity_variational(K);
  const std::int64_t R_out = certified_outer_radius(K, K.size(), cfg.rel_bias);
  const std::size_t per_site = std::max<std::size_t>(100, cfg.walkers / K.size());
  const CapacityEstimate mc = capacity_mc(K, per_site, R_out, rng);
  const double diff = std::abs(var.capacity - mc.capacity);
  const double allowed = 3 * mc.stderr + mc.bias_bound + var.bias_bound;
  const bool agree = diff <= allowed;
  const double exact_single = K.size() == 1 ? 1.0 / GreenTable::shared(cfg.d).g0() : NAN;
  if (art.enabled()) {
    auto os = art.open("capacity.csv");
    os << "method,capacity,stderr,bias_bound,outer_radius,walkers,iterations\n";
    for (const auto* e : {&var, &mc})
      os << e->method << "," << e->capacity << "," << e->stderr << "," << e->bias_bound << "," << e->outer_radius
         << "," << e->walkers << "," << e->iterations << "\n";
    auto em = art.open("equilibrium_measure.csv");
    em << "site,weight\n";
    for (std::size_t i = 0; i < var.measure.sites.size(); ++i)
      em << '"' << var.measure.sites[i].str() << "\"," << var.measure.weights[i] << "\n";
  }
  out << "capacity |K|=" << K.size() << " variational " << var.capacity << " monte-carlo " << mc.capacity << " +- "
      << mc.stderr << " -> " << (agree ? "agree" : "DISAGREE") << "\n";
  Row row{{"d", fmt(cfg.d)},
          {"set", cfg.set},
          {"size", fmt(K.size())},
          {"variational", fmt(var.capacity)},
          {"monte_carlo", fmt(mc.capacity)},
          {"mc_stderr", fmt(mc.stderr)},
          {"allowed", fmt(allowed)},
          {"agree", agree ? "1" : "0"},
          {"exact_singleton", fmt(exact_single)}};
  if (!agree)
    throw NumericalFailure("capacity.cross", "|variational - monte-carlo| = " + fmt(diff) + " > " + fmt(allowed));
  return row;
}

std::vector<InterlacementSample> draw_samples(const ExperimentConfig& cfg, const SiteSet& A, const Ball& window,
                                              bool paths) {
  SamplerOptions o;
  o.eps_trunc = cfg.eps_trunc;
  o.method = parse_method(cfg.method);
  o.paths = paths;
  if (!paths && o.method == BackwardMethod::JointRejection) o.paths = true;
  const Sampler S(A, window, o);
  const RngStream base(cfg.seed, 0x200);
  return parallel_map(cfg.replicas, jobs_of(cfg), [&](std::size_t i) { return S.sample(cfg.u, base.child(i), i); });
}

Row run_sample(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  const SiteSet A = anchor_set(cfg);
  const Ball window = window_of(cfg, A);
  const auto samples = draw_samples(cfg, A, window, cfg.write_samples);
  std::vector<double> counts;
  for (const auto& s : samples) counts.push_back(double(s.count()));
  const Summary sm = summarize(counts);
  const double cap = samples.front().cap_A;
  if (art.enabled()) {
    auto os = art.open("counts.csv");
    os << "replica,count\n";
    for (std::size_t i = 0; i < counts.size(); ++i) os << i << "," << counts[i] << "\n";
    if (cfg.write_samples) {
      auto ss = art.open("samples.txt");
      for (const auto& s : samples) write_sample(ss, s);
    }
  }
  out << "sample u=" << cfg.u << " cap(A)=" << cap << " mean N_A " << sm.mean << " +- " << sm.se() << " (expected "
      << cfg.u * cap << ")\n";
  return {{"d", fmt(cfg.d)},          {"u", fmt(cfg.u)},          {"set", cfg.set},
          {"window", fmt(window.radius)}, {"replicas", fmt(cfg.replicas)}, {"cap_A", fmt(cap)},
          {"expected", fmt(cfg.u * cap)}, {"mean_N", fmt(sm.mean)},     {"se_N", fmt(sm.se())},
          {"var_N", fmt(sm.var)}};
}

Row run_graph(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  const SiteSet A = anchor_set(cfg);
  const Ball window = window_of(cfg, A);
  const std::int64_t inner = cfg.inner_radius ? cfg.inner_radius : std::max<std::int64_t>(1, window.radius / 2);
  struct One {
    std::size_t vertices, edges;
    DiameterProbe probe;
    std::vector<DistanceHistogramRow> hist;
  };
  SamplerOptions o;
  o.eps_trunc = cfg.eps_trunc;
  o.method = parse_method(cfg.method);
  const Sampler S(A, window, o);
  const RngStream base(cfg.seed, 0x300);
  auto results = parallel_map(cfg.replicas, jobs_of(cfg), [&](std::size_t i) {
    const auto g = build_graph({S.sample(cfg.u, base.child(i), i)});
    if (i == 0 && art.enabled()) {
      auto os = art.open("edges_replica0.csv");
      write_edge_list(os, g);
    }
    return One{g.vertex_count(), g.edge_count(), window_diameter(g, inner), distance_histogram(g, inner)};
  });
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> hist;
  std::vector<double> diam, edges;
  std::size_t disconnected = 0;
  for (const auto& r : results) {
    for (const auto& h : r.hist) hist[{h.separation_bin, h.rho}] += h.count;
    if (r.probe.diameter >= 0) diam.push_back(double(r.probe.diameter));
    disconnected += !r.probe.connected;
    edges.push_back(double(r.edges));
  }
  std::vector<DistanceHistogramRow> rows;
  for (const auto& [k, c] : hist) rows.push_back({k.first, k.second, c});
  if (art.enabled()) {
    auto os = art.open("distance_histogram.csv");
    write_distance_histogram_csv(os, rows);
    auto rs = art.open("graph_replicas.csv");
    rs << "replica,vertices,edges,diameter,connected,probe_vertices\n";
    for (std::size_t i = 0; i < results.size(); ++i)
      rs << i << "," << results[i].vertices << "," << results[i].edges << "," << results[i].probe.diameter << ","
         << results[i].probe.connected << "," << results[i].probe.vertices << "\n";
  }
  const double max_diam = diam.empty() ? -1 : *std::max_element(diam.begin(), diam.end());
  out << "graph " << cfg.replicas << " replicas, mean edges " << summarize(edges).mean << ", max diameter "
      << max_diam << ", disconnected " << disconnected << "\n";
  return {{"d", fmt(cfg.d)},
          {"u", fmt(cfg.u)},
          {"window", fmt(window.radius)},
          {"inner_radius", fmt(inner)},
          {"mean_edges", fmt(summarize(edges).mean)},
          {"mean_diameter", fmt(diam.empty() ? NAN : summarize(diam).mean)},
          {"max_diameter", fmt(max_diam)},
          {"disconnected", fmt(disconnected)}};
}

Row run_layers(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  struct Cell {
    std::int64_t R;
    std::size_t replica;
    std::vector<std::size_t> sizes, excluded;
    std::vector<CapacityEstimate> caps;
  };
  std::vector<Cell> cells;
  const RngStream base(cfg.seed, 0x400);
  for (std::size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    LayerOptions lo;
    lo.d = cfg.d;
    lo.u = cfg.u;
    lo.r = cfg.r;
    lo.R = cfg.radii[ri];
    lo.s_max = cfg.s_max;
    lo.eps_trunc = cfg.eps_trunc;
    lo.mc_walkers = cfg.mc_walkers;
    auto part = parallel_map(cfg.replicas, jobs_of(cfg), [&](std::size_t i) {
      const RngStream r = base.child(ri).child(i);
      const auto layers = build_layers(lo, r.child(0));
      if (auto err = verify_layers(layers, lo); !err.empty()) throw NumericalFailure("layers.witness", err);
      Cell c{lo.R, i, {}, {}, {}};
      for (std::size_t s = 0; s < layers.size(); ++s) {
        c.sizes.push_back(layers[s].sites.size());
        c.excluded.push_back(layers[s].excluded);
        c.caps.push_back(capacity(layers[s].sites, r.child(1 + s), cfg.mc_walkers));
      }
      return c;
    });
    cells.insert(cells.end(), part.begin(), part.end());
  }
  if (art.enabled()) {
    auto os = art.open("layers.csv");
    os << "R,replica,s,sites,excluded,capacity,stderr,method\n";
    for (const auto& c : cells)
      for (std::size_t s = 0; s < c.caps.size(); ++s)
        os << c.R << "," << c.replica << "," << s + 1 << "," << c.sizes[s] << "," << c.excluded[s] << ","
           << c.caps[s].capacity << "," << c.caps[s].stderr << "," << c.caps[s].method << "\n";
  }
  Row row{{"d", fmt(cfg.d)}, {"u", fmt(cfg.u)}, {"r", fmt(cfg.r)}};
  std::ostringstream table;
  table << "R,s,mean_capacity,se\n";
  for (int s = 1; s <= cfg.s_max; ++s) {
    std::vector<double> xs, ys, es;
    for (auto R : cfg.radii) {
      std::vector<double> v;
      for (const auto& c : cells)
        if (c.R == R && std::size_t(s) <= c.caps.size()) v.push_back(c.caps[s - 1].capacity);
      const Summary sm = summarize(v);
      const double se = v.size() > 1 ? sm.se() : 0.0;
      table << R << "," << s << "," << sm.mean << "," << se << "\n";
      xs.push_back(double(R));
      ys.push_back(sm.mean);
      es.push_back(se > 0 ? se : 1e-9 * sm.mean + 1e-300);
    }
    const double slope = xs.size() >= 2 ? loglog_fit(xs, ys, es).slope : NAN;
    row.push_back({"slope_s" + std::to_string(s), fmt(slope)});
    row.push_back({"cap_s" + std::to_string(s) + "_R" + std::to_string(cfg.radii.back()), fmt(ys.back())});
    out << "layers s=" << s << " capacity slope in R " << slope << "\n";
  }
  if (art.enabled()) art.open("layers_summary.csv") << table.str();
  return row;
}

// ---------------------------------------------------------------------------
// checks

using Setter = std::function<void(const std::string&)>;

template <class T>
void bind(std::map<std::string, Setter>& f, const std::string& check, const char* name, T& field) {
  const std::string key = check + "." + name;
  f[name] = [&field, key](const std::string& v) { parse_into(key, v, field); };
}

struct CheckEntry {
  std::string id;
  std::function<std::vector<CheckReport>(const CheckContext&, CheckScale, const std::map<std::string, std::string>&)>
      run;
  std::function<bool(const std::string&)> has_field;
};

template <class P, class Bind, class Run>
CheckEntry make_entry(std::string id, P (*preset)(CheckScale), Bind binder, Run runner) {
  return {id, [id, preset, binder, runner](const CheckContext& ctx, CheckScale scale,
                                           const std::map<std::string, std::string>& ov) {
            P p = preset(scale);
            std::map<std::string, Setter> fields;
            binder(fields, p);
            for (const auto& [k, v] : ov) {
              auto it = fields.find(k);
              if (it == fields.end()) throw ConfigError("override", "unknown field " + id + "." + k);
              it->second(v);
            }
            return runner(p, ctx);
          },
          [preset, binder](const std::string& key) {
            P p = preset(CheckScale::Quick);
            std::map<std::string, Setter> fields;
            binder(fields, p);
            return fields.count(key) > 0;
          }};
}

#define INTERLACE_BIND(field) bind(f, id, #field, p.field)

std::vector<CheckEntry> check_registry() {
  std::vector<CheckEntry> r;
  {
    const std::string id = "capacity_cross";
    r.push_back(make_entry(id, &capacity_cross_params, [id](auto& f, CapacityCrossParams& p) {
      INTERLACE_BIND(sets); INTERLACE_BIND(max_size); INTERLACE_BIND(dims); INTERLACE_BIND(spread);
      INTERLACE_BIND(walkers); INTERLACE_BIND(rel_bias); INTERLACE_BIND(pair_offset);
    }, &check_capacity_cross));
  }
  {
    const std::string id = "scaling";
    r.push_back(make_entry(id, &scaling_params, [id](auto& f, ScalingParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(ball_radii); INTERLACE_BIND(ball_walkers); INTERLACE_BIND(outer_factor);
      INTERLACE_BIND(green_distances); INTERLACE_BIND(times); INTERLACE_BIND(walks); INTERLACE_BIND(cap_tol);
      INTERLACE_BIND(green_tol); INTERLACE_BIND(time_tol);
    }, &check_scaling));
  }
  {
    const std::string id = "gf_sum";
    r.push_back(make_entry(id, &gf_sum_params, [id](auto& f, GfSumParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(walkers); INTERLACE_BIND(lengths); INTERLACE_BIND(replicas);
      INTERLACE_BIND(tol);
    }, &check_gf_sum));
  }
  {
    const std::string id = "sampler_law";
    r.push_back(make_entry(id, &sampler_law_params, [id](auto& f, SamplerLawParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(A_radius); INTERLACE_BIND(u); INTERLACE_BIND(replicas);
      INTERLACE_BIND(anchors); INTERLACE_BIND(anchor_u); INTERLACE_BIND(full_samples); INTERLACE_BIND(eps_trunc);
      INTERLACE_BIND(alpha);
    }, &check_sampler_law));
  }
  {
    const std::string id = "process_algebra";
    r.push_back(make_entry(id, &process_algebra_params, [id](auto& f, ProcessAlgebraParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(A_radius); INTERLACE_BIND(u1); INTERLACE_BIND(u2);
      INTERLACE_BIND(replicas); INTERLACE_BIND(split_A_radius); INTERLACE_BIND(split_r); INTERLACE_BIND(split_u);
      INTERLACE_BIND(split_replicas); INTERLACE_BIND(vacancy_replicas); INTERLACE_BIND(vacancy_u);
      INTERLACE_BIND(eps_trunc); INTERLACE_BIND(alpha);
    }, &check_process_algebra));
  }
  {
    const std::string id = "mu_S";
    r.push_back(make_entry(id, &mu_S_params, [id](auto& f, MuSParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(separation); INTERLACE_BIND(u); INTERLACE_BIND(replicas);
      INTERLACE_BIND(decay_separations); INTERLACE_BIND(decay_events); INTERLACE_BIND(decay_replicas);
      INTERLACE_BIND(decay_tol); INTERLACE_BIND(eps_trunc);
    }, &check_mu_S_bound));
  }
  {
    const std::string id = "pair_decay";
    r.push_back(make_entry(id, &pair_decay_params, [id](auto& f, PairDecayParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(separations); INTERLACE_BIND(u); INTERLACE_BIND(replicas);
      INTERLACE_BIND(window_factor); INTERLACE_BIND(eps_trunc);
    }, &check_pair_decay));
  }
  {
    const std::string id = "trace_capacity";
    r.push_back(make_entry(id, &trace_capacity_params, [id](auto& f, TraceCapacityParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(sparse_radii); INTERLACE_BIND(sparse_replicas);
      INTERLACE_BIND(saturated_radii); INTERLACE_BIND(saturated_replicas); INTERLACE_BIND(density);
      INTERLACE_BIND(mc_walkers); INTERLACE_BIND(sparse_tol); INTERLACE_BIND(saturated_tol);
    }, &check_trace_capacity));
  }
  {
    const std::string id = "layer_capacity";
    r.push_back(make_entry(id, &layer_capacity_params, [id](auto& f, LayerCapacityParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(u); INTERLACE_BIND(r); INTERLACE_BIND(radii); INTERLACE_BIND(replicas);
      INTERLACE_BIND(first_layer_replicas); INTERLACE_BIND(eps_grid); INTERLACE_BIND(mc_walkers);
      INTERLACE_BIND(eps_trunc); INTERLACE_BIND(tol);
    }, &check_layer_capacity));
  }
  {
    const std::string id = "hitting";
    r.push_back(make_entry(id, &hitting_params, [id](auto& f, HittingParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(u); INTERLACE_BIND(r); INTERLACE_BIND(radii); INTERLACE_BIND(layers);
      INTERLACE_BIND(walks_per_layer); INTERLACE_BIND(return_bound); INTERLACE_BIND(floor);
      INTERLACE_BIND(trend_tol); INTERLACE_BIND(contrast_slope); INTERLACE_BIND(eps_grid);
      INTERLACE_BIND(schedule_steps); INTERLACE_BIND(eps_trunc);
    }, &check_hitting_lemma));
  }
  {
    const std::string id = "convolution";
    r.push_back(make_entry(id, &convolution_params, [id](auto& f, ConvolutionParams& p) {
      INTERLACE_BIND(d); INTERLACE_BIND(separations); INTERLACE_BIND(box_factor);
      INTERLACE_BIND(divergence_radii); INTERLACE_BIND(divergence_end); INTERLACE_BIND(samples);
      INTERLACE_BIND(validation_samples); INTERLACE_BIND(tol);
    }, &check_convolution_suite));
  }
  {
    const std::string id = "inequalities";
    r.push_back(make_entry(id, &inequality_params, [id](auto& f, InequalityParams& p) {
      INTERLACE_BIND(dims); INTERLACE_BIND(steps); INTERLACE_BIND(lambda_factors); INTERLACE_BIND(walks);
      INTERLACE_BIND(poisson_means); INTERLACE_BIND(thetas); INTERLACE_BIND(poisson_draws); INTERLACE_BIND(slack);
    }, &check_inequalities));
  }
  {
    const std::string id = "graph";
    r.push_back(make_entry(id, &graph_check_params, [id](auto& f, GraphCheckParams& p) {
      INTERLACE_BIND(instances); INTERLACE_BIND(max_trajectories); INTERLACE_BIND(metric_queries);
    }, &check_graph));
  }
  return r;
}

#undef INTERLACE_BIND

Row run_checks(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  const auto registry = check_registry();
  std::map<std::string, std::map<std::string, std::string>> ov;
  for (const auto& o : cfg.overrides) {
    const auto eq = o.find('='), dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override", "expected check.field=value, got '" + o + "'");
    const std::string id = o.substr(0, dot), field = o.substr(dot + 1, eq - dot - 1);
    auto e = std::find_if(registry.begin(), registry.end(), [&](const CheckEntry& e) { return e.id == id; });
    if (e == registry.end()) throw ConfigError("override", "unknown check '" + id + "'");
    if (!e->has_field(field)) throw ConfigError("override", "unknown field " + id + "." + field);
    ov[id][field] = o.substr(eq + 1);
  }
  for (const auto& id : cfg.only)
    if (std::none_of(registry.begin(), registry.end(), [&](const CheckEntry& e) { return e.id == id; }))
      throw ConfigError("only", "unknown check '" + id + "'");
  CheckContext ctx;
  ctx.seed = cfg.seed;
  ctx.jobs = jobs_of(cfg);
  const CheckScale scale = cfg.scale == "full" ? CheckScale::Full : CheckScale::Quick;
  std::vector<CheckReport> all;
  for (const auto& e : registry) {
    if (!cfg.only.empty() && std::find(cfg.only.begin(), cfg.only.end(), e.id) == cfg.only.end()) continue;
    auto reports = e.run(ctx, scale, ov.count(e.id) ? ov.at(e.id) : std::map<std::string, std::string>{});
    write_reports_text(out, reports);
    out << std::flush;
    all.insert(all.end(), reports.begin(), reports.end());
  }
  if (art.enabled()) {
    auto csv = art.open("reports.csv");
    write_reports_csv(csv, all);
    auto txt = art.open("reports.txt");
    write_reports_text(txt, all);
  }
  std::size_t failed = 0;
  std::string first_failed;
  for (const auto& r : all)
    if (!r.pass && failed++ == 0) first_failed = r.id;
  Row row{{"scale", cfg.scale}, {"reports", fmt(all.size())}, {"failed", fmt(failed)}};
  if (failed) throw NumericalFailure(first_failed, std::to_string(failed) + " of " + std::to_string(all.size()) +
                                                       " reports failed");
  return row;
}

using Runner = Row (*)(const ExperimentConfig&, const Artifacts&, std::ostream&);

Runner runner_for(const std::string& name) {
  if (name == "green") return &run_green;
  if (name == "capacity") return &run_capacity;
  if (name == "sample") return &run_sample;
  if (name == "graph") return &run_graph;
  if (name == "layers") return &run_layers;
  if (name == "checks") return &run_checks;
  throw ConfigError("over", "unknown subcommand '" + name + "'");
}

Row run_sweep(const ExperimentConfig& cfg, const Artifacts& art, std::ostream& out) {
  const Runner target = runner_for(cfg.over);
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& g : cfg.grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw ConfigError("grid", "expected key=v1,v2,..., got '" + g + "'");
    axes.push_back({g.substr(0, eq), split(g.substr(eq + 1), ',')});
    if (axes.back().second.empty()) throw ConfigError("grid", "no values for " + axes.back().first);
    ExperimentConfig probe = cfg;
    for (const auto& v : axes.back().second) apply_setting(probe, axes.back().first, v);
  }
  std::size_t cells = 1;
  for (const auto& a : axes) cells *= a.second.size();
  std::vector<Row> rows;
  std::size_t failures = 0;
  std::string first_failed;
  for (std::size_t c = 0; c < cells; ++c) {
    // Row-major over the grid: the last axis varies fastest.
    std::vector<std::string> vals(axes.size());
    for (std::size_t k = axes.size(), rest = c; k-- > 0;) {
      vals[k] = axes[k].second[rest % axes[k].second.size()];
      rest /= axes[k].second.size();
    }
    ExperimentConfig cell = cfg;
    Row head{{"cell", fmt(c)}};
    for (std::size_t k = 0; k < axes.size(); ++k) {
      apply_setting(cell, axes[k].first, vals[k]);
      head.push_back({"grid." + axes[k].first, vals[k]});
    }
    validate(cell);
    Row body;
    std::string status = "ok";
    try {
      body = target(cell, Artifacts(""), out);
    } catch (const NumericalFailure& e) {
      status = "fail:" + e.check_id;
      if (failures++ == 0) first_failed = e.check_id;
    }
    head.insert(head.end(), body.begin(), body.end());
    head.push_back({"status", status});
    rows.push_back(std::move(head));
  }
  // Rows from failed cells lack the body columns; pad to the widest header.
  std::size_t widest = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() > rows[widest].size()) widest = i;
  for (auto& r : rows) {
    if (r.size() == rows[widest].size()) continue;
    Row padded;
    for (const auto& [k, v] : rows[widest]) {
      auto it = std::find_if(r.begin(), r.end(), [&, &k = k](const auto& p) { return p.first == k; });
      padded.push_back({k, it == r.end() ? "" : it->second});
    }
    r = std::move(padded);
  }
  if (art.enabled()) {
    auto os = art.open("sweep.csv");
    write_rows_csv(os, rows);
  }
  out << "sweep over " << cfg.over << ": " << cells << " cells, " << failures << " failed\n";
  if (failures) throw NumericalFailure(first_failed, std::to_string(failures) + " sweep cells failed");
  return {{"cells", fmt(cells)}};
}

// Effective configuration as INI: global keys, then the section of the
// subcommand that ran. Empty lists are omitted; they are the defaults.
std::string effective_config(const CLI::App& app, const std::string& sub) {
  std::istringstream in(app.config_to_str(true, false));
  std::ostringstream global, section;
  const std::string prefix = sub + ".";
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line.ends_with("=\"{}\"")) continue;
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (dot == std::string::npos || dot > eq)
      global << line << "\n";
    else if (line.compare(0, prefix.size(), prefix) == 0)
      section << line.substr(prefix.size()) << "\n";
  }
  return global.str() + "\n[" + sub + "]\n" + section.str();
}

void write_common(const ExperimentConfig& cfg, const Artifacts& art, const std::string& effective_config,
                  const std::string& config_file) {
  if (!art.enabled()) return;
  art.open("seed.txt") << cfg.seed << "\n";
  art.open("version.txt") << INTERLACE_VERSION << "\n";
  art.open("config.ini") << effective_config;
  if (!config_file.empty()) {
    std::error_code ec;
    const auto dst = art.path("config.source.ini");
    if (!fs::equivalent(config_file, dst, ec)) fs::copy_file(config_file, dst, fs::copy_options::overwrite_existing);
  }
}

}  // namespace

std::vector<std::vector<std::int64_t>> parse_set_points(const ExperimentConfig& cfg) {
  const auto parts = split(cfg.set, ':');
  const int d = cfg.d;
  std::vector<std::vector<std::int64_t>> pts;
  auto integer = [&](const std::string& s) { return parse_scalar<std::int64_t>("set", s); };
  if (cfg.set == "origin") {
    pts.emplace_back(d, 0);
  } else if (parts.size() == 2 && parts[0] == "ball") {
    const std::int64_t R = integer(parts[1]);
    if (R < 0 || R > 6) throw ConfigError("set", "ball radius must lie in [0, 6]");
    std::vector<std::int64_t> x(d, -R);
    for (;;) {
      pts.push_back(x);
      int k = 0;
      while (k < d && x[k] == R) x[k++] = -R;
      if (k == d) break;
      ++x[k];
    }
  } else if (parts.size() == 2 && parts[0] == "points") {
    for (const auto& p : split(parts[1], ';')) {
      const auto c = split(p, ',');
      if (int(c.size()) != d) throw ConfigError("set", "point '" + p + "' does not have " + std::to_string(d) + " coordinates");
      std::vector<std::int64_t> x;
      for (const auto& s : c) x.push_back(integer(s));
      pts.push_back(x);
    }
  } else if (parts.size() == 3 && parts[0] == "random") {
    const std::int64_t n = integer(parts[1]), spread = integer(parts[2]);
    if (n < 1 || spread < 0) throw ConfigError("set", "random:N:spread needs N >= 1 and spread >= 0");
    RngStream r(cfg.seed, 0x50);
    std::set<std::vector<std::int64_t>> seen;
    const double room = std::pow(double(2 * spread + 1), d);
    if (double(n) > room) throw ConfigError("set", "more random points than sites in the box");
    while (std::int64_t(seen.size()) < n) {
      std::vector<std::int64_t> x(d);
      for (auto& c : x) c = std::int64_t(r.below(std::uint32_t(2 * spread + 1))) - spread;
      if (seen.insert(x).second) pts.push_back(x);
    }
  } else {
    throw ConfigError("set", "expected origin, ball:R, points:x,..;x,.. or random:N:spread, got '" + cfg.set + "'");
  }
  if (pts.empty()) throw ConfigError("set", "empty anchor set");
  return pts;
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  static const std::map<std::string, std::function<void(ExperimentConfig&, const std::string&)>> table{
      {"dim", [](auto& c, auto& v) { parse_into("dim", v, c.d); }},
      {"u", [](auto& c, auto& v) { parse_into("u", v, c.u); }},
      {"window", [](auto& c, auto& v) { parse_into("window", v, c.window); }},
      {"set", [](auto& c, auto& v) { c.set = v; }},
      {"replicas", [](auto& c, auto& v) { parse_into("replicas", v, c.replicas); }},
      {"seed", [](auto& c, auto& v) { parse_into("seed", v, c.seed); }},
      {"max-radius", [](auto& c, auto& v) { parse_into("max-radius", v, c.max_radius); }},
      {"walkers", [](auto& c, auto& v) { parse_into("walkers", v, c.walkers); }},
      {"rel-bias", [](auto& c, auto& v) { parse_into("rel-bias", v, c.rel_bias); }},
      {"eps-trunc", [](auto& c, auto& v) { parse_into("eps-trunc", v, c.eps_trunc); }},
      {"method", [](auto& c, auto& v) { c.method = v; }},
      {"write-samples", [](auto& c, auto& v) { parse_into("write-samples", v, c.write_samples); }},
      {"inner-radius", [](auto& c, auto& v) { parse_into("inner-radius", v, c.inner_radius); }},
      {"radii", [](auto& c, auto& v) { parse_into("radii", v, c.radii); }},
      {"r", [](auto& c, auto& v) { parse_into("r", v, c.r); }},
      {"s-max", [](auto& c, auto& v) { parse_into("s-max", v, c.s_max); }},
      {"mc-walkers", [](auto& c, auto& v) { parse_into("mc-walkers", v, c.mc_walkers); }},
      {"scale", [](auto& c, auto& v) { c.scale = v; }},
  };
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("grid", "unknown key '" + key + "'");
  it->second(c, v);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  CLI::App app{"Random interlacement simulator and numerical checks", "interlace"};
  app.set_version_flag("--version", std::string(INTERLACE_VERSION));
  app.set_config("--config", "", "INI config file; sections per subcommand, command line wins");
  app.allow_config_extras(false);
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--dim", cfg.d, "lattice dimension")->check(CLI::Range(3, int(kMaxDim)));
  app.add_option("--u", cfg.u, "interlacement level")->check(CLI::PositiveNumber);
  app.add_option("--replicas", cfg.replicas, "independent replicas")->check(CLI::PositiveNumber);
  app.add_option("--jobs", cfg.jobs, "worker threads (0: all cores)");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--set", cfg.set, "anchor set: origin | ball:R | points:x,..;x,.. | random:N:spread");
  app.add_option("--window", cfg.window, "observation window radius (0: set radius + 1)");
  app.add_option("--eps-trunc", cfg.eps_trunc, "tail probability allowed per truncated walk");

  auto* green = app.add_subcommand("green", "build or load the Green table and tabulate g along an axis");
  green->add_option("--max-radius", cfg.max_radius, "largest axis distance in green_axis.csv");

  auto* capacity = app.add_subcommand("capacity", "variational and Monte Carlo capacity with cross-check");
  capacity->add_option("--walkers", cfg.walkers, "total Monte Carlo walkers");
  capacity->add_option("--rel-bias", cfg.rel_bias, "certified bias of the escape radius");

  auto* sample = app.add_subcommand("sample", "draw interlacement samples on the anchor set");
  sample->add_option("--method", cfg.method, "backward sampler: auto | htransform | rejection | joint");
  sample->add_option("--write-samples", cfg.write_samples, "write samples.txt with full paths");

  auto* graph = app.add_subcommand("graph", "intersection graph edge lists and distance histograms");
  graph->add_option("--method", cfg.method, "backward sampler: auto | htransform | rejection | joint");
  graph->add_option("--inner-radius", cfg.inner_radius, "diameter probe radius (0: window / 2)");

  auto* layers = app.add_subcommand("layers", "layered trace sets and their capacities");
  layers->add_option("--radii", cfg.radii, "outer radii R")->delimiter(',');
  layers->add_option("--r", cfg.r, "inner radius r");
  layers->add_option("--s-max", cfg.s_max, "number of layers");
  layers->add_option("--mc-walkers", cfg.mc_walkers, "capacity walkers for large layers");

  auto* checks = app.add_subcommand("checks", "run the numerical check suite");
  checks->add_option("--scale", cfg.scale, "quick | full");
  checks->add_option("--only", cfg.only, "run only these check ids")->delimiter(',');
  checks->add_option("--override", cfg.overrides, "check.field=value (repeatable)");

  auto* sweep = app.add_subcommand("sweep", "run a subcommand over a parameter grid, one CSV row per cell");
  sweep->add_option("--over", cfg.over, "subcommand to sweep");
  sweep->add_option("--grid", cfg.grid, "key=v1,v2,... (repeatable; keys as in the config)");
  // Cell-level parameters of every subcommand are reachable from the grid;
  // the fixed ones come from the same options as the subcommands themselves.
  sweep->add_option("--max-radius", cfg.max_radius);
  sweep->add_option("--walkers", cfg.walkers);
  sweep->add_option("--rel-bias", cfg.rel_bias);
  sweep->add_option("--method", cfg.method);
  sweep->add_option("--inner-radius", cfg.inner_radius);
  sweep->add_option("--radii", cfg.radii)->delimiter(',');
  sweep->add_option("--r", cfg.r);
  sweep->add_option("--s-max", cfg.s_max);
  sweep->add_option("--mc-walkers", cfg.mc_walkers);
  sweep->add_option("--scale", cfg.scale);
  sweep->add_option("--write-samples", cfg.write_samples, "sample cells: draw full paths (0: counts only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << INTERLACE_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "invalid config: " << e.what() << "\n";
    return kExitInvalidConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    validate(cfg);
    if (name == "sweep") runner_for(cfg.over);
    const Artifacts art(cfg.out);
    std::string config_file;
    if (auto* c = app.get_config_ptr(); c && c->count() > 0) config_file = c->as<std::string>();
    write_common(cfg, art, effective_config(app, name), config_file);
    Row row;
    if (name == "sweep")
      row = run_sweep(cfg, art, out);
    else
      row = runner_for(name)(cfg, art, out);
    if (art.enabled()) {
      auto os = art.open("summary.csv");
      write_rows_csv(os, {row});
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "invalid config: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: subcommand=" << name << " message=" << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace interlace::cli
