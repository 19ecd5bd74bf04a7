#include "interlace/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "check_util.hpp"
#include "interlace/capacity.hpp"
#include "interlace/green.hpp"
#include "interlace/parallel.hpp"
#include "interlace/stats.hpp"

namespace interlace {

std::string CheckReport::text() const {
  std::ostringstream os;
  os << (pass ? "PASS " : "FAIL ") << id << "  statistic=" << std::setprecision(6) << statistic
     << " bound=" << bound << " sigma=" << sigma << "  [" << criterion << "]  replicas=" << replicas
     << " seed=" << seed;
  if (!parameters.empty()) os << "  params: " << parameters;
  if (!note.empty()) os << "  note: " << note;
  return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_reports_csv(std::ostream& os, const std::vector<CheckReport>& reports) {
  os << "id,parameters,statistic,bound,sigma,pass,replicas,seed,criterion,note\n";
  os << std::setprecision(10);
  for (const auto& r : reports)
    os << csv_field(r.id) << ',' << csv_field(r.parameters) << ',' << r.statistic << ',' << r.bound << ','
       << r.sigma << ',' << (r.pass ? 1 : 0) << ',' << r.replicas << ',' << r.seed << ',' << csv_field(r.criterion)
       << ',' << csv_field(r.note) << '\n';
}

void write_reports_text(std::ostream& os, const std::vector<CheckReport>& reports) {
  for (const auto& r : reports) os << r.text() << '\n';
}

bool all_pass(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.pass; });
}

namespace detail {

std::string ParamList::str() const { return os_.str(); }

CheckReport slope_report(std::string id, const LinearFit& fit, double target, double tol, std::string params,
                         std::size_t replicas, std::uint64_t seed, std::string what) {
  CheckReport r;
  r.id = std::move(id);
  r.parameters = std::move(params);
  r.statistic = fit.slope;
  r.bound = target;
  r.sigma = fit.slope_se;
  std::ostringstream c;
  c << what << " slope within " << tol << " of " << target;
  r.criterion = c.str();
  r.pass = std::abs(fit.slope - target) <= tol;
  r.replicas = replicas;
  r.seed = seed;
  return r;
}

}  // namespace detail

using detail::ParamList;

std::vector<CheckReport> check_capacity_cross(const CapacityCrossParams& p, const CheckContext& ctx) {
  const RngStream base(ctx.seed, 1);
  struct Job {
    int d;
    SiteSet K;
    std::string kind;
    double exact = -1;  // closed form, when known
  };
  std::vector<Job> jobs;
  for (int i = 0; i < p.sets; ++i) {
    RngStream r = base.child(std::uint64_t(i));
    const int d = p.dims[std::size_t(i) % p.dims.size()];
    const std::size_t n = 1 + r.below(std::uint32_t(p.max_size));
    SiteSet K(d);
    while (K.size() < n) {
      Point x(d);
      for (int k = 0; k < d; ++k) x[k] = std::int64_t(r.below(std::uint32_t(2 * p.spread + 1))) - p.spread;
      K.insert(x);
    }
    jobs.push_back({d, std::move(K), "set" + std::to_string(i), -1});
  }
  for (int d : p.dims) {
    const auto& g = GreenTable::shared(d);
    jobs.push_back({d, SiteSet(d, {Point::zero(d)}), "singleton", 1.0 / g.g0()});
    const Point x = Point::axis(d, 0, p.pair_offset);
    jobs.push_back({d, SiteSet(d, {Point::zero(d), x}), "pair", 2.0 / (g.g0() + g(x))});
  }
  auto reports = parallel_map(jobs.size(), ctx.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    const auto var = capacity_variational(j.K);
    const std::int64_t radius = j.K.max_sup_norm();
    const std::int64_t R_out = std::max<std::int64_t>(
        4 * std::max<std::int64_t>(radius, 1), certified_outer_radius(j.d, radius, 1.05 * var.capacity, p.rel_bias));
    const std::size_t per_site = std::max<std::size_t>(100, p.walkers / j.K.size());
    const auto mc = capacity_mc(j.K, per_site, R_out, base.child(1000 + i));
    CheckReport r;
    r.id = "capacity.cross." + j.kind + ".d" + std::to_string(j.d);
    r.parameters = ParamList().add("d", j.d).add("size", j.K.size()).add("walkers_per_site", per_site)
                       .add("outer_radius", R_out).add("variational", var.capacity).add("mc", mc.capacity).str();
    r.sigma = mc.stderr;
    r.replicas = per_site * j.K.size();
    r.seed = ctx.seed;
    if (j.exact > 0) {
      r.statistic = std::abs(mc.capacity - j.exact);
      r.bound = 3 * mc.stderr + mc.bias_bound;
      r.criterion = "|cap_mc - closed form| <= 3 sigma + certified escape bias";
      r.note = "closed form " + std::to_string(j.exact) + ", variational " + std::to_string(var.capacity);
      r.pass = r.statistic <= r.bound && std::abs(var.capacity - j.exact) <= 1e-6 * j.exact + var.bias_bound;
    } else {
      r.statistic = std::abs(mc.capacity - var.capacity);
      r.bound = 3 * mc.stderr + mc.bias_bound + var.bias_bound;
      r.criterion = "|cap_variational - cap_mc| <= 3 sigma + certified biases";
      r.pass = r.statistic <= r.bound;
    }
    return r;
  });
  return reports;
}

std::vector<CheckReport> check_scaling(const ScalingParams& p, const CheckContext& ctx) {
  std::vector<CheckReport> out;
  const RngStream base(ctx.seed, 2);
  const int d = p.d;
  {
    auto caps = parallel_map(p.ball_radii.size(), ctx.jobs, [&](std::size_t i) {
      const auto R = p.ball_radii[i];
      return capacity_mc_sampled(ball_region(d, R), p.ball_walkers, p.outer_factor * R, base.child(i));
    });
    std::vector<double> x, y, s;
    std::ostringstream note;
    for (std::size_t i = 0; i < caps.size(); ++i) {
      x.push_back(double(p.ball_radii[i]));
      y.push_back(caps[i].capacity);
      s.push_back(caps[i].stderr);
      note << "R=" << p.ball_radii[i] << ":" << caps[i].capacity << " ";
    }
    auto r = detail::slope_report("scaling.capacity_ball", loglog_fit(x, y, s), d - 2.0, p.cap_tol,
                                  ParamList().add("d", d).add("walkers", p.ball_walkers)
                                      .add("outer_factor", p.outer_factor).str(),
                                  p.ball_walkers, ctx.seed, "log cap(B(0,R)) vs log R");
    r.note = note.str();
    out.push_back(r);
  }
  {
    std::vector<double> x, y;
    std::ostringstream note;
    for (auto v : p.green_distances) {
      const auto gv = green(Point::axis(d, 0, v), 0.05);
      x.push_back(double(v));
      y.push_back(gv.value);
      note << "|v|=" << v << ":" << gv.value << "(" << to_string(gv.method) << ") ";
    }
    auto r = detail::slope_report("scaling.green_axis", loglog_fit(x, y), 2.0 - d, p.green_tol,
                                  ParamList().add("d", d).str(), 0, ctx.seed, "log g(v) vs log |v|");
    r.note = note.str();
    out.push_back(r);
  }
  {
    const auto& g = GreenTable::shared(d);
    const std::size_t tmax = *std::max_element(p.times.begin(), p.times.end());
    auto sums = parallel_map(p.walks, ctx.jobs, [&](std::size_t w) {
      RngStream r = base.child(100000 + w);
      std::vector<double> vals(p.times.size(), 0.0);
      std::array<std::int64_t, kMaxDim> x{};
      std::size_t next = 0;
      for (std::size_t t = 1; t <= tmax; ++t) {
        apply_move(x.data(), std::uint8_t(r.below(std::uint32_t(2 * d))));
        while (next < p.times.size() && std::size_t(p.times[next]) == t) vals[next++] = g.at(x.data());
      }
      return vals;
    });
    std::vector<double> x, y, s;
    std::ostringstream note;
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      std::vector<double> col;
      for (const auto& v : sums) col.push_back(v[k]);
      const auto sm = summarize(col);
      x.push_back(double(p.times[k]));
      y.push_back(sm.mean);
      s.push_back(sm.se());
      note << "s=" << p.times[k] << ":" << sm.mean << " ";
    }
    auto r = detail::slope_report("scaling.green_along_walk", loglog_fit(x, y, s), 1.0 - d / 2.0, p.time_tol,
                                  ParamList().add("d", d).add("walks", p.walks).str(), p.walks, ctx.seed,
                                  "log E g(X(s),0) vs log s");
    r.note = note.str();
    out.push_back(r);
  }
  return out;
}

std::vector<CheckReport> check_gf_sum(const GfSumParams& p, const CheckContext& ctx) {
  if (p.d < 5) throw std::invalid_argument("check_gf_sum: needs d >= 5");
  const RngStream base(ctx.seed, 3);
  const int d = p.d;
  const auto& g = GreenTable::shared(d);
  const std::size_t Nmax = *std::max_element(p.walkers.begin(), p.walkers.end());
  // For each length n and replica: diagonal sum per walk and cross sum per
  // ordered pair, from Nmax walks started at the origin.
  struct Cell {
    double diag = 0, cross = 0;
  };
  std::vector<CheckReport> out;
  std::vector<double> diag_mean, cross_mean, cross_se, lens;
  for (std::size_t li = 0; li < p.lengths.size(); ++li) {
    const std::size_t n = p.lengths[li];
    auto cells = parallel_map(p.replicas, ctx.jobs, [&](std::size_t rep) {
      RngStream r = base.child(li * 1000003 + rep);
      std::vector<std::vector<std::array<std::int64_t, kMaxDim>>> mid(Nmax);
      for (std::size_t i = 0; i < Nmax; ++i) {
        std::array<std::int64_t, kMaxDim> x{};
        for (std::size_t t = 1; t <= 2 * n; ++t) {
          apply_move(x.data(), std::uint8_t(r.below(std::uint32_t(2 * d))));
          if (t > n) mid[i].push_back(x);
        }
      }
      auto pair_sum = [&](std::size_t i, std::size_t j) {
        double s = 0;
        std::array<std::int64_t, kMaxDim> v{};
        for (const auto& a : mid[i])
          for (const auto& b : mid[j]) {
            for (int k = 0; k < d; ++k) v[k] = a[k] - b[k];
            s += g.at(v.data());
          }
        return s;
      };
      Cell c;
      for (std::size_t i = 0; i < Nmax; ++i) c.diag += pair_sum(i, i);
      c.diag /= double(Nmax);
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < Nmax; ++i)
        for (std::size_t j = i + 1; j < Nmax; ++j, ++pairs) c.cross += pair_sum(i, j);
      if (pairs) c.cross /= double(pairs);
      return c;
    });
    std::vector<double> dv, cv;
    for (const auto& c : cells) {
      dv.push_back(c.diag);
      cv.push_back(c.cross);
    }
    const auto ds = summarize(dv), cs = summarize(cv);
    lens.push_back(double(n));
    diag_mean.push_back(ds.mean);
    cross_mean.push_back(cs.mean);
    cross_se.push_back(cs.se());
    // Total for each N from the two components: N diag + N(N-1) cross.
    std::ostringstream note;
    for (auto N : p.walkers) note << "N=" << N << ":" << double(N) * ds.mean + double(N * (N - 1)) * cs.mean << " ";
    CheckReport r;
    r.id = "gf_sum.quadratic.n" + std::to_string(n);
    r.parameters = ParamList().add("d", d).add("n", n).add_list("N", p.walkers).add("replicas", p.replicas).str();
    r.statistic = cs.mean;
    r.sigma = cs.se();
    r.bound = 3 * cs.se();
    r.criterion = "per-pair cross term (coefficient of N(N-1)) positive beyond 3 sigma";
    r.pass = cs.mean > r.bound;
    r.replicas = p.replicas;
    r.seed = ctx.seed;
    r.note = note.str();
    out.push_back(r);
  }
  // Diagonal: E sum / n bounded, i.e. slope of the diagonal in n at most 1.
  {
    const auto fit = loglog_fit(lens, diag_mean);
    auto r = detail::slope_report("gf_sum.diagonal", fit, 1.0, p.tol,
                                  ParamList().add("d", d).add("replicas", p.replicas).str(), p.replicas, ctx.seed,
                                  "log diagonal sum vs log n");
    out.push_back(r);
  }
  {
    const auto fit = loglog_fit(lens, cross_mean, cross_se);
    auto r = detail::slope_report("gf_sum.cross_pair", fit, 3.0 - d / 2.0, p.tol,
                                  ParamList().add("d", d).add("replicas", p.replicas).str(), p.replicas, ctx.seed,
                                  "log per-pair cross sum vs log n");
    out.push_back(r);
  }
  return out;
}

}  // namespace interlace
