#include "interlace/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace interlace {

double EquilibriumMeasure::total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

double EquilibriumMeasure::total_stderr() const {
  double v = 0;
  for (double s : stderrs) v += s * s;
  return std::sqrt(v);
}

std::vector<double> EquilibriumMeasure::normalized() const {
  const double t = total();
  std::vector<double> out(weights.size(), 0.0);
  if (t > 0)
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = weights[i] / t;
  return out;
}

double EquilibriumMeasure::weight(const Point& x) const {
  auto it = std::lower_bound(sites.begin(), sites.end(), x);
  return (it != sites.end() && *it == x) ? weights[it - sites.begin()] : 0.0;
}

Eigen::MatrixXd green_matrix(const std::vector<Point>& sites, const GreenTable& table) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd G(n, n);
  const int d = table.dim();
  std::array<std::int64_t, kMaxDim> v{};
  for (Eigen::Index i = 0; i < n; ++i) {
    G(i, i) = table.g0();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (int k = 0; k < d; ++k) v[k] = sites[j].x[k] - sites[i].x[k];
      G(i, j) = G(j, i) = table.at(v.data());
    }
  }
  return G;
}

Eigen::MatrixXd green_matrix(const SiteSet& K, double target_rel_err, double* worst_rel_err) {
  if (K.empty()) throw std::invalid_argument("green_matrix: empty set");
  const auto& table = GreenTable::shared(K.dim());
  const auto pts = K.points();
  double worst = 0;
  std::array<std::int64_t, kMaxDim> v{};
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i; j < pts.size(); ++j) {
      for (int k = 0; k < K.dim(); ++k) v[k] = pts[j].x[k] - pts[i].x[k];
      const auto g = table.lookup(v.data());
      worst = std::max(worst, g.error / g.value);
    }
  if (worst > target_rel_err)
    throw std::runtime_error("green_matrix: achievable relative error " + std::to_string(worst) +
                             " exceeds target " + std::to_string(target_rel_err));
  if (worst_rel_err) *worst_rel_err = worst;
  return green_matrix(pts, table);
}

namespace {

// Solves G_SS x = 1 for the support S. Returns false if G_SS is not PD.
bool solve_support(const Eigen::MatrixXd& G, const std::vector<Eigen::Index>& S, Eigen::VectorXd& x) {
  const auto m = static_cast<Eigen::Index>(S.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = G(S[a], S[b]);
  Eigen::LLT<Eigen::MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) return false;
  x = llt.solve(Eigen::VectorXd::Ones(m));
  return true;
}

}  // namespace

CapacityEstimate capacity_variational(const SiteSet& K, const Eigen::MatrixXd& G) {
  CapacityEstimate out;
  out.method = "variational";
  out.measure.d = K.dim();
  if (K.empty()) return out;  // cap of the empty set is 0
  const auto n = static_cast<Eigen::Index>(K.size());
  if (G.rows() != n || G.cols() != n) throw std::invalid_argument("capacity_variational: matrix size differs from |K|");
  const double scale = G.cwiseAbs().maxCoeff();
  if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("capacity_variational: matrix is not symmetric");
  {
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("capacity_variational: matrix is not positive definite");
  }

  // Optimality for min nu'G nu on the simplex: with x = nu / energy,
  // (G x)_i = 1 on the support and (G x)_j >= 1 off it.
  std::vector<char> in(n, 1);
  Eigen::VectorXd nu = Eigen::VectorXd::Constant(n, 1.0 / n);
  double energy = nu.dot(G * nu);
  const int max_iter = static_cast<int>(4 * n + 20);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<Eigen::Index> S;
    for (Eigen::Index i = 0; i < n; ++i)
      if (in[i]) S.push_back(i);
    Eigen::VectorXd x;
    if (!solve_support(G, S, x)) throw std::invalid_argument("capacity_variational: matrix is not positive definite");
    bool dropped = false;
    for (std::size_t a = 0; a < S.size(); ++a)
      if (x[a] <= 0) {
        in[S[a]] = 0;
        dropped = true;
      }
    if (dropped && std::any_of(in.begin(), in.end(), [](char c) { return c; })) continue;
    if (dropped) {  // every weight non-positive: fall back to the best single site
      const Eigen::Index best = std::distance(G.diagonal().data(),
                                              std::min_element(G.diagonal().data(), G.diagonal().data() + n));
      in[best] = 1;
      continue;
    }
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(n);
    for (std::size_t a = 0; a < S.size(); ++a) cand[S[a]] = x[a];
    const double mass = cand.sum();
    cand /= mass;
    const double e_new = 1.0 / mass;
    const Eigen::VectorXd grad = G * cand;  // equals e_new on the support
    Eigen::Index worst = -1;
    double viol = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!in[j] && e_new - grad[j] > viol + 1e-14 * e_new) {
        viol = e_new - grad[j];
        worst = j;
      }
    const double change = std::abs(energy - e_new);
    nu = cand;
    energy = e_new;
    if (worst < 0) break;
    in[worst] = 1;
    if (change < 1e-10 && viol < 1e-10) break;
  }
  if (iter == max_iter) throw std::runtime_error("capacity_variational: active set did not converge");

  out.iterations = iter + 1;
  out.capacity = 1.0 / energy;
  const auto pts = K.points();
  out.measure.sites = pts;
  out.measure.weights.resize(n);
  out.measure.stderrs.assign(n, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) out.measure.weights[i] = nu[i] * out.capacity;
  return out;
}

CapacityEstimate capacity_variational(const SiteSet& K) {
  if (K.empty()) {
    CapacityEstimate out;
    out.method = "variational";
    out.measure.d = K.dim();
    return out;
  }
  const auto exposed = exposed_sites(K);
  const SiteSet E(K.dim(), exposed);
  double worst = 0;
  CapacityEstimate sub = capacity_variational(E, green_matrix(E, kVariationalGreenTolerance, &worst));
  sub.bias_bound = sub.capacity * worst;
  // Re-embed on all of K (interior weights are zero).
  CapacityEstimate out = sub;
  out.measure.sites = K.points();
  out.measure.weights.assign(out.measure.sites.size(), 0.0);
  out.measure.stderrs.assign(out.measure.sites.size(), 0.0);
  for (std::size_t i = 0; i < sub.measure.sites.size(); ++i) {
    auto it = std::lower_bound(out.measure.sites.begin(), out.measure.sites.end(), sub.measure.sites[i]);
    out.measure.weights[it - out.measure.sites.begin()] = sub.measure.weights[i];
  }
  return out;
}

namespace {

// Walk from x (already in K) one step, then until it re-enters K (false)
// or leaves B(0, R_out) (true).
template <class InK>
bool escapes(std::array<std::int64_t, kMaxDim> x, int d, InK&& in_k, std::int64_t R_out, RngStream& r) {
  const auto two_d = static_cast<std::uint32_t>(2 * d);
  for (;;) {
    const std::uint32_t k = r.below(two_d);
    const int c = static_cast<int>(k >> 1);
    x[c] += (k & 1) ? -1 : 1;
    if (x[c] > R_out || x[c] < -R_out) return true;
    if (in_k(x.data())) return false;
  }
}

double mc_bias_bound(int d, double cap, std::int64_t R_out, std::int64_t radius) {
  const std::int64_t gap = std::max<std::int64_t>(1, R_out + 1 - radius);
  return cap * cap * GreenTable::shared(d).lookup(Point::axis(d, 0, gap)).value;
}

}  // namespace

CapacityEstimate capacity_mc(const SiteSet& K, std::size_t n, std::int64_t R_out, RngStream rng) {
  if (n < 100) throw std::invalid_argument("capacity_mc: need at least 100 walkers per site");
  CapacityEstimate out;
  out.method = "monte-carlo";
  out.measure.d = K.dim();
  out.outer_radius = R_out;
  out.walkers = n;
  if (K.empty()) return out;
  if (4 * K.max_sup_norm() > R_out)
    throw std::invalid_argument("capacity_mc: K must lie inside B(0, R_out/4)");
  const int d = K.dim();
  const auto pts = K.points();
  out.measure.sites = pts;
  out.measure.weights.resize(pts.size());
  out.measure.stderrs.resize(pts.size());
  auto in_k = [&K](const std::int64_t* x) { return K.contains(x); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    RngStream site_rng = rng.child(i);
    std::size_t esc = 0;
    for (std::size_t w = 0; w < n; ++w) esc += escapes(pts[i].x, d, in_k, R_out, site_rng);
    const double p = double(esc) / double(n);
    out.measure.weights[i] = p;
    out.measure.stderrs[i] = std::sqrt(std::max(p * (1 - p), 1.0 / n) / n);
  }
  out.capacity = out.measure.total();
  out.stderr = out.measure.total_stderr();
  out.bias_bound = mc_bias_bound(d, out.capacity, R_out, K.max_sup_norm());
  return out;
}

Region ball_region(int d, std::int64_t R) {
  require_dimension(d);
  if (R < 0) throw std::invalid_argument("ball_region: negative radius");
  Region reg;
  reg.d = d;
  reg.radius = R;
  reg.exposed_count = std::pow(2.0 * R + 1, d) - (R > 0 ? std::pow(2.0 * R - 1, d) : 0.0);
  reg.contains = [d, R](const std::int64_t* x) {
    for (int i = 0; i < d; ++i)
      if (x[i] > R || x[i] < -R) return false;
    return true;
  };
  reg.sample_exposed = [d, R](RngStream& r) {
    // Pick a face uniformly, then a point on it; points on m faces are
    // proposed m times as often, so accept with probability 1/m.
    const auto side = static_cast<std::uint32_t>(2 * R + 1);
    for (;;) {
      Point p(d);
      for (int i = 0; i < d; ++i) p.x[i] = static_cast<std::int64_t>(r.below(side)) - R;
      const std::uint32_t f = r.below(static_cast<std::uint32_t>(2 * d));
      p.x[f >> 1] = (f & 1) ? -R : R;
      int m = 0;
      for (int i = 0; i < d; ++i) m += (p.x[i] == R || p.x[i] == -R);
      if (R == 0 || m == 1 || r.below(static_cast<std::uint32_t>(m)) == 0) return p;
    }
  };
  return reg;
}

Region set_region(std::shared_ptr<const SiteSet> K) {
  if (!K) throw std::invalid_argument("set_region: null set");
  Region reg;
  reg.d = K->dim();
  reg.radius = K->max_sup_norm();
  auto exposed = std::make_shared<std::vector<SiteKey>>(exposed_keys(*K));
  reg.exposed_count = static_cast<double>(exposed->size());
  reg.contains = [K](const std::int64_t* x) { return K->contains(x); };
  const int d = reg.d;
  reg.sample_exposed = [exposed, d](RngStream& r) {
    return unpack((*exposed)[r.below(static_cast<std::uint32_t>(exposed->size()))], d);
  };
  return reg;
}

Region set_region(const SiteSet& K) { return set_region(std::make_shared<const SiteSet>(K)); }

CapacityEstimate capacity_mc_sampled(const Region& region, std::size_t walkers, std::int64_t R_out, RngStream rng) {
  if (walkers < 100) throw std::invalid_argument("capacity_mc_sampled: need at least 100 walkers");
  if (R_out <= region.radius) throw std::invalid_argument("capacity_mc_sampled: outer radius must exceed the region");
  CapacityEstimate out;
  out.method = "monte-carlo";
  out.measure.d = region.d;
  out.outer_radius = R_out;
  out.walkers = walkers;
  if (region.exposed_count == 0) return out;
  std::size_t esc = 0;
  for (std::size_t w = 0; w < walkers; ++w) {
    RngStream r = rng.child(w);
    const Point x = region.sample_exposed(r);
    esc += escapes(x.x, region.d, region.contains, R_out, r);
  }
  const double p = double(esc) / double(walkers);
  out.capacity = region.exposed_count * p;
  out.stderr = region.exposed_count * std::sqrt(std::max(p * (1 - p), 1.0 / walkers) / walkers);
  out.bias_bound = mc_bias_bound(region.d, out.capacity, R_out, region.radius);
  return out;
}

std::int64_t certified_outer_radius(int d, std::int64_t radius, double cap_upper, double rel_bias) {
  if (!(rel_bias > 0)) throw std::invalid_argument("certified_outer_radius: rel_bias must be positive");
  const auto& g = GreenTable::shared(d);
  std::int64_t m = 1;
  while (cap_upper * g(Point::axis(d, 0, m)) >= rel_bias) m = m + 1 + m / 8;
  return radius + m;
}

std::int64_t certified_outer_radius(const SiteSet& K, std::size_t exposed_count, double rel_bias) {
  // cap(K) = cap(exposed sites) <= |exposed| / g(0) by subadditivity.
  const auto& g = GreenTable::shared(K.dim());
  return certified_outer_radius(K.dim(), K.max_sup_norm(), double(exposed_count) / g.g0(), rel_bias);
}

CapacityEstimate capacity_mc_certified(const Region& region, std::size_t walkers, RngStream rng, double rel_bias) {
  const std::size_t pilot_walkers = std::max<std::size_t>(1000, walkers / 10);
  const std::int64_t pilot_radius = region.radius + std::max<std::int64_t>(8, region.radius / 2);
  const auto pilot = capacity_mc_sampled(region, pilot_walkers, pilot_radius, rng.child(0));
  const double g0 = GreenTable::shared(region.d).g0();
  const double cap_upper = std::min(region.exposed_count / g0, pilot.capacity + 3 * pilot.stderr);
  const auto R_out = certified_outer_radius(region.d, region.radius, cap_upper, rel_bias);
  auto out = capacity_mc_sampled(region, walkers, R_out, rng.child(1));
  out.bias_bound = std::max(out.bias_bound, rel_bias * out.capacity);
  return out;
}

CapacityEstimate capacity(const SiteSet& K, RngStream rng, std::size_t mc_walkers, std::size_t exposed_limit) {
  if (K.empty()) return capacity_variational(K);
  const std::size_t exposed = exposed_keys(K).size();
  if (exposed <= exposed_limit) return capacity_variational(K);
  // Non-owning: the region does not outlive this call.
  const std::shared_ptr<const SiteSet> view(&K, [](const SiteSet*) {});
  return capacity_mc_certified(set_region(view), mc_walkers, rng);
}

HittingValue hitting_prob(const Point& x, const SiteSet& K, const EquilibriumMeasure& e, const GreenTable& g) {
  if (e.d != K.dim() || g.dim() != K.dim() || x.d != K.dim())
    throw std::invalid_argument("hitting_prob: dimension mismatch");
  if (e.weights.size() != e.sites.size()) throw std::invalid_argument("hitting_prob: malformed measure");
  for (const auto& y : e.sites)
    if (!K.contains(y)) throw std::invalid_argument("hitting_prob: measure charges a site outside K");
  HittingValue h;
  if (K.contains(x)) {
    h.value = h.raw = 1.0;
    return h;
  }
  std::array<std::int64_t, kMaxDim> v{};
  double err = 0, var = 0;
  for (std::size_t i = 0; i < e.sites.size(); ++i) {
    if (e.weights[i] == 0) continue;
    for (int k = 0; k < x.d; ++k) v[k] = x.x[k] - e.sites[i].x[k];
    const GreenValue gv = g.lookup(v.data());
    h.raw += gv.value * e.weights[i];
    err += gv.error * e.weights[i];
    if (!e.stderrs.empty()) var += gv.value * gv.value * e.stderrs[i] * e.stderrs[i];
  }
  h.error = err + std::sqrt(var);
  h.value = std::clamp(h.raw, 0.0, 1.0);
  h.warning = h.raw > 1.0 + h.error;
  return h;
}

}  // namespace interlace
