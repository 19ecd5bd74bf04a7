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

// ---------------------------------------------------------------------------
// Convolution sums

namespace {

// min(1, r^{2-d}) as a function of r^2.
inline double kernel_sq(double r2, int d) {
  if (r2 <= 1) return 1.0;
  double p = 1;
  for (int k = 0; k < (d - 2) / 2; ++k) p *= r2;
  if (d % 2) p *= std::sqrt(r2);
  return 1.0 / p;
}

double kernel(const Point& v) { return kernel_sq(l2_norm_sq(v), v.d); }

bool on_first_axis(const Point& p) {
  for (int k = 1; k < p.d; ++k)
    if (p[k] != 0) return false;
  return true;
}

// Kernel over displacements |v|_inf <= M, indexed densely.
struct KernelTable {
  int d;
  std::int64_t M;
  std::size_t side;
  std::vector<double> f;
  double total = 0;

  KernelTable(int dim, std::int64_t m) : d(dim), M(m), side(std::size_t(2 * m + 1)) {
    std::size_t n = 1;
    for (int k = 0; k < d; ++k) n *= side;
    f.resize(n);
    std::vector<std::int64_t> c(std::size_t(d), -M);
    for (std::size_t i = 0; i < n; ++i) {
      double r2 = 0;
      for (int k = 0; k < d; ++k) r2 += double(c[std::size_t(k)] * c[std::size_t(k)]);
      f[i] = kernel_sq(r2, d);
      total += f[i];
      for (int k = 0; k < d; ++k) {
        if (++c[std::size_t(k)] <= M) break;
        c[std::size_t(k)] = -M;
      }
    }
  }
  std::size_t index(const std::int64_t* v) const {
    std::size_t i = 0, s = 1;
    for (int k = 0; k < d; ++k, s *= side) i += std::size_t(v[k] + M) * s;
    return i;
  }
};

double box_volume(int d, std::int64_t L) { return std::pow(double(2 * L + 1), d); }

// Number of v in [-M, M]^d with |v|^2 = q, for q <= d M^2.
std::vector<double> square_counts(int d, std::int64_t M) {
  std::vector<double> counts(1, 1.0);
  for (int k = 0; k < d; ++k) {
    std::vector<double> next(counts.size() + std::size_t(M * M), 0.0);
    for (std::size_t q = 0; q < counts.size(); ++q) {
      if (counts[q] == 0) continue;
      for (std::int64_t a = -M; a <= M; ++a) next[q + std::size_t(a * a)] += counts[q];
    }
    counts.swap(next);
  }
  return counts;
}

// Sum over z in B(0, L) of k(z0 - z) k(z - z_end) for z0, z_end on the first
// axis: the summand depends on z_1 and q = z_2^2 + ... + z_d^2 only.
double one_fold_axis(const Point& z0, const Point& ze, std::int64_t L) {
  const int d = z0.d;
  const std::size_t qmax = std::size_t((d - 1) * L * L);
  auto counts = square_counts(d - 1, L);
  counts.resize(qmax + 1);
  double sum = 0;
  const double a = double(z0[0]), b = double(ze[0]);
  for (std::int64_t z1 = -L; z1 <= L; ++z1) {
    const double da = (a - double(z1)) * (a - double(z1)), db = (double(z1) - b) * (double(z1) - b);
    for (std::size_t q = 0; q <= qmax; ++q)
      if (counts[q] != 0) sum += counts[q] * kernel_sq(da + double(q), d) * kernel_sq(db + double(q), d);
  }
  return sum;
}

template <class F>
void for_each_in_box(int d, std::int64_t L, F&& f) {
  Point z(d);
  for (int k = 0; k < d; ++k) z[k] = -L;
  for (;;) {
    f(z);
    int k = 0;
    while (k < d && z[k] == L) z[k++] = -L;
    if (k == d) return;
    ++z[k];
  }
}

// Uniform on {|v|_inf = rho}: one coordinate is set to +-rho, the others
// uniform; accepting with probability 1 / (number of extreme coordinates)
// removes the bias towards corners.
Point uniform_on_shell(int d, std::int64_t rho, RngStream& r) {
  Point v(d);
  if (rho == 0) return v;
  for (;;) {
    const int i = int(r.below(std::uint32_t(d)));
    int extreme = 0;
    for (int k = 0; k < d; ++k) {
      v[k] = k == i ? (r.below(2) ? rho : -rho) : std::int64_t(r.below(std::uint32_t(2 * rho + 1))) - rho;
      extreme += std::abs(v[k]) == rho;
    }
    if (extreme == 1 || r.below(std::uint32_t(extreme)) == 0) return v;
  }
}

double shell_size(int d, std::int64_t rho) {
  return rho == 0 ? 1.0 : std::pow(double(2 * rho + 1), d) - std::pow(double(2 * rho - 1), d);
}

// Displacements v in B(0, M) drawn with probability kernel(v) / total:
// shell first, then uniform on the shell with acceptance kernel / shell maximum.
class KernelSampler {
 public:
  KernelSampler(int d, std::int64_t M) : d_(d), M_(M) {
    const auto counts = square_counts(d, M);
    for (std::size_t q = 0; q < counts.size(); ++q) total_ += counts[q] * kernel_sq(double(q), d);
    double acc = 0;
    for (std::int64_t rho = 0; rho <= M; ++rho) {
      const double top = kernel_sq(double(rho * rho), d);
      acc += shell_size(d, rho) * top;
      cum_.push_back(acc);
      top_.push_back(top);
    }
  }
  Point draw(RngStream& r) const {
    for (;;) {
      const double x = r.uniform() * cum_.back();
      const auto rho = std::min<std::int64_t>(M_, std::upper_bound(cum_.begin(), cum_.end(), x) - cum_.begin());
      const Point v = uniform_on_shell(d_, rho, r);
      if (r.uniform() * top_[std::size_t(rho)] < kernel(v)) return v;
    }
  }
  double prob(const Point& v) const { return sup_norm(v) <= M_ ? kernel(v) / total_ : 0.0; }
  double total() const { return total_; }

 private:
  int d_;
  std::int64_t M_;
  double total_ = 0;
  std::vector<double> cum_, top_;
};

}  // namespace

ConvolutionValue convolution_exact(int n, const Point& z0, const Point& z_end, std::int64_t L) {
  if (n < 0) throw std::invalid_argument("convolution: n must be non-negative");
  if (z0.d != z_end.d) throw std::invalid_argument("convolution: dimension mismatch");
  const int d = z0.d;
  require_dimension(d);
  if (n == 0) return {kernel(z0 - z_end), 0, "exact"};
  if (n == 1) {
    if (on_first_axis(z0) && on_first_axis(z_end)) return {one_fold_axis(z0, z_end, L), 0, "exact-axis-reduction"};
    if (box_volume(d, L) > 5e8) throw std::invalid_argument("convolution_exact: box too large for enumeration");
    double s = 0;
    for_each_in_box(d, L, [&](const Point& z) { s += kernel(z0 - z) * kernel(z - z_end); });
    return {s, 0, "exact-enumeration"};
  }
  if (n == 2) {
    if (box_volume(d, L) * box_volume(d, L) > 2e9)
      throw std::invalid_argument("convolution_exact: n = 2 enumeration only for small boxes");
    const KernelTable t(d, 2 * L);
    std::vector<Point> box;
    for_each_in_box(d, L, [&](const Point& z) { box.push_back(z); });
    std::vector<double> a(box.size()), c(box.size());
    for (std::size_t i = 0; i < box.size(); ++i) a[i] = kernel(z0 - box[i]), c[i] = kernel(box[i] - z_end);
    double s = 0;
    std::array<std::int64_t, kMaxDim> v{};
    for (std::size_t i = 0; i < box.size(); ++i) {
      double inner = 0;
      for (std::size_t j = 0; j < box.size(); ++j) {
        for (int k = 0; k < d; ++k) v[k] = box[j][k] - box[i][k];
        inner += t.f[t.index(v.data())] * c[j];
      }
      s += a[i] * inner;
    }
    return {s, 0, "exact-enumeration"};
  }
  throw std::invalid_argument("convolution_exact: n >= 3 needs convolution_mc");
}

ConvolutionValue convolution_mc(int n, const Point& z0, const Point& z_end, std::int64_t L, std::size_t samples,
                                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("convolution_mc: n must be at least 1");
  if (samples < 2) throw std::invalid_argument("convolution_mc: need at least two samples");
  const int d = z0.d;
  const KernelSampler ks(d, 2 * L);
  const Ball box(Point::zero(d), L);
  std::vector<double> w(samples);
  const RngStream base(seed, 0xC0);
  std::string method;
  if (n == 2) {
    // z2 with density proportional to min(1, |z2|_inf^{-4}) on B(L); z1 from
    // the mixture of the kernel around z0 and around z2.
    method = "importance-sampling-2";
    std::vector<double> cum;
    double acc = 0;
    for (std::int64_t rho = 0; rho <= L; ++rho) {
      acc += shell_size(d, rho) * (rho == 0 ? 1.0 : std::pow(double(rho), -4.0));
      cum.push_back(acc);
    }
    for (std::size_t i = 0; i < samples; ++i) {
      RngStream r = base.child(i);
      const auto rho = std::int64_t(std::upper_bound(cum.begin(), cum.end(), r.uniform() * acc) - cum.begin());
      const Point z2 = uniform_on_shell(d, rho, r);
      const double p2 = (rho == 0 ? 1.0 : std::pow(double(rho), -4.0)) / acc;
      const Point z1 = (r.uniform() < 0.5 ? z0 : z2) + ks.draw(r);
      if (!box.contains(z1)) {
        w[i] = 0;
        continue;
      }
      const double q1 = 0.5 * ks.prob(z1 - z0) + 0.5 * ks.prob(z1 - z2);
      w[i] = kernel(z0 - z1) * kernel(z1 - z2) * kernel(z2 - z_end) / (q1 * p2);
    }
  } else {
    // Forward chain: z_i = z_{i-1} + v_i with v_i from the kernel.
    method = "importance-sampling-chain";
    const double Qn = std::pow(ks.total(), n);
    for (std::size_t i = 0; i < samples; ++i) {
      RngStream r = base.child(i);
      Point z = z0;
      bool inside = true;
      for (int k = 0; k < n && inside; ++k) {
        z = z + ks.draw(r);
        inside = box.contains(z);
      }
      w[i] = inside ? Qn * kernel(z - z_end) : 0.0;
    }
  }
  const auto s = summarize(w);
  return {s.mean, s.se(), method};
}

CheckReport check_convolution(int n, const Point& z0, const Point& z_end, std::int64_t L, std::size_t samples,
                              const CheckContext& ctx) {
  if (n < 0) throw std::invalid_argument("check_convolution: n must be non-negative");
  CheckReport r;
  r.id = "convolution.n" + std::to_string(n);
  r.parameters = ParamList().add("d", z0.d).add("n", n).add("z0", z0.str()).add("z_end", z_end.str()).add("L", L)
                     .str();
  r.seed = ctx.seed;
  if (n <= 1 || (n == 2 && box_volume(z0.d, L) * box_volume(z0.d, L) <= 2e9)) {
    const auto v = convolution_exact(n, z0, z_end, L);
    r.statistic = v.value;
    r.note = v.method;
    r.criterion = "direct sum";
    if (n >= 1 && samples > 1) {
      const auto m = convolution_mc(n, z0, z_end, L, samples, ctx.seed);
      r.sigma = m.stderr;
      r.bound = 3 * m.stderr;
      r.criterion = "|direct sum - importance-sampled estimate| <= 3 sigma";
      r.note += ", mc " + std::to_string(m.value);
      r.replicas = samples;
      r.pass = std::abs(v.value - m.value) <= r.bound;
    } else {
      r.pass = std::isfinite(v.value);
    }
    return r;
  }
  const auto m = convolution_mc(n, z0, z_end, L, samples, ctx.seed);
  r.statistic = m.value;
  r.sigma = m.stderr;
  r.note = m.method;
  r.criterion = "importance-sampled estimate (finite, positive)";
  r.replicas = samples;
  r.pass = std::isfinite(m.value) && m.value > 0;
  return r;
}

std::vector<CheckReport> check_convolution_suite(const ConvolutionParams& p, const CheckContext& ctx) {
  std::vector<CheckReport> out;
  const int d = p.d;
  const int s_d = (d - 1) / 2;  // ceil((d - 2) / 2)
  const Point o = Point::zero(d);
  // Decay in the separation for every n < s_d with an exact method.
  for (int n = 0; n < s_d && n <= 1; ++n) {
    std::vector<double> xs, ys;
    std::ostringstream note;
    for (auto sep : p.separations) {
      const auto v = convolution_exact(n, o, Point::axis(d, 0, sep), p.box_factor * sep);
      xs.push_back(double(sep));
      ys.push_back(v.value);
      note << "|z|=" << sep << ":" << v.value << " ";
    }
    auto r = detail::slope_report("convolution.decay_n" + std::to_string(n), loglog_fit(xs, ys), 2.0 * n + 2 - d,
                                  p.tol,
                                  ParamList().add("d", d).add("n", n).add_list("separations", p.separations)
                                      .add("L", std::to_string(p.box_factor) + "|z|").str(),
                                  0, ctx.seed, "log sum vs log |z0 - z_end|");
    r.note = note.str();
    out.push_back(r);
  }
  if (s_d > 1) {
    // Stabilisation in L at the smallest separation: increments shrink.
    const auto sep = p.separations.front();
    const Point ze = Point::axis(d, 0, sep);
    std::vector<double> v;
    std::ostringstream note;
    for (std::int64_t f = 1; f <= 8; f *= 2) {
      v.push_back(convolution_exact(1, o, ze, f * sep).value);
      note << "L=" << f * sep << ":" << v.back() << " ";
    }
    double worst = 0;
    for (std::size_t k = 2; k < v.size(); ++k) worst = std::max(worst, (v[k] - v[k - 1]) / (v[k - 1] - v[k - 2]));
    CheckReport r;
    r.id = "convolution.stabilises_n1";
    r.parameters = ParamList().add("d", d).add("n", 1).add("separation", sep).str();
    r.statistic = worst;
    r.bound = 1;
    r.criterion = "sum increments under doubling of L shrink (max ratio of successive increments < 1)";
    r.note = note.str();
    r.pass = worst < 1;
    r.seed = ctx.seed;
    out.push_back(r);
  }
  {
    // n = s_d: divergence in the truncation radius.
    const int n = s_d;
    const Point ze = Point::axis(d, 0, p.divergence_end);
    std::vector<double> xs, ys, ss;
    std::ostringstream note;
    for (std::size_t k = 0; k < p.divergence_radii.size(); ++k) {
      const auto L = p.divergence_radii[k];
      const auto v = convolution_mc(n, o, ze, L, p.samples, ctx.seed + 17 * (k + 1));
      xs.push_back(double(L));
      ys.push_back(v.value);
      ss.push_back(v.stderr);
      note << "L=" << L << ":" << v.value << "+-" << v.stderr << " ";
    }
    double worst = 1e300;
    for (std::size_t k = 1; k < ys.size(); ++k)
      worst = std::min(worst, (ys[k] - ys[k - 1]) / std::hypot(ss[k], ss[k - 1]));
    const auto fit = loglog_fit(xs, ys, ss);
    CheckReport r;
    r.id = "convolution.diverges_n" + std::to_string(n);
    r.parameters = ParamList().add("d", d).add("n", n).add("z_end", ze.str()).add_list("L", p.divergence_radii)
                       .add("samples", p.samples).str();
    r.statistic = worst;
    r.bound = 3;
    r.sigma = fit.slope_se;
    r.criterion = "truncated sum strictly increasing in L (each step > 3 sigma) with positive log-log slope";
    r.note = note.str() + "slope " + std::to_string(fit.slope);
    r.pass = worst > 3 && fit.slope > 0;
    r.replicas = p.samples * p.divergence_radii.size();
    r.seed = ctx.seed;
    out.push_back(r);
  }
  {
    // Estimator validation against direct sums.
    const Point ze = Point::axis(d, 0, 2);
    auto r1 = check_convolution(1, o, ze, 6, p.validation_samples, ctx);
    r1.id = "convolution.validate_n1";
    out.push_back(r1);
    auto r2 = check_convolution(2, o, ze, 3, p.validation_samples, ctx);
    r2.id = "convolution.validate_n2";
    out.push_back(r2);
  }
  return out;
}

}  // namespace interlace
