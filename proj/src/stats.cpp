#include "interlace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace interlace {

double Summary::se() const { return n > 0 ? std::sqrt(var / double(n)) : 0.0; }

Summary summarize(const std::vector<double>& x) {
  Summary s;
  s.n = x.size();
  if (x.empty()) return s;
  double m = 0;
  for (double v : x) m += v;
  m /= double(s.n);
  double m2 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  s.mean = m;
  if (s.n > 1) {
    const double n = double(s.n);
    s.var = m2 / (n - 1);
    const double mu2 = m2 / n, mu4 = m4 / n;
    s.var_se = std::sqrt(std::max(0.0, (mu4 - (n - 3) / (n - 1) * mu2 * mu2) / n));
  }
  return s;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need at least two points");
  if (!w.empty() && w.size() != x.size()) throw std::invalid_argument("linear_fit: weight size mismatch");
  const std::size_t n = x.size();
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
    syy += wi * (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += wi * r * r;
  }
  f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
  if (w.empty())
    f.slope_se = n > 2 ? std::sqrt(rss / double(n - 2) / sxx) : 0.0;
  else
    f.slope_se = std::sqrt(1.0 / sxx);  // known measurement errors
  return f;
}

LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sy) {
  std::vector<double> lx(x.size()), ly(y.size()), w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("loglog_fit: values must be positive");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  if (!sy.empty()) {
    w.resize(sy.size());
    for (std::size_t i = 0; i < sy.size(); ++i) {
      const double rel = sy[i] / y[i];
      w[i] = 1.0 / std::max(rel * rel, 1e-300);
    }
  }
  return linear_fit(lx, ly, w);
}

TestResult chi_square_gof(const std::vector<double>& obs, const std::vector<double>& probs, double min_expected) {
  if (obs.size() != probs.size() || obs.empty()) throw std::invalid_argument("chi_square_gof: size mismatch");
  double n = 0;
  for (double o : obs) n += o;
  // Pool small cells in order of increasing expectation.
  std::vector<std::size_t> order(obs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
  std::vector<std::pair<double, double>> cells;  // (observed, expected)
  double po = 0, pe = 0;
  for (std::size_t i : order) {
    const double e = n * probs[i];
    if (e < min_expected || pe > 0) {
      po += obs[i];
      pe += e;
      if (pe >= min_expected) {
        cells.push_back({po, pe});
        po = pe = 0;
      }
    } else {
      cells.push_back({obs[i], e});
    }
  }
  if (pe > 0) {
    if (cells.empty())
      cells.push_back({po, pe});
    else {
      cells.back().first += po;
      cells.back().second += pe;
    }
  }
  TestResult r;
  for (auto [o, e] : cells) r.statistic += (o - e) * (o - e) / e;
  r.dof = double(cells.size()) - 1;
  if (r.dof < 1) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  std::size_t i = 0, j = 0;
  double D = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    D = std::max(D, std::abs(double(i) / na - double(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  TestResult r;
  r.statistic = D;
  r.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * D);
  return r;
}

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("pearson: need matched samples");
  const Summary sx = summarize(x), sy = summarize(y);
  double c = 0;
  for (std::size_t i = 0; i < x.size(); ++i) c += (x[i] - sx.mean) * (y[i] - sy.mean);
  c /= double(x.size() - 1);
  Correlation out;
  out.n = x.size();
  out.r = (sx.var > 0 && sy.var > 0) ? c / std::sqrt(sx.var * sy.var) : 0.0;
  out.se = (1 - out.r * out.r) / std::sqrt(double(x.size()));
  return out;
}

}  // namespace interlace
