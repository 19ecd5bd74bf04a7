#include "interlace/escape_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace interlace {

namespace {
constexpr std::uint8_t kUnknown = 0;
constexpr std::uint8_t kInK = 1;
constexpr std::uint8_t kSurface = 2;
}  // namespace

template <class F>
void EscapeField::for_each_cell(F&& f) const {
  std::array<std::int64_t, kMaxDim> x{};
  for (int k = 0; k < d_; ++k) x[k] = lo_[k];
  for (std::size_t i = 0; i < h_.size(); ++i) {
    f(i, x.data());
    for (int k = d_ - 1; k >= 0; --k) {
      if (++x[k] <= lo_[k] + static_cast<std::int64_t>(side_) - 1) break;
      x[k] = lo_[k];
    }
  }
}

EscapeField::EscapeField(const SiteSet& K, Ball box, const EquilibriumMeasure& e, const GreenTable& g,
                         double tolerance, std::size_t max_cells)
    : d_(box.dim()), box_(std::move(box)) {
  if (K.dim() != d_ || g.dim() != d_) throw std::invalid_argument("escape_field: dimension mismatch");
  for (const Point& p : K.points())
    if (sup_norm(p - box_.center) > box_.radius - 2)
      throw std::invalid_argument("escape_field: K must lie inside the box with margin >= 2");
  side_ = static_cast<std::size_t>(2 * box_.radius + 1);
  const double cells = std::pow(double(side_), d_);
  if (cells > double(max_cells)) throw std::invalid_argument("escape_field: box exceeds the cell budget");
  std::size_t s = 1;
  for (int k = d_ - 1; k >= 0; --k) {
    lo_[k] = box_.center.x[k] - box_.radius;
    stride_[k] = s;
    s *= side_;
  }
  h_.assign(s, 1.0);
  kind_.assign(s, kUnknown);

  if (e.d != d_ || e.weights.size() != e.sites.size()) throw std::invalid_argument("escape_field: malformed measure");
  std::vector<std::size_t> charged;
  for (std::size_t j = 0; j < e.sites.size(); ++j) {
    if (!K.contains(e.sites[j])) throw std::invalid_argument("escape_field: measure charges a site outside K");
    if (e.weights[j] > 0) charged.push_back(j);
  }
  for_each_cell([&](std::size_t i, const std::int64_t* x) {
    if (K.contains(x)) {
      kind_[i] = kInK;
      h_[i] = 0.0;
    } else if (on_surface(x)) {
      kind_[i] = kSurface;
      // Hitting formula: P_x(H(K) < inf) = sum_y g(x - y) e_K(y).
      std::array<std::int64_t, kMaxDim> v{};
      double hit = 0, err = 0;
      for (std::size_t j : charged) {
        for (int k = 0; k < d_; ++k) v[k] = x[k] - e.sites[j].x[k];
        const GreenValue gv = g.lookup(v.data());
        hit += gv.value * e.weights[j];
        err += gv.error * e.weights[j];
      }
      clamp_warning_ |= hit > 1.0 + err;
      h_[i] = 1.0 - std::clamp(hit, 0.0, 1.0);
    }
  });

  // Conjugate gradients for (I - P) h = b on the unknown sites, with the
  // known K and surface values moved to b.
  std::vector<std::size_t> unk;
  for (std::size_t i = 0; i < h_.size(); ++i)
    if (kind_[i] == kUnknown) unk.push_back(i);
  const std::size_t n = unk.size();
  const double w = 1.0 / (2 * d_);
  auto neighbor_sum = [&](const std::vector<double>& field, std::size_t i) {
    double sum = 0;
    for (int k = 0; k < d_; ++k) sum += field[i + stride_[k]] + field[i - stride_[k]];
    return sum;
  };
  // b = P(known values); the unknown entries start at the current guess.
  std::vector<double> known(h_.size(), 0.0);
  for (std::size_t i = 0; i < h_.size(); ++i)
    if (kind_[i] != kUnknown) known[i] = h_[i];
  std::vector<double> x(n), r(n), p(n), Ap(n), full(h_.size(), 0.0);
  for (std::size_t a = 0; a < n; ++a) x[a] = h_[unk[a]];
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t a = 0; a < n; ++a) full[unk[a]] = v[a];
    for (std::size_t a = 0; a < n; ++a) out[a] = v[a] - w * neighbor_sum(full, unk[a]);
  };
  std::vector<double> b(n);
  for (std::size_t a = 0; a < n; ++a) b[a] = w * neighbor_sum(known, unk[a]);
  apply(x, Ap);
  for (std::size_t a = 0; a < n; ++a) r[a] = b[a] - Ap[a];
  p = r;
  double rr = 0;
  for (double v : r) rr += v * v;
  auto rmax = [&] {
    double m = 0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
  };
  const int max_iter = static_cast<int>(10 * side_ * d_ + 1000);
  while (n > 0 && rmax() > tolerance) {
    if (iterations_ >= max_iter) throw std::runtime_error("escape_field: conjugate gradients did not converge");
    apply(p, Ap);
    double pAp = 0;
    for (std::size_t a = 0; a < n; ++a) pAp += p[a] * Ap[a];
    const double alpha = rr / pAp;
    double rr_new = 0;
    for (std::size_t a = 0; a < n; ++a) {
      x[a] += alpha * p[a];
      r[a] -= alpha * Ap[a];
      rr_new += r[a] * r[a];
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t a = 0; a < n; ++a) p[a] = r[a] + beta * p[a];
    ++iterations_;
    if (iterations_ % 50 == 0) {  // refresh the residual to avoid drift
      apply(x, Ap);
      for (std::size_t a = 0; a < n; ++a) r[a] = b[a] - Ap[a];
    }
  }
  for (std::size_t a = 0; a < n; ++a) h_[unk[a]] = x[a];
  // Final true residual check.
  if (max_harmonic_residual() > 100 * tolerance)
    throw std::runtime_error("escape_field: residual above tolerance after convergence");
}

bool EscapeField::in_box(const std::int64_t* x) const {
  for (int k = 0; k < d_; ++k)
    if (std::abs(x[k] - box_.center.x[k]) > box_.radius) return false;
  return true;
}

bool EscapeField::on_surface(const std::int64_t* x) const {
  std::int64_t m = 0;
  for (int k = 0; k < d_; ++k) m = std::max(m, std::abs(x[k] - box_.center.x[k]));
  return m == box_.radius;
}

double EscapeField::at(const Point& x) const {
  if (x.d != d_ || !in_box(x.x.data())) throw std::out_of_range("escape field queried outside its box");
  return (*this)(x.x.data());
}

double EscapeField::max_harmonic_residual() const {
  double m = 0;
  const double w = 1.0 / (2 * d_);
  for (std::size_t i = 0; i < h_.size(); ++i) {
    if (kind_[i] != kUnknown) continue;
    double s = 0;
    for (int k = 0; k < d_; ++k) s += h_[i + stride_[k]] + h_[i - stride_[k]];
    m = std::max(m, std::abs(h_[i] - w * s));
  }
  return m;
}

double EscapeField::max_normalization_error() const {
  double m = 0;
  const double w = 1.0 / (2 * d_);
  for (std::size_t i = 0; i < h_.size(); ++i) {
    if (kind_[i] != kUnknown) continue;
    double s = 0;
    for (int k = 0; k < d_; ++k) s += h_[i + stride_[k]] + h_[i - stride_[k]];
    m = std::max(m, std::abs(w * s / h_[i] - 1.0));
  }
  return m;
}

}  // namespace interlace
