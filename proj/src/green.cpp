#include "interlace/green.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace interlace {

std::string to_string(GreenMethod m) {
  switch (m) {
    case GreenMethod::TruncatedSum: return "truncated-sum";
    case GreenMethod::Asymptotic: return "asymptotic";
    case GreenMethod::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

namespace {

GreenMethod parse_method(const std::string& s) {
  if (s == "truncated-sum") return GreenMethod::TruncatedSum;
  if (s == "asymptotic") return GreenMethod::Asymptotic;
  if (s == "monte-carlo") return GreenMethod::MonteCarlo;
  throw std::runtime_error("unknown green method tag '" + s + "'");
}

// Sorted absolute values of v[0..d), written into out.
inline void canonical_abs(const std::int64_t* v, int d, std::int64_t* out) {
  for (int i = 0; i < d; ++i) {
    std::int64_t a = std::abs(v[i]);
    int j = i;
    while (j > 0 && out[j - 1] > a) {
      out[j] = out[j - 1];
      --j;
    }
    out[j] = a;
  }
}

// Relative error constant of the local-limit series for g beyond the table.
// Relative error of the local-limit series beyond the table is about
// kFarRelError * d^2 / |v|^2, calibrated against larger truncations.
constexpr double kFarRelError = 0.5;

}  // namespace

double local_limit_tail(int d, double v2, double t0) {
  const double h = 0.5 * d;
  const double c = 2.0 * std::pow(d / (2.0 * std::numbers::pi), h);
  const double a = 0.5 * d * v2;
  double integral;
  if (a == 0.0) {
    integral = std::pow(t0, 1.0 - h) / (h - 1.0);
  } else if (a > 60.0 * t0) {
    // Far field: the incomplete gamma is 1 and the boundary terms vanish
    // to double precision.
    static const std::array<double, kMaxDim + 1> gam = [] {
      std::array<double, kMaxDim + 1> out{};
      for (int k = 3; k <= kMaxDim; ++k) out[k] = boost::math::tgamma(0.5 * k - 1.0);
      return out;
    }();
    return 0.5 * c * std::pow(a, 1.0 - h) * gam[d];
  } else {
    integral = std::pow(a, 1.0 - h) * boost::math::tgamma(h - 1.0) *
               boost::math::gamma_p(h - 1.0, a / t0);
  }
  const double f = c * std::pow(t0, -h) * std::exp(-a / t0);
  const double fp = f * (-h / t0 + a / (t0 * t0));
  // Euler-Maclaurin with step 2.
  return 0.5 * c * integral + 0.5 * f - fp / 6.0;
}

int GreenTable::default_truncation(int d) {
  require_dimension(d);
  static constexpr std::array<int, 9> kT{0, 0, 0, 1200, 400, 200, 120, 80, 60};
  return kT[d];
}

GreenTable::GreenTable(int d, int truncation) : d_(d), T_(truncation) {
  require_dimension(d);
  if (truncation < 4) throw std::invalid_argument("green truncation must be at least 4");
  build();
}

std::size_t GreenTable::rank(const std::int64_t* c) const {
  std::size_t r = 0;
  for (int i = 0; i < d_; ++i) r += binom_[c[i] + i][i + 1];
  return r;
}

void GreenTable::build() {
  const double sigma = std::sqrt(static_cast<double>(T_) / d_);
  L_ = std::min(T_, static_cast<int>(std::ceil(5.0 * sigma)) + 2);
  valid_ = std::max(0, L_ - static_cast<int>(std::ceil(2.0 * sigma)));

  binom_.assign(L_ + d_ + 1, std::vector<std::uint64_t>(d_ + 1, 0));
  for (int n = 0; n <= L_ + d_; ++n) {
    binom_[n][0] = 1;
    for (int k = 1; k <= d_ && k <= n; ++k)
      binom_[n][k] = binom_[n - 1][k - 1] + (k <= n - 1 ? binom_[n - 1][k] : 0);
  }
  auto prefix = [&](int m) { return static_cast<std::size_t>(binom_[m + d_][d_]); };
  const std::size_t ncells = prefix(L_);

  // Enumerate sorted tuples in rank order.
  std::vector<std::uint8_t> coords(ncells * d_);
  std::vector<std::uint8_t> parity(ncells);
  {
    std::array<std::int64_t, kMaxDim> c{};
    std::function<void(int, std::int64_t)> rec = [&](int i, std::int64_t lo) {
      if (i == d_) {
        const std::size_t r = rank(c.data());
        std::int64_t l1 = 0;
        for (int k = 0; k < d_; ++k) {
          coords[r * d_ + k] = static_cast<std::uint8_t>(c[k]);
          l1 += c[k];
        }
        parity[r] = static_cast<std::uint8_t>(l1 & 1);
        return;
      }
      for (std::int64_t v = lo; v <= L_; ++v) {
        c[i] = v;
        rec(i + 1, v);
      }
    };
    // Coordinates are stored in a byte; the largest supported radius is far below 256.
    if (L_ > 255) throw std::invalid_argument("green truncation too large");
    rec(0, 0);
  }

  const int nn = 2 * d_;
  constexpr std::uint32_t kNone = 0xFFFFFFFFu;
  std::vector<std::uint32_t> nb(ncells * nn, kNone);
  {
    std::array<std::int64_t, kMaxDim> c{}, s{};
    for (std::size_t r = 0; r < ncells; ++r) {
      for (int i = 0; i < d_; ++i) {
        for (int sgn = 0; sgn < 2; ++sgn) {
          for (int k = 0; k < d_; ++k) c[k] = coords[r * d_ + k];
          c[i] = sgn == 0 ? c[i] + 1 : std::abs(c[i] - 1);
          canonical_abs(c.data(), d_, s.data());
          if (s[d_ - 1] <= L_) nb[r * nn + 2 * i + sgn] = static_cast<std::uint32_t>(rank(s.data()));
        }
      }
    }
  }

  std::array<std::vector<std::uint32_t>, 2> by_parity;
  for (std::size_t r = 0; r < ncells; ++r) by_parity[parity[r]].push_back(static_cast<std::uint32_t>(r));

  // Cells of parity t+1 only read cells of parity t, so one array suffices.
  std::vector<double> p(ncells, 0.0);
  std::vector<double> acc(ncells, 0.0);
  std::vector<double> acc_half;
  p[0] = 1.0;
  const double w = 1.0 / nn;
  const int half = T_ / 2;
  for (int t = 0; t <= T_; ++t) {
    const auto& cur = by_parity[t & 1];
    const std::size_t active = prefix(std::min(t, L_));
    for (std::uint32_t r : cur) {
      if (r >= active) break;
      acc[r] += p[r];
    }
    if (t == half) acc_half = acc;
    if (t == T_) break;
    const auto& nxt = by_parity[(t + 1) & 1];
    const std::size_t next_active = prefix(std::min(t + 1, L_));
    for (std::uint32_t r : nxt) {
      if (r >= next_active) break;
      const std::uint32_t* n = &nb[static_cast<std::size_t>(r) * nn];
      double s = 0.0;
      for (int k = 0; k < nn; ++k)
        if (n[k] != kNone) s += p[n[k]];
      p[r] = s * w;
    }
  }

  const std::size_t keep = prefix(valid_);
  value_.resize(keep);
  error_.resize(keep);
  auto first_time_after = [](int after, int par) {
    int t0 = after + 1;
    if ((t0 & 1) != par) ++t0;
    return static_cast<double>(t0);
  };
  for (std::size_t r = 0; r < keep; ++r) {
    double v2 = 0;
    for (int k = 0; k < d_; ++k) v2 += double(coords[r * d_ + k]) * coords[r * d_ + k];
    const double tail = local_limit_tail(d_, v2, first_time_after(T_, parity[r]));
    const double tail_half = local_limit_tail(d_, v2, first_time_after(half, parity[r]));
    value_[r] = acc[r] + tail;
    const double est_half = acc_half[r] + tail_half;
    error_[r] = std::abs(value_[r] - est_half) + tail * (d_ + 2.0) / (2.0 * T_);
  }
}

GreenValue GreenTable::far_value(const std::int64_t* v) const {
  double v2 = 0;
  std::int64_t l1 = 0;
  for (int i = 0; i < d_; ++i) {
    v2 += double(v[i]) * double(v[i]);
    l1 += std::abs(v[i]);
  }
  const double g = local_limit_tail(d_, v2, static_cast<double>(l1));
  return {g, g * kFarRelError * d_ * d_ / v2, GreenMethod::Asymptotic};
}

GreenValue GreenTable::lookup(const std::int64_t* v) const {
  std::array<std::int64_t, kMaxDim> s{};
  canonical_abs(v, d_, s.data());
  if (s[d_ - 1] > valid_) return far_value(v);
  const std::size_t r = rank(s.data());
  return {value_[r], error_[r], GreenMethod::TruncatedSum};
}

GreenValue GreenTable::lookup(const Point& v) const {
  if (v.d != d_) throw std::invalid_argument("green lookup: dimension mismatch");
  return lookup(v.x.data());
}

void GreenTable::save(std::ostream& os) const {
  os << "# interlace green table: canonical displacement (sorted |v_i|), value, abs error, method\n";
  os << "d " << d_ << " truncation " << T_ << " radius " << L_ << " valid " << valid_ << " cells "
     << value_.size() << "\n";
  os << std::setprecision(17);
  std::array<std::int64_t, kMaxDim> c{};
  std::function<void(int, std::int64_t)> rec = [&](int i, std::int64_t lo) {
    if (i == d_) {
      const std::size_t r = rank(c.data());
      for (int k = 0; k < d_; ++k) os << c[k] << ' ';
      os << value_[r] << ' ' << error_[r] << ' ' << to_string(GreenMethod::TruncatedSum) << '\n';
      return;
    }
    for (std::int64_t x = lo; x <= valid_; ++x) {
      c[i] = x;
      rec(i + 1, x);
    }
  };
  rec(0, 0);
}

GreenTable GreenTable::load(std::istream& is) {
  std::string line;
  std::getline(is, line);
  if (line.rfind("# interlace green table", 0) != 0) throw std::runtime_error("not a green table file");
  GreenTable g;
  std::string kw;
  std::size_t cells = 0;
  is >> kw >> g.d_ >> kw >> g.T_ >> kw >> g.L_ >> kw >> g.valid_ >> kw >> cells;
  if (!is) throw std::runtime_error("malformed green table header");
  require_dimension(g.d_);
  g.binom_.assign(g.valid_ + g.d_ + 1, std::vector<std::uint64_t>(g.d_ + 1, 0));
  for (int n = 0; n <= g.valid_ + g.d_; ++n) {
    g.binom_[n][0] = 1;
    for (int k = 1; k <= g.d_ && k <= n; ++k)
      g.binom_[n][k] = g.binom_[n - 1][k - 1] + (k <= n - 1 ? g.binom_[n - 1][k] : 0);
  }
  if (cells != g.binom_[g.valid_ + g.d_][g.d_]) throw std::runtime_error("green table cell count mismatch");
  g.value_.assign(cells, 0.0);
  g.error_.assign(cells, 0.0);
  std::array<std::int64_t, kMaxDim> c{};
  std::string method;
  for (std::size_t n = 0; n < cells; ++n) {
    for (int k = 0; k < g.d_; ++k) is >> c[k];
    double val, err;
    is >> val >> err >> method;
    if (!is) throw std::runtime_error("truncated green table file");
    parse_method(method);
    const std::size_t r = g.rank(c.data());
    if (r >= cells) throw std::runtime_error("green table row out of range");
    g.value_[r] = val;
    g.error_[r] = err;
  }
  return g;
}

const GreenTable& GreenTable::shared(int d) {
  require_dimension(d);
  static std::mutex mu;
  static std::array<std::unique_ptr<GreenTable>, kMaxDim + 1> tables;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = tables[d];
  if (slot) return *slot;
  const int T = default_truncation(d);
  const char* dir = std::getenv("INTERLACE_CACHE_DIR");
  std::filesystem::path file;
  if (dir && *dir) {
    file = std::filesystem::path(dir) / ("green_d" + std::to_string(d) + "_T" + std::to_string(T) + ".txt");
    std::ifstream in(file);
    if (in) {
      try {
        auto g = std::make_unique<GreenTable>(load(in));
        if (g->d_ == d && g->T_ == T) {
          slot = std::move(g);
          return *slot;
        }
      } catch (const std::exception&) {
        // Unreadable cache: rebuild below.
      }
    }
  }
  slot = std::make_unique<GreenTable>(d, T);
  if (!file.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
    const auto tmp = file.string() + ".tmp";
    {
      std::ofstream out(tmp);
      if (out) slot->save(out);
    }
    std::filesystem::rename(tmp, file, ec);
  }
  return *slot;
}

GreenValue green(const Point& v, double target_rel_err) {
  require_dimension(v.d);
  const GreenValue g = GreenTable::shared(v.d).lookup(v);
  if (g.error > target_rel_err * g.value) {
    std::ostringstream os;
    os << "green" << v.str() << ": requested relative error " << target_rel_err
       << " but the configured truncation achieves " << g.error / g.value;
    throw std::runtime_error(os.str());
  }
  return g;
}

GreenValue green_mc(const Point& v, std::size_t walkers, std::int64_t cap_radius, RngStream rng) {
  require_dimension(v.d);
  if (walkers < 2) throw std::invalid_argument("green_mc needs at least two walkers");
  if (sup_norm(v) > cap_radius) return {0.0, 0.0, GreenMethod::MonteCarlo};
  const int d = v.d;
  const auto two_d = static_cast<std::uint32_t>(2 * d);
  double sum = 0, sum2 = 0;
  for (std::size_t w = 0; w < walkers; ++w) {
    RngStream r = rng.child(w);
    std::array<std::int64_t, kMaxDim> x{};
    std::int64_t dist = 0;  // number of coordinates differing from v
    for (int i = 0; i < d; ++i) dist += x[i] != v.x[i];
    double visits = dist == 0 ? 1.0 : 0.0;
    for (;;) {
      const std::uint32_t k = r.below(two_d);
      const int c = static_cast<int>(k >> 1);
      const bool was = x[c] == v.x[c];
      x[c] += (k & 1) ? -1 : 1;
      if (std::abs(x[c]) > cap_radius) break;
      dist += (x[c] == v.x[c]) ? (was ? 0 : -1) : (was ? 1 : 0);
      if (dist == 0) visits += 1.0;
    }
    sum += visits;
    sum2 += visits * visits;
  }
  const double n = static_cast<double>(walkers);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
  return {mean, std::sqrt(var / n), GreenMethod::MonteCarlo};
}

}  // namespace interlace
