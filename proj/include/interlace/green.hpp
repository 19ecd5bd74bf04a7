#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

namespace interlace {

enum class GreenMethod { TruncatedSum, Asymptotic, MonteCarlo };
std::string to_string(GreenMethod m);

struct GreenValue {
  double value = 0;
  double error = 0;  // absolute error bound (truncated sum) or standard error (Monte Carlo)
  GreenMethod method = GreenMethod::TruncatedSum;
};

// Lattice Green function g(v) = sum_t P_0(X(t) = v).
//
// The transition kernel is convolved T times on the fundamental domain of
// the hyperoctahedral group (sorted absolute coordinates) inside a cube of
// radius L ~ 5 sqrt(T/d); times t > T are summed with the Gaussian local
// limit and an Euler-Maclaurin correction. The reported error is the
// change between truncations T/2 and T plus a relative O(1/T) model term
// for the local-limit tail.
class GreenTable {
 public:
  GreenTable(int d, int truncation);

  // Process-wide shared table for dimension d (default truncation), built
  // on first use. With INTERLACE_CACHE_DIR set, tables are read from and
  // written to that directory.
  static const GreenTable& shared(int d);
  static int default_truncation(int d);

  int dim() const { return d_; }
  int truncation() const { return T_; }
  int radius() const { return L_; }
  // Cube radius inside which the truncated sum is used; beyond it the
  // local-limit series over all times is used instead.
  int valid_radius() const { return valid_; }
  std::size_t cells() const { return value_.size(); }

  GreenValue lookup(const Point& v) const;
  GreenValue lookup(const std::int64_t* v) const;
  double operator()(const Point& v) const { return lookup(v).value; }
  double at(const std::int64_t* v) const { return lookup(v).value; }
  double g0() const { return value_[0]; }

  // Columnar text: header, then one row per canonical displacement.
  void save(std::ostream& os) const;
  static GreenTable load(std::istream& is);

 private:
  GreenTable() = default;
  void build();
  std::size_t rank(const std::int64_t* sorted) const;
  GreenValue far_value(const std::int64_t* v) const;

  int d_ = 0;
  int T_ = 0;
  int L_ = 0;
  int valid_ = 0;
  std::vector<std::vector<std::uint64_t>> binom_;
  std::vector<double> value_;
  std::vector<double> error_;
};

// Sum over t >= t0 with t = t0 (mod 2) of the Gaussian local limit
// 2 (d / 2 pi t)^{d/2} exp(-d |v|^2 / 2t); |v|^2 is the squared l2 norm.
double local_limit_tail(int d, double v2, double t0);

// g(v) with the reported absolute error at most target_rel_err * g(v);
// throws std::runtime_error naming the achievable bound otherwise.
GreenValue green(const Point& v, double target_rel_err = 1e-2);

// Independent oracle: mean number of visits to v by a walk from 0 stopped
// on exit from B(0, cap_radius).
GreenValue green_mc(const Point& v, std::size_t walkers, std::int64_t cap_radius, RngStream rng);

}  // namespace interlace
