#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "interlace/rng.hpp"

namespace interlace {

inline constexpr int kMinDim = 3;
inline constexpr int kMaxDim = 8;

// Throws std::invalid_argument unless 3 <= d <= 8.
void require_dimension(int d);

// A point of Z^d. Coordinates are exact 64-bit integers.
struct Point {
  std::array<std::int64_t, kMaxDim> x{};
  int d = 0;

  Point() = default;
  explicit Point(int dim) : d(dim) { require_dimension(dim); }
  Point(std::initializer_list<std::int64_t> coords);
  static Point zero(int dim) { return Point(dim); }
  static Point axis(int dim, int coord, std::int64_t k) {
    Point p(dim);
    p.x[coord] = k;
    return p;
  }

  std::int64_t& operator[](int i) { return x[i]; }
  std::int64_t operator[](int i) const { return x[i]; }
  int dim() const { return d; }

  Point operator+(const Point& o) const;
  Point operator-(const Point& o) const;
  Point operator-() const;
  bool operator==(const Point& o) const;
  bool operator!=(const Point& o) const { return !(*this == o); }
  bool operator<(const Point& o) const;

  std::string str() const;
};

// |x| = max_i |x_i|
std::int64_t sup_norm(const Point& p);
std::int64_t l1_norm(const Point& p);
double l2_norm_sq(const Point& p);

// Sorted absolute values: the representative of p under coordinate
// permutations and reflections.
Point canonical(const Point& p);

// B(center, radius) under the sup-norm.
struct Ball {
  Point center;
  std::int64_t radius = 0;

  Ball() = default;
  Ball(Point c, std::int64_t r);
  int dim() const { return center.d; }
  bool contains(const Point& p) const { return sup_norm(p - center) <= radius; }
  bool contains(const Ball& b) const { return sup_norm(b.center - center) + b.radius <= radius; }
  std::uint64_t volume() const;
};

// Packed coordinates, floor(128/d) bits per axis.
using SiteKey = unsigned __int128;

int key_bits(int d);
std::int64_t key_coordinate_limit(int d);
SiteKey pack(const Point& p);
SiteKey pack(const std::int64_t* coords, int d);
Point unpack(SiteKey key, int d);

// Finite subset of Z^d: open-addressing hash of packed coordinates.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(int dim);
  SiteSet(int dim, const std::vector<Point>& points);

  int dim() const { return d_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool insert(const Point& p) { return insert_key(pack(p)); }
  bool insert_key(SiteKey key);
  bool contains(const Point& p) const;
  bool contains(const std::int64_t* coords) const {
    if (size_ == 0 || !in_bounding_box(coords)) return false;
    return contains_key(pack(coords, d_));
  }
  bool contains_key(SiteKey key) const;
  void reserve(std::size_t n);
  void clear();

  // Deterministic ascending key order.
  std::vector<SiteKey> sorted_keys() const;
  std::vector<Point> points() const;
  template <class F>
  void for_each_key(F&& f) const {
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (used_[i]) f(slots_[i]);
  }

  // Smallest ball centred at the origin containing the set (-1 when empty).
  std::int64_t max_sup_norm() const { return max_norm_; }
  // Per-axis bounding box, valid when non-empty.
  const std::array<std::int64_t, kMaxDim>& lower() const { return lo_; }
  const std::array<std::int64_t, kMaxDim>& upper() const { return hi_; }
  bool in_bounding_box(const std::int64_t* coords) const {
    for (int i = 0; i < d_; ++i)
      if (coords[i] < lo_[i] || coords[i] > hi_[i]) return false;
    return true;
  }

  bool operator==(const SiteSet& o) const;

 private:
  std::size_t probe(SiteKey key) const;
  void grow();

  int d_ = 0;
  std::size_t size_ = 0;
  std::vector<SiteKey> slots_;
  std::vector<std::uint8_t> used_;
  std::int64_t max_norm_ = -1;
  std::array<std::int64_t, kMaxDim> lo_{};
  std::array<std::int64_t, kMaxDim> hi_{};
};

// Sites of K with at least one nearest neighbour outside K. Only these
// can carry equilibrium mass.
std::vector<Point> exposed_sites(const SiteSet& K);
// The same sites as sorted keys; cheaper for large sets.
std::vector<SiteKey> exposed_keys(const SiteSet& K);

// Move k in [0, 2d): axis k/2, +1 for even k, -1 for odd k.
inline void apply_move(std::int64_t* coords, std::uint8_t k) {
  coords[k >> 1] += (k & 1) ? -1 : 1;
}

struct WalkPath {
  Point start;
  std::vector<std::uint8_t> moves;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t length() const { return moves.size(); }
  Point at(std::size_t t) const;
  Point end() const { return at(moves.size()); }
  std::vector<Point> points() const;
  template <class F>
  void for_each_point(F&& f) const {
    Point p = start;
    f(std::size_t{0}, p);
    for (std::size_t t = 0; t < moves.size(); ++t) {
      apply_move(p.x.data(), moves[t]);
      f(t + 1, p);
    }
  }
};

// True iff consecutive points differ by one unit in exactly one coordinate.
bool is_nearest_neighbor(const std::vector<Point>& pts);

enum class StopCause { Hit, Exit, Length };
std::string to_string(StopCause c);

// Stopping rules for walk_until; the first rule to trigger wins, with
// ties at the same time broken in the order hit, exit, length.
struct StopRule {
  std::optional<std::size_t> max_steps;
  std::optional<Ball> exit_ball;
  const SiteSet* hit_set = nullptr;  // H(K) = inf{t >= 0 : X(t) in K}

  static StopRule length(std::size_t n) { return StopRule{n, std::nullopt, nullptr}; }
  static StopRule exit(Ball b) { return StopRule{std::nullopt, std::move(b), nullptr}; }
};

struct WalkResult {
  WalkPath path;
  StopCause cause;
};

// Simple random walk from `start` until the stop rule triggers. Rejects a
// hit rule with no length or exit cap.
WalkResult walk_until(const Point& start, const StopRule& rule, RngStream& rng);
inline WalkResult walk_until(const Point& start, const StopRule& rule, RngStream&& rng) {
  return walk_until(start, rule, rng);
}

}  // namespace interlace
