#include "interlace/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace interlace {

void require_dimension(int d) {
  if (d < kMinDim || d > kMaxDim)
    throw std::invalid_argument("dimension must satisfy 3 <= d <= 8 (got " + std::to_string(d) +
                                "); the walk is recurrent for d <= 2");
}

Point::Point(std::initializer_list<std::int64_t> coords) : d(static_cast<int>(coords.size())) {
  require_dimension(d);
  std::copy(coords.begin(), coords.end(), x.begin());
}

namespace {
void same_dim(const Point& a, const Point& b) {
  if (a.d != b.d) throw std::invalid_argument("points of different dimensions");
}
}  // namespace

Point Point::operator+(const Point& o) const {
  same_dim(*this, o);
  Point r = *this;
  for (int i = 0; i < d; ++i) r.x[i] += o.x[i];
  return r;
}

Point Point::operator-(const Point& o) const {
  same_dim(*this, o);
  Point r = *this;
  for (int i = 0; i < d; ++i) r.x[i] -= o.x[i];
  return r;
}

Point Point::operator-() const {
  Point r = *this;
  for (int i = 0; i < d; ++i) r.x[i] = -r.x[i];
  return r;
}

bool Point::operator==(const Point& o) const {
  same_dim(*this, o);
  return std::equal(x.begin(), x.begin() + d, o.x.begin());
}

bool Point::operator<(const Point& o) const {
  same_dim(*this, o);
  return std::lexicographical_compare(x.begin(), x.begin() + d, o.x.begin(), o.x.begin() + d);
}

std::string Point::str() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < d; ++i) os << (i ? "," : "") << x[i];
  os << ')';
  return os.str();
}

std::int64_t sup_norm(const Point& p) {
  std::int64_t m = 0;
  for (int i = 0; i < p.d; ++i) m = std::max(m, std::abs(p.x[i]));
  return m;
}

std::int64_t l1_norm(const Point& p) {
  std::int64_t s = 0;
  for (int i = 0; i < p.d; ++i) s += std::abs(p.x[i]);
  return s;
}

double l2_norm_sq(const Point& p) {
  double s = 0;
  for (int i = 0; i < p.d; ++i) s += static_cast<double>(p.x[i]) * static_cast<double>(p.x[i]);
  return s;
}

Point canonical(const Point& p) {
  Point c = p;
  for (int i = 0; i < p.d; ++i) c.x[i] = std::abs(c.x[i]);
  std::sort(c.x.begin(), c.x.begin() + p.d);
  return c;
}

Ball::Ball(Point c, std::int64_t r) : center(std::move(c)), radius(r) {
  if (r < 0) throw std::invalid_argument("ball radius must be nonnegative");
  require_dimension(center.d);
}

std::uint64_t Ball::volume() const {
  std::uint64_t v = 1;
  for (int i = 0; i < dim(); ++i) v *= static_cast<std::uint64_t>(2 * radius + 1);
  return v;
}

// ---------------------------------------------------------------------------
// Packed keys

int key_bits(int d) { return 128 / d; }

std::int64_t key_coordinate_limit(int d) {
  const int b = std::min(key_bits(d), 62);
  return (std::int64_t{1} << (b - 1)) - 2;
}

SiteKey pack(const std::int64_t* c, int d) {
  const int b = key_bits(d);
  const std::int64_t lim = key_coordinate_limit(d);
  const std::int64_t bias = lim + 1;
  SiteKey k = 0;
  for (int i = 0; i < d; ++i) {
    if (c[i] > lim || c[i] < -lim)
      throw std::out_of_range("coordinate exceeds packed-key range for d=" + std::to_string(d));
    k = (k << b) | static_cast<SiteKey>(static_cast<std::uint64_t>(c[i] + bias));
  }
  return k;
}

SiteKey pack(const Point& p) { return pack(p.x.data(), p.d); }

Point unpack(SiteKey key, int d) {
  const int b = key_bits(d);
  const std::int64_t bias = key_coordinate_limit(d) + 1;
  const SiteKey mask = (SiteKey{1} << b) - 1;
  Point p(d);
  for (int i = d - 1; i >= 0; --i) {
    p.x[i] = static_cast<std::int64_t>(static_cast<std::uint64_t>(key & mask)) - bias;
    key >>= b;
  }
  return p;
}

// ---------------------------------------------------------------------------
// SiteSet

namespace {
inline std::uint64_t hash_key(SiteKey k) {
  const auto lo = static_cast<std::uint64_t>(k);
  const auto hi = static_cast<std::uint64_t>(k >> 64);
  return splitmix64(lo ^ splitmix64(hi));
}
}  // namespace

SiteSet::SiteSet(int dim) : d_(dim) {
  require_dimension(dim);
  lo_.fill(0);
  hi_.fill(0);
}

SiteSet::SiteSet(int dim, const std::vector<Point>& points) : SiteSet(dim) {
  reserve(points.size());
  for (const auto& p : points) insert(p);
}

void SiteSet::reserve(std::size_t n) {
  std::size_t cap = 16;
  while (cap * 5 < n * 8) cap <<= 1;  // load factor <= 0.625
  if (cap <= slots_.size()) return;
  std::vector<SiteKey> old_slots = std::move(slots_);
  std::vector<std::uint8_t> old_used = std::move(used_);
  slots_.assign(cap, 0);
  used_.assign(cap, 0);
  for (std::size_t i = 0; i < old_slots.size(); ++i) {
    if (!old_used[i]) continue;
    const std::size_t j = probe(old_slots[i]);
    slots_[j] = old_slots[i];
    used_[j] = 1;
  }
}

void SiteSet::grow() { reserve(std::max<std::size_t>(16, size_ * 2 + 1)); }

std::size_t SiteSet::probe(SiteKey key) const {
  const std::size_t mask = slots_.size() - 1;
  std::size_t i = hash_key(key) & mask;
  while (used_[i] && slots_[i] != key) i = (i + 1) & mask;
  return i;
}

bool SiteSet::insert_key(SiteKey key) {
  if (d_ == 0) throw std::logic_error("SiteSet without dimension");
  if ((size_ + 1) * 8 > slots_.size() * 5) grow();
  const std::size_t i = probe(key);
  if (used_[i]) return false;
  slots_[i] = key;
  used_[i] = 1;
  const Point p = unpack(key, d_);
  if (size_ == 0) {
    for (int c = 0; c < d_; ++c) lo_[c] = hi_[c] = p.x[c];
  } else {
    for (int c = 0; c < d_; ++c) {
      lo_[c] = std::min(lo_[c], p.x[c]);
      hi_[c] = std::max(hi_[c], p.x[c]);
    }
  }
  max_norm_ = std::max(max_norm_, sup_norm(p));
  ++size_;
  return true;
}

bool SiteSet::contains_key(SiteKey key) const {
  if (size_ == 0) return false;
  return used_[probe(key)] != 0;
}

bool SiteSet::contains(const Point& p) const {
  if (p.d != d_) throw std::invalid_argument("point dimension differs from set dimension");
  return contains(p.x.data());
}

void SiteSet::clear() {
  slots_.clear();
  used_.clear();
  size_ = 0;
  max_norm_ = -1;
}

std::vector<SiteKey> SiteSet::sorted_keys() const {
  std::vector<SiteKey> keys;
  keys.reserve(size_);
  for_each_key([&](SiteKey k) { keys.push_back(k); });
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::vector<Point> SiteSet::points() const {
  std::vector<Point> pts;
  pts.reserve(size_);
  for (SiteKey k : sorted_keys()) pts.push_back(unpack(k, d_));
  return pts;
}

bool SiteSet::operator==(const SiteSet& o) const {
  if (d_ != o.d_ || size_ != o.size_) return false;
  bool eq = true;
  for_each_key([&](SiteKey k) { eq = eq && o.contains_key(k); });
  return eq;
}

std::vector<SiteKey> exposed_keys(const SiteSet& K) {
  std::vector<SiteKey> out;
  const int d = K.dim();
  K.for_each_key([&](SiteKey key) {
    const Point p = unpack(key, d);
    std::array<std::int64_t, kMaxDim> q = p.x;
    for (int c = 0; c < d; ++c) {
      for (int s : {1, -1}) {
        q[c] = p.x[c] + s;
        if (!K.contains(q.data())) {
          out.push_back(key);
          return;
        }
      }
      q[c] = p.x[c];
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Point> exposed_sites(const SiteSet& K) {
  const auto keys = exposed_keys(K);
  std::vector<Point> out;
  out.reserve(keys.size());
  for (SiteKey k : keys) out.push_back(unpack(k, K.dim()));
  return out;
}

// ---------------------------------------------------------------------------
// Walks

Point WalkPath::at(std::size_t t) const {
  if (t > moves.size()) throw std::out_of_range("WalkPath::at beyond path length");
  Point p = start;
  for (std::size_t i = 0; i < t; ++i) apply_move(p.x.data(), moves[i]);
  return p;
}

std::vector<Point> WalkPath::points() const {
  std::vector<Point> pts;
  pts.reserve(moves.size() + 1);
  for_each_point([&](std::size_t, const Point& p) { pts.push_back(p); });
  return pts;
}

bool is_nearest_neighbor(const std::vector<Point>& pts) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].d != pts[i - 1].d) return false;
    if (l1_norm(pts[i] - pts[i - 1]) != 1) return false;
  }
  return true;
}

std::string to_string(StopCause c) {
  switch (c) {
    case StopCause::Hit: return "hit";
    case StopCause::Exit: return "exit";
    case StopCause::Length: return "length";
  }
  return "?";
}

WalkResult walk_until(const Point& start, const StopRule& rule, RngStream& rng) {
  require_dimension(start.d);
  if (!rule.max_steps && !rule.exit_ball)
    throw std::invalid_argument(
        "walk_until: stopping rule needs a length or exit cap (a hit rule alone may never trigger)");
  if (rule.exit_ball && rule.exit_ball->dim() != start.d)
    throw std::invalid_argument("walk_until: exit ball dimension mismatch");
  if (rule.hit_set && rule.hit_set->dim() != start.d)
    throw std::invalid_argument("walk_until: hit set dimension mismatch");

  WalkResult res{WalkPath{start, {}, rng.seed(), rng.stream()}, StopCause::Length};
  const std::uint32_t two_d = 2 * static_cast<std::uint32_t>(start.d);
  Point p = start;

  auto check = [&](std::size_t t) -> bool {
    if (rule.hit_set && rule.hit_set->contains(p.x.data())) {
      res.cause = StopCause::Hit;
      return true;
    }
    if (rule.exit_ball && !rule.exit_ball->contains(p)) {
      res.cause = StopCause::Exit;
      return true;
    }
    if (rule.max_steps && t >= *rule.max_steps) {
      res.cause = StopCause::Length;
      return true;
    }
    return false;
  };

  for (std::size_t t = 0;; ++t) {
    if (check(t)) break;
    const auto k = static_cast<std::uint8_t>(rng.below(two_d));
    apply_move(p.x.data(), k);
    res.path.moves.push_back(k);
  }
  return res;
}

}  // namespace interlace
