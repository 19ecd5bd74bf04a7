#include "interlace/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace interlace {

std::string to_string(BackwardMethod m) {
  switch (m) {
    case BackwardMethod::Auto: return "auto";
    case BackwardMethod::HTransform: return "h-transform";
    case BackwardMethod::Rejection: return "rejection";
    case BackwardMethod::JointRejection: return "joint-rejection";
  }
  return "?";
}

double ball_capacity_upper(int d, std::int64_t R) {
  require_dimension(d);
  static std::mutex mu;
  static std::map<std::pair<int, std::int64_t>, double> memo;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = memo.find({d, R});
    if (it != memo.end()) return it->second;
  }
  double upper;
  if (R <= 1) {
    SiteSet B(d);
    Point p(d);
    std::function<void(int)> rec = [&](int i) {
      if (i == d) {
        B.insert(p);
        return;
      }
      for (p.x[i] = -R; p.x[i] <= R; ++p.x[i]) rec(i + 1);
    };
    rec(0);
    upper = capacity_variational(B).capacity * (1 + 1e-3);
  } else {
    const auto est = capacity_mc_sampled(ball_region(d, R), 100000, 4 * R, RngStream(0xBA11CAB5ULL, R));
    upper = est.capacity + 3 * est.stderr;
  }
  std::lock_guard<std::mutex> lock(mu);
  memo[{d, R}] = upper;
  return upper;
}

namespace {

// Smallest bounding ball (sup-norm) of a nonempty set.
Ball bounding_ball(const SiteSet& A) {
  const int d = A.dim();
  Point c(d);
  std::int64_t rad = 0;
  for (int k = 0; k < d; ++k) {
    const std::int64_t lo = A.lower()[k], hi = A.upper()[k];
    c.x[k] = lo + (hi - lo) / 2;
    rad = std::max(rad, std::max(c.x[k] - lo, hi - c.x[k]));
  }
  return Ball(c, rad);
}

std::int64_t required_distance(int d, double cap_upper, double eps) {
  const auto& g = GreenTable::shared(d);
  if (cap_upper <= 0) return 0;
  std::int64_t m = 1;
  // Coarse doubling, then linear refinement.
  while (cap_upper * g(Point::axis(d, 0, m)) >= eps) m *= 2;
  std::int64_t lo = m / 2 + 1;
  if (m == 1) lo = 1;
  std::int64_t hi = m;
  while (lo < hi) {
    const std::int64_t mid = (lo + hi) / 2;
    if (cap_upper * g(Point::axis(d, 0, mid)) < eps)
      hi = mid;
    else
      lo = mid + 1;
  }
  return hi;
}

inline std::int64_t sup_norm_raw(const std::int64_t* x, int d) {
  std::int64_t m = 0;
  for (int k = 0; k < d; ++k) m = std::max(m, x[k] < 0 ? -x[k] : x[k]);
  return m;
}

}  // namespace

Sampler::Sampler(SiteSet A, Ball window, SamplerOptions opts)
    : A_(std::move(A)), window_(std::move(window)), opts_(std::move(opts)), d_(window_.dim()) {
  if (A_.dim() != d_) throw std::invalid_argument("sampler: A and window dimensions differ");
  if (!(opts_.eps_trunc > 0)) throw std::invalid_argument("sampler: eps_trunc must be positive");
  for (const Point& p : A_.points())
    if (sup_norm(p - window_.center) >= window_.radius)
      throw std::invalid_argument("sampler: A must lie inside the window with margin");

  method_ = opts_.method;
  if (!A_.empty()) {
    exposed_ = exposed_sites(A_);
    if (method_ == BackwardMethod::Auto) {
      // Anchors-only samples need the explicit equilibrium measure.
      if (exposed_.size() > kExposedVariationalLimit && opts_.paths) {
        method_ = BackwardMethod::JointRejection;
      } else {
        const Ball box(bounding_ball(A_).center, bounding_ball(A_).radius + std::max<std::int64_t>(2, opts_.field_margin));
        method_ = std::pow(2.0 * box.radius + 1, d_) <= 2e7 ? BackwardMethod::HTransform : BackwardMethod::Rejection;
      }
    }
    if (method_ == BackwardMethod::JointRejection && !opts_.paths)
      throw std::invalid_argument("sampler: anchors-only mode needs an explicit equilibrium measure");
    if (method_ == BackwardMethod::JointRejection) {
      const std::shared_ptr<const SiteSet> view(&A_, [](const SiteSet*) {});
      cap_ = capacity_mc_certified(set_region(view), opts_.mc_walkers, RngStream(opts_.capacity_seed, A_.size()));
    } else {
      cap_ = capacity_variational(A_);
      anchor_sites_ = cap_.measure.sites;
      anchor_weights_ = cap_.measure.normalized();
      // Vose alias table.
      const std::size_t n = anchor_weights_.size();
      alias_prob_.assign(n, 0.0);
      alias_idx_.assign(n, 0);
      std::vector<double> scaled(n);
      std::vector<std::uint32_t> small, large;
      for (std::size_t i = 0; i < n; ++i) {
        scaled[i] = anchor_weights_[i] * n;
        (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
      }
      while (!small.empty() && !large.empty()) {
        const auto s = small.back(), l = large.back();
        small.pop_back();
        alias_prob_[s] = scaled[s];
        alias_idx_[s] = l;
        scaled[l] = (scaled[l] + scaled[s]) - 1.0;
        if (scaled[l] < 1.0) {
          large.pop_back();
          small.push_back(l);
        }
      }
      for (auto i : large) alias_prob_[i] = 1.0;
      for (auto i : small) alias_prob_[i] = 1.0;
      if (method_ == BackwardMethod::HTransform) {
        const Ball bb = bounding_ball(A_);
        const Ball box(bb.center, bb.radius + std::max<std::int64_t>(2, opts_.field_margin));
        field_ = std::make_unique<EscapeField>(A_, box, cap_.measure, GreenTable::shared(d_));
      }
    }
    certs_.push_back({bounding_ball(A_), (cap_.capacity + 3 * cap_.stderr) * (1 + 1e-3)});
  }
  const std::vector<Ball> extra = opts_.certify.value_or(std::vector<Ball>{window_});
  for (const Ball& b : extra) {
    if (b.dim() != d_) throw std::invalid_argument("sampler: certificate ball dimension mismatch");
    certs_.push_back({b, ball_capacity_upper(d_, b.radius)});
  }
  for (const auto& c : certs_) {
    cert_dist_.push_back(c.bound.radius + required_distance(d_, c.cap_upper, opts_.eps_trunc));
    stop_radius_ = std::max(stop_radius_, sup_norm(c.bound.center) + cert_dist_.back());
  }
  stop_radius_ = std::max(stop_radius_, sup_norm(window_.center) + window_.radius + 1);
}

Point Sampler::draw_anchor(RngStream& r) const {
  const auto n = static_cast<std::uint32_t>(anchor_sites_.size());
  const std::uint32_t i = r.below(n);
  return anchor_sites_[r.uniform() < alias_prob_[i] ? i : alias_idx_[i]];
}

bool Sampler::certified(const std::int64_t* x) const {
  std::int64_t m = 0;
  for (int k = 0; k < d_; ++k) m = std::max(m, std::abs(x[k] - window_.center.x[k]));
  if (m <= window_.radius) return false;
  for (std::size_t j = 0; j < certs_.size(); ++j) {
    const auto& c = certs_[j].bound.center;
    std::int64_t mj = 0;
    for (int k = 0; k < d_; ++k) mj = std::max(mj, std::abs(x[k] - c.x[k]));
    if (mj < cert_dist_[j]) return false;
  }
  return true;
}

void Sampler::run_until_certified(std::array<std::int64_t, kMaxDim>& x, std::vector<std::uint8_t>& moves,
                                  std::size_t min_steps, const SiteSet* avoid, RngStream& r, std::int64_t& closest,
                                  bool& hit) const {
  hit = false;
  const auto two_d = static_cast<std::uint32_t>(2 * d_);
  const std::size_t start = moves.size();
  if (min_steps == 0 && certified(x.data())) return;
  for (;;) {
    const auto k = static_cast<std::uint8_t>(r.below(two_d));
    const int c = k >> 1;
    x[c] += (k & 1) ? -1 : 1;
    moves.push_back(k);
    if (std::abs(x[c]) < closest) closest = std::min(closest, sup_norm_raw(x.data(), d_));
    if (avoid && avoid->contains(x.data())) {
      hit = true;
      return;
    }
    const std::size_t steps = moves.size() - start;
    if (steps < min_steps) continue;
    bool candidate = steps == min_steps;
    if (!candidate) {
      // The stop condition can only switch on when the moved coordinate
      // reaches one of the thresholds.
      if (std::abs(x[c] - window_.center.x[c]) == window_.radius + 1) candidate = true;
      for (std::size_t j = 0; j < certs_.size() && !candidate; ++j)
        candidate = std::abs(x[c] - certs_[j].bound.center.x[c]) == cert_dist_[j];
    }
    if (candidate && certified(x.data())) return;
  }
}

WalkPath Sampler::forward_half(const Point& x0, RngStream& r, std::int64_t& closest) const {
  WalkPath p{x0, {}, r.seed(), r.stream()};
  auto x = x0.x;
  bool hit;
  run_until_certified(x, p.moves, opts_.min_forward_steps, nullptr, r, closest, hit);
  return p;
}

WalkPath Sampler::backward_half(Point& anchor, RngStream& r, std::int64_t& closest, std::uint64_t& restarts,
                                bool redraw_anchor) const {
  WalkPath p{anchor, {}, r.seed(), r.stream()};
  const auto two_d = static_cast<std::uint32_t>(2 * d_);
  if (method_ != BackwardMethod::HTransform) {
    for (;;) {
      if (redraw_anchor) anchor = exposed_[r.below(static_cast<std::uint32_t>(exposed_.size()))];
      p.start = anchor;
      p.moves.clear();
      auto x = anchor.x;
      std::int64_t cl = sup_norm(anchor);
      bool hit;
      run_until_certified(x, p.moves, 1, &A_, r, cl, hit);
      if (!hit) {
        closest = std::min(closest, cl);
        return p;
      }
      ++restarts;
    }
  }
  // Doob transform inside the field box.
  const EscapeField& h = *field_;
  auto x = anchor.x;
  std::int64_t cl = sup_norm(anchor);
  std::array<double, 2 * kMaxDim> w{};
  do {
    double total = 0;
    for (std::uint32_t k = 0; k < two_d; ++k) {
      x[k >> 1] += (k & 1) ? -1 : 1;
      w[k] = h(x.data());
      total += w[k];
      x[k >> 1] -= (k & 1) ? -1 : 1;
    }
    if (!(total > 0)) throw std::runtime_error("sampler: escape field vanishes around " + anchor.str());
    double v = r.uniform() * total;
    std::uint32_t k = 0;
    while (k + 1 < two_d && (v -= w[k]) >= 0) ++k;
    if (w[k] == 0) {  // rounding at the upper end: take the last positive weight
      k = two_d - 1;
      while (w[k] == 0) --k;
    }
    x[k >> 1] += (k & 1) ? -1 : 1;
    p.moves.push_back(static_cast<std::uint8_t>(k));
    cl = std::min(cl, sup_norm_raw(x.data(), d_));
  } while (!h.on_surface(x.data()));
  // Outside the box: the conditioned walk from the exit point is drawn by
  // restarting from that point whenever the proposal re-enters A.
  const auto checkpoint = p.moves.size();
  const auto x_exit = x;
  const std::int64_t cl_exit = cl;
  for (;;) {
    bool hit;
    run_until_certified(x, p.moves, 0, &A_, r, cl, hit);
    if (!hit) break;
    ++restarts;
    p.moves.resize(checkpoint);
    x = x_exit;
    cl = cl_exit;
  }
  closest = std::min(closest, cl);
  return p;
}

InterlacementSample Sampler::sample(double u, RngStream rng, std::uint64_t sample_id) const {
  if (!(u > 0)) throw std::invalid_argument("sample: u must be positive");
  InterlacementSample s;
  s.d = d_;
  s.u = u;
  s.A = A_;
  s.window = window_;
  s.eps_trunc = opts_.eps_trunc;
  s.cap_A = cap_.capacity;
  s.seed = rng.seed();
  s.stream = rng.stream();
  s.sample_id = sample_id;
  s.has_paths = opts_.paths;
  if (A_.empty()) return s;
  RngStream count_rng = rng.child(0);
  std::poisson_distribution<long> pois(u * cap_.capacity);
  const long n = pois(count_rng);
  s.trajectories.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Trajectory& t = s.trajectories[i];
    t.sample_id = sample_id;
    t.index = static_cast<std::uint64_t>(i);
    RngStream tr = rng.child(static_cast<std::uint64_t>(i) + 1);
    const bool joint = method_ == BackwardMethod::JointRejection;
    if (!joint) t.anchor = draw_anchor(tr);
    if (!opts_.paths) {
      t.forward.start = t.backward.start = t.anchor;
      t.closest_approach = sup_norm(t.anchor);
      continue;
    }
    RngStream fr = tr.child(0), br = tr.child(1);
    std::int64_t closest = joint ? std::numeric_limits<std::int64_t>::max() : sup_norm(t.anchor);
    t.backward = backward_half(t.anchor, br, closest, t.backward_restarts, joint);
    t.forward = forward_half(t.anchor, fr, closest);
    t.closest_approach = closest;
    if (opts_.record_traces) t.trace = window_trace(t, window_);
  }
  return s;
}

InterlacementSample sample(double u, const SiteSet& A, const Ball& window, double eps_trunc, RngStream rng,
                           SamplerOptions opts) {
  opts.eps_trunc = eps_trunc;
  return Sampler(A, window, opts).sample(u, rng);
}

std::vector<SiteKey> window_trace(const Trajectory& t, const Ball& window) {
  std::vector<SiteKey> keys;
  const int d = window.dim();
  // Track the sup-distance to the window centre; a move changes it by at
  // most one, so full recomputation is needed only near the boundary.
  auto walk = [&](const WalkPath& p) {
    std::array<std::int64_t, kMaxDim> y{};
    for (int k = 0; k < d; ++k) y[k] = p.start.x[k] - window.center.x[k];
    std::int64_t m = sup_norm_raw(y.data(), d);
    auto emit = [&] {
      std::array<std::int64_t, kMaxDim> z{};
      for (int k = 0; k < d; ++k) z[k] = y[k] + window.center.x[k];
      keys.push_back(pack(z.data(), d));
    };
    if (m <= window.radius) emit();
    for (std::uint8_t mv : p.moves) {
      apply_move(y.data(), mv);
      const std::int64_t a = std::abs(y[mv >> 1]);
      if (a > m) m = a;
      else if (a + 1 == m) m = sup_norm_raw(y.data(), d);
      if (m <= window.radius) emit();
    }
  };
  walk(t.forward);
  walk(t.backward);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

namespace {
bool same_ball(const Ball& a, const Ball& b) { return a.radius == b.radius && a.center == b.center; }
}  // namespace

InterlacementSample superpose(const InterlacementSample& s1, const InterlacementSample& s2) {
  if (s1.d != s2.d || !same_ball(s1.window, s2.window) || !(s1.A == s2.A))
    throw std::invalid_argument("superpose: samples differ in A, window or dimension");
  InterlacementSample out = s1;
  out.u = s1.u + s2.u;
  out.has_paths = s1.has_paths && s2.has_paths;
  out.trajectories.insert(out.trajectories.end(), s2.trajectories.begin(), s2.trajectories.end());
  return out;
}

std::pair<InterlacementSample, InterlacementSample> split_by_ball(const InterlacementSample& s, std::int64_t r) {
  if (r < 0 || !s.window.contains(Ball(Point::zero(s.d), r)))
    throw std::invalid_argument("split_by_ball: B(0, r) must lie inside the window");
  InterlacementSample near = s, far = s;
  near.trajectories.clear();
  far.trajectories.clear();
  for (const auto& t : s.trajectories) (t.closest_approach <= r ? near : far).trajectories.push_back(t);
  return {std::move(near), std::move(far)};
}

SiteSet occupation_field(const InterlacementSample& s, const Ball& region) {
  if (!s.window.contains(region)) throw std::invalid_argument("occupation_field: region must lie inside the window");
  SiteSet out(s.d);
  for (const auto& t : s.trajectories) {
    const auto trace = (t.trace.empty() && s.has_paths) ? window_trace(t, s.window) : t.trace;
    if (trace.empty()) {
      if (region.contains(t.anchor)) out.insert(t.anchor);
      continue;
    }
    for (SiteKey k : trace)
      if (region.contains(unpack(k, s.d))) out.insert_key(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

std::string coords(const Point& p) {
  std::string out;
  for (int k = 0; k < p.d; ++k) out += (k ? "," : "") + std::to_string(p.x[k]);
  return out;
}

Point parse_coords(const std::string& s, int d) {
  Point p(d);
  std::istringstream is(s);
  std::string tok;
  int k = 0;
  while (std::getline(is, tok, ',')) {
    if (k >= d) throw std::runtime_error("sample parse: too many coordinates");
    p.x[k++] = std::stoll(tok);
  }
  if (k != d) throw std::runtime_error("sample parse: too few coordinates");
  return p;
}

std::string rle(const std::vector<std::uint8_t>& m) {
  if (m.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < m.size();) {
    std::size_t j = i;
    while (j < m.size() && m[j] == m[i]) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(int(m[i]));
    if (j - i > 1) out += 'x' + std::to_string(j - i);
    i = j;
  }
  return out;
}

std::vector<std::uint8_t> parse_rle(const std::string& s, std::size_t len) {
  std::vector<std::uint8_t> m;
  if (s != "-") {
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      const auto x = tok.find('x');
      const int k = std::stoi(tok.substr(0, x));
      const std::size_t n = x == std::string::npos ? 1 : std::stoull(tok.substr(x + 1));
      m.insert(m.end(), n, static_cast<std::uint8_t>(k));
    }
  }
  if (m.size() != len) throw std::runtime_error("sample parse: move count mismatch");
  return m;
}

}  // namespace

void write_sample(std::ostream& os, const InterlacementSample& s) {
  std::ostringstream u, cap, eps;
  u.precision(17);
  cap.precision(17);
  eps.precision(17);
  u << s.u;
  cap << s.cap_A;
  eps << s.eps_trunc;
  os << "sample " << s.sample_id << " d " << s.d << " u " << u.str() << " seed " << s.seed << " stream " << s.stream
     << " eps " << eps.str() << " cap " << cap.str() << " window " << coords(s.window.center) << ' '
     << s.window.radius << " paths " << (s.has_paths ? 1 : 0) << " count " << s.trajectories.size() << '\n';
  os << "A " << s.A.size();
  for (const Point& p : s.A.points()) os << ' ' << coords(p);
  os << '\n';
  for (const auto& t : s.trajectories) {
    os << "traj " << t.sample_id << ' ' << t.index << " anchor " << coords(t.anchor) << " closest "
       << t.closest_approach << " restarts " << t.backward_restarts << " traced " << (t.trace.empty() ? 0 : 1)
       << " fwd " << t.forward.seed << ' ' << t.forward.stream << ' ' << t.forward.moves.size() << ' '
       << rle(t.forward.moves) << " bwd " << t.backward.seed << ' ' << t.backward.stream << ' '
       << t.backward.moves.size() << ' ' << rle(t.backward.moves) << '\n';
  }
  os << "end\n";
}

std::string serialize(const InterlacementSample& s) {
  std::ostringstream os;
  write_sample(os, s);
  return os.str();
}

InterlacementSample read_sample(std::istream& is) {
  InterlacementSample s;
  std::string kw, wc;
  std::size_t count = 0;
  int paths = 1;
  std::int64_t wr = 0;
  is >> kw;
  if (kw != "sample") throw std::runtime_error("sample parse: expected 'sample'");
  is >> s.sample_id >> kw >> s.d >> kw >> s.u >> kw >> s.seed >> kw >> s.stream >> kw >> s.eps_trunc >> kw >>
      s.cap_A >> kw >> wc >> wr >> kw >> paths >> kw >> count;
  if (!is) throw std::runtime_error("sample parse: malformed header");
  s.window = Ball(parse_coords(wc, s.d), wr);
  s.has_paths = paths != 0;
  std::size_t na = 0;
  is >> kw >> na;
  if (kw != "A") throw std::runtime_error("sample parse: expected 'A'");
  s.A = SiteSet(s.d);
  for (std::size_t i = 0; i < na; ++i) {
    std::string c;
    is >> c;
    s.A.insert(parse_coords(c, s.d));
  }
  for (std::size_t i = 0; i < count; ++i) {
    Trajectory t;
    std::string anchor, fm, bm;
    int traced = 0;
    std::size_t fl = 0, bl = 0;
    is >> kw;
    if (kw != "traj") throw std::runtime_error("sample parse: expected 'traj'");
    is >> t.sample_id >> t.index >> kw >> anchor >> kw >> t.closest_approach >> kw >> t.backward_restarts >> kw >>
        traced >> kw >> t.forward.seed >> t.forward.stream >> fl >> fm >> kw >> t.backward.seed >> t.backward.stream >>
        bl >> bm;
    if (!is) throw std::runtime_error("sample parse: malformed trajectory");
    t.anchor = parse_coords(anchor, s.d);
    t.forward.start = t.backward.start = t.anchor;
    t.forward.moves = parse_rle(fm, fl);
    t.backward.moves = parse_rle(bm, bl);
    if (traced) t.trace = window_trace(t, s.window);
    s.trajectories.push_back(std::move(t));
  }
  is >> kw;
  if (kw != "end") throw std::runtime_error("sample parse: expected 'end'");
  return s;
}

}  // namespace interlace
