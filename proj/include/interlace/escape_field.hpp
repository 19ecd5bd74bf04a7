#pragma once

#include <cstdint>
#include <vector>

#include "interlace/capacity.hpp"
#include "interlace/green.hpp"
#include "interlace/lattice.hpp"

namespace interlace {

// h(z) = P_z(H(K) = infinity) on a box around K: zero on K, discrete
// harmonic on the rest of the box interior, and equal to 1 - (hitting
// formula) on the box surface. Stored densely over the box.
class EscapeField {
 public:
  // Requires K inside the box with margin >= 2. Throws std::runtime_error
  // if conjugate gradients does not reach `tolerance` (max residual).
  EscapeField(const SiteSet& K, Ball box, const EquilibriumMeasure& e, const GreenTable& g,
              double tolerance = 1e-13, std::size_t max_cells = 20'000'000);

  int dim() const { return d_; }
  const Ball& box() const { return box_; }
  bool in_box(const std::int64_t* x) const;
  bool on_surface(const std::int64_t* x) const;
  // x must lie in the box.
  double operator()(const std::int64_t* x) const { return h_[index(x)]; }
  double at(const Point& x) const;

  int iterations() const { return iterations_; }
  // max over box-interior sites outside K of |h(z) - mean of its neighbours|.
  double max_harmonic_residual() const;
  // max over the same sites of |sum_z h(z) / (2d h(y)) - 1|.
  double max_normalization_error() const;
  bool clamp_warning() const { return clamp_warning_; }

 private:
  std::size_t index(const std::int64_t* x) const {
    std::size_t i = 0;
    for (int k = 0; k < d_; ++k) i += static_cast<std::size_t>(x[k] - lo_[k]) * stride_[k];
    return i;
  }
  template <class F>
  void for_each_cell(F&& f) const;

  int d_;
  Ball box_;
  std::size_t side_ = 0;
  std::array<std::int64_t, kMaxDim> lo_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::vector<double> h_;
  std::vector<std::uint8_t> kind_;  // 0 unknown, 1 in K, 2 surface
  int iterations_ = 0;
  bool clamp_warning_ = false;
};

}  // namespace interlace
