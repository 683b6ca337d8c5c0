#pragma once

// Baseline level, long-run variance and first-stage threshold estimation.

#include <cstdint>
#include <span>
#include <vector>

#include "splade/grid.hpp"

namespace splade {

/// Shell of thickness floor(n_k^beta) along every face of the domain.
/// A cell belongs to the layer when some 1-based coordinate i_k satisfies
/// i_k <= n_k^beta or i_k >= n_k - n_k^beta + 1.
class BoundaryLayer {
 public:
  BoundaryLayer(Shape dims, double beta);

  double beta() const { return beta_; }
  const Shape& thickness() const { return thickness_; }
  bool contains(std::span<const Index> cell) const;
  Index count() const;
  /// One byte per grid cell, row-major: 1 inside the layer.
  std::vector<std::uint8_t> mask() const;
  bool intersects(const Rect& r) const;

 private:
  Shape dims_;
  double beta_;
  Shape thickness_;
};

enum class KernelKind { bartlett, parzen };

struct KernelSpec {
  KernelKind kind = KernelKind::bartlett;
  std::vector<double> bandwidths;

  /// Bartlett with B_k = ceil(n_k^(1/(2d))).
  static KernelSpec defaults(const Shape& dims);

  /// Product kernel weight for an integer lag vector.
  double weight(std::span<const Index> lag) const;
  /// Scalar kernel, symmetric with support [-1, 1] and K(0) = 1.
  double profile(double x) const;
};

double estimate_mu0(const Grid& grid, double beta);

struct LrvEstimate {
  double sigma2 = 0.0;
  double plain_variance = 0.0;  // lag-0 term alone
  bool clamped = false;         // raw kernel sum was negative
};

LrvEstimate estimate_lrv(const Grid& grid, double beta, const KernelSpec& kernel);

/// Kernel long-run variance over an arbitrary cell subset (mask byte != 0):
/// |S|^-1 * sum_{i,j in S} K((i-j)/B) (X_i - mean_S)(X_j - mean_S).
LrvEstimate estimate_lrv_masked(const Grid& grid, std::span<const std::uint8_t> mask, const KernelSpec& kernel);

double masked_mean(const Grid& grid, std::span<const std::uint8_t> mask);

/// (1 - level) quantile of max_s |sigma W(B_s)| / |B_s| over num_blocks
/// disjoint blocks of volume block_volume, for a standard Brownian sheet W:
/// (sigma / sqrt(v)) * PhiInv((1 + (1 - level)^(1/M)) / 2).
double threshold_q(double sigma, double block_volume, Index num_blocks, double level);

struct Variogram {
  double gamma0 = 0.0;        // sample variance
  std::vector<double> gamma;  // gamma[h-1] for lags h = 1..max_lag
};

/// Semivariogram along one axis: half the mean squared increment at each lag.
Variogram empirical_variogram(const Grid& grid, int axis, Index max_lag);

}  // namespace splade
