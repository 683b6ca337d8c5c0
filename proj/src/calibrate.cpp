#include "splade/calibrate.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <string>

#include "splade/error.hpp"
#include "splade/single_patch.hpp"

namespace splade {

BoundaryLayer::BoundaryLayer(Shape dims, double beta) : dims_(std::move(dims)), beta_(beta) {
  checked_cell_count(dims_);
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("boundary-layer beta must lie in (0, 1)");
  thickness_.resize(dims_.size());
  for (std::size_t k = 0; k < dims_.size(); ++k) thickness_[k] = std::min(dims_[k], floor_pow(dims_[k], beta));
  if (count() == 0) throw DomainError("boundary layer is empty");
}

bool BoundaryLayer::contains(std::span<const Index> cell) const {
  for (std::size_t k = 0; k < dims_.size(); ++k)
    if (cell[k] < thickness_[k] || cell[k] >= dims_[k] - thickness_[k]) return true;
  return false;
}

Index BoundaryLayer::count() const {
  Index total = 1, interior = 1;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    total *= dims_[k];
    interior *= std::max<Index>(0, dims_[k] - 2 * thickness_[k]);
  }
  return total - interior;
}

std::vector<std::uint8_t> BoundaryLayer::mask() const {
  const Index n = checked_cell_count(dims_);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n));
  Shape cell(dims_.size(), 0);
  std::size_t flat = 0;
  do {
    out[flat++] = contains(cell) ? 1 : 0;
  } while (next_index(cell, dims_));
  return out;
}

bool BoundaryLayer::intersects(const Rect& r) const {
  if (r.empty()) return false;
  for (std::size_t k = 0; k < dims_.size(); ++k)
    if (r.lo[k] < thickness_[k] || r.hi[k] > dims_[k] - thickness_[k]) return true;
  return false;
}

// ---------------------------------------------------------------------------

KernelSpec KernelSpec::defaults(const Shape& dims) {
  KernelSpec spec;
  const double exponent = 1.0 / (2.0 * static_cast<double>(dims.size()));
  for (Index n : dims) spec.bandwidths.push_back(std::ceil(std::pow(static_cast<double>(n), exponent) - 1e-12));
  return spec;
}

double KernelSpec::profile(double x) const {
  const double a = std::abs(x);
  if (a >= 1.0) return 0.0;
  switch (kind) {
    case KernelKind::bartlett:
      return 1.0 - a;
    case KernelKind::parzen:
      return a <= 0.5 ? 1.0 - 6.0 * a * a + 6.0 * a * a * a : 2.0 * std::pow(1.0 - a, 3);
  }
  return 0.0;
}

double KernelSpec::weight(std::span<const Index> lag) const {
  double w = 1.0;
  for (std::size_t k = 0; k < lag.size(); ++k) w *= profile(static_cast<double>(lag[k]) / bandwidths[k]);
  return w;
}

// ---------------------------------------------------------------------------

double masked_mean(const Grid& grid, std::span<const std::uint8_t> mask) {
  if (static_cast<Index>(mask.size()) != grid.size()) throw DomainError("mask size does not match the grid");
  long double sum = 0.0L;
  Index count = 0;
  for (Index i = 0; i < grid.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      sum += grid[i];
      ++count;
    }
  }
  if (count == 0) throw DomainError("empty cell subset");
  return static_cast<double>(sum / static_cast<long double>(count));
}

double estimate_mu0(const Grid& grid, double beta) {
  const BoundaryLayer layer(grid.dims(), beta);
  return masked_mean(grid, layer.mask());
}

namespace {

// sum over i with i and i+lag both in the grid and in the mask of c_i c_{i+lag}.
long double lagged_product(const Grid& grid, const std::vector<double>& centered,
                           std::span<const std::uint8_t> mask, const Shape& lag) {
  const int d = grid.rank();
  const Shape& dims = grid.dims();
  const Shape& strides = grid.strides();
  Shape begin(d), extent(d);
  Index offset = 0;
  for (int k = 0; k < d; ++k) {
    begin[k] = std::max<Index>(0, -lag[k]);
    const Index end = std::min(dims[k], dims[k] - lag[k]);
    extent[k] = end - begin[k];
    if (extent[k] <= 0) return 0.0L;
    offset += lag[k] * strides[k];
  }
  // Odometer over all axes but the last; the last axis runs contiguously.
  Shape outer(extent.begin(), extent.end() - 1);
  Shape pos(d - 1, 0);
  long double total = 0.0L;
  const Index run = extent[d - 1];
  while (true) {
    Index base = begin[d - 1];
    for (int k = 0; k < d - 1; ++k) base += (begin[k] + pos[k]) * strides[k];
    double row = 0.0;
    for (Index t = 0; t < run; ++t) {
      const auto i = static_cast<std::size_t>(base + t);
      const auto j = static_cast<std::size_t>(base + t + offset);
      if (mask[i] && mask[j]) row += centered[i] * centered[j];
    }
    total += row;
    if (d == 1 || !next_index(pos, outer)) break;
  }
  return total;
}

}  // namespace

LrvEstimate estimate_lrv_masked(const Grid& grid, std::span<const std::uint8_t> mask, const KernelSpec& kernel) {
  const int d = grid.rank();
  if (static_cast<int>(kernel.bandwidths.size()) != d) throw DomainError("kernel needs one bandwidth per axis");
  for (double b : kernel.bandwidths)
    if (!(b >= 1.0)) throw DomainError("kernel bandwidths must be >= 1");
  const double mean = masked_mean(grid, mask);
  Index count = 0;
  std::vector<double> centered(static_cast<std::size_t>(grid.size()), 0.0);
  for (Index i = 0; i < grid.size(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      centered[static_cast<std::size_t>(i)] = grid[i] - mean;
      ++count;
    }
  }

  // Lags with every |h_k| < B_k; the kernel vanishes outside.
  Shape reach(d), width(d);
  for (int k = 0; k < d; ++k) {
    reach[k] = static_cast<Index>(std::ceil(kernel.bandwidths[k])) - 1;
    width[k] = 2 * reach[k] + 1;
  }
  long double lag0 = 0.0L, rest = 0.0L;
  Shape pos(d, 0), lag(d);
  do {
    for (int k = 0; k < d; ++k) lag[k] = pos[k] - reach[k];
    // Visit each +/- pair once: keep lags whose first non-zero entry is positive.
    int sign = 0;
    for (int k = 0; k < d && sign == 0; ++k) sign = (lag[k] > 0) - (lag[k] < 0);
    if (sign < 0) continue;
    const double w = kernel.weight(lag);
    if (w == 0.0) continue;
    const long double s = lagged_product(grid, centered, mask, lag);
    if (sign == 0) {
      lag0 = s;
    } else {
      rest += 2.0L * w * s;
    }
  } while (next_index(pos, width));

  LrvEstimate est;
  const long double n = static_cast<long double>(count);
  est.plain_variance = static_cast<double>(lag0 / n);
  est.sigma2 = static_cast<double>((lag0 + rest) / n);
  if (est.sigma2 < 0.0) {
    est.sigma2 = est.plain_variance;
    est.clamped = true;
  }
  return est;
}

LrvEstimate estimate_lrv(const Grid& grid, double beta, const KernelSpec& kernel) {
  const BoundaryLayer layer(grid.dims(), beta);
  return estimate_lrv_masked(grid, layer.mask(), kernel);
}

double threshold_q(double sigma, double block_volume, Index num_blocks, double level) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("threshold needs sigma > 0");
  if (!(block_volume >= 1.0)) throw DomainError("threshold needs block volume >= 1");
  if (num_blocks < 1) throw DomainError("threshold needs at least one block");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("threshold level must lie in (0, 1)");
  // Two-sided tail per block: P(|Z| > z) = 1 - (1 - level)^(1/M).
  const double tail = -std::expm1(std::log1p(-level) / static_cast<double>(num_blocks));
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(boost::math::complement(standard, tail / 2.0));
  return sigma / std::sqrt(block_volume) * z;
}

Variogram empirical_variogram(const Grid& grid, int axis, Index max_lag) {
  if (axis < 0 || axis >= grid.rank()) throw DomainError("variogram axis out of range");
  const Index n_axis = grid.dims()[axis];
  if (max_lag < 1 || max_lag >= n_axis) throw DomainError("variogram max_lag must be in [1, n_axis)");

  Variogram out;
  long double sum = 0.0L;
  for (double v : grid.values()) sum += v;
  const long double mean = sum / static_cast<long double>(grid.size());
  long double ss = 0.0L;
  for (double v : grid.values()) ss += (v - mean) * (v - mean);
  out.gamma0 = static_cast<double>(ss / static_cast<long double>(grid.size()));

  const Index stride = grid.strides()[axis];
  out.gamma.resize(static_cast<std::size_t>(max_lag));
  Shape cell(grid.rank(), 0);
  for (Index h = 1; h <= max_lag; ++h) {
    long double acc = 0.0L;
    Index pairs = 0;
    std::fill(cell.begin(), cell.end(), 0);
    Index flat = 0;
    do {
      if (cell[axis] + h < n_axis) {
        const double diff = grid[flat + h * stride] - grid[flat];
        acc += diff * diff;
        ++pairs;
      }
      ++flat;
    } while (next_index(cell, grid.dims()));
    out.gamma[static_cast<std::size_t>(h - 1)] = static_cast<double>(0.5L * acc / static_cast<long double>(pairs));
  }
  return out;
}

}  // namespace splade
