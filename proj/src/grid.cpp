#include "splade/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "splade/error.hpp"

namespace splade {

Index checked_cell_count(const Shape& dims) {
  if (dims.empty() || dims.size() > kMaxRank) {
    throw DomainError("grid rank must be between 1 and 4, got " + std::to_string(dims.size()));
  }
  // Leave headroom for the padded prefix table.
  constexpr Index limit = Index{1} << 40;
  Index count = 1;
  for (Index n : dims) {
    if (n < 1) throw DomainError("grid extents must be >= 1");
    if (n + 1 > limit / (count + 1)) throw DomainError("grid dimensions overflow the addressable size");
    count *= n;
  }
  return count;
}

Shape row_major_strides(const Shape& dims) {
  Shape strides(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k) strides[k] = strides[k + 1] * dims[k + 1];
  return strides;
}

bool next_index(std::span<Index> cell, const Shape& dims) {
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    if (++cell[k] < dims[k]) return true;
    cell[k] = 0;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Rect

Rect Rect::full(const Shape& dims) { return Rect{Shape(dims.size(), 0), dims}; }

bool Rect::empty() const {
  if (lo.empty()) return true;
  for (std::size_t k = 0; k < lo.size(); ++k)
    if (hi[k] <= lo[k]) return true;
  return false;
}

Index Rect::extent(int axis) const { return std::max<Index>(0, hi[axis] - lo[axis]); }

Index Rect::volume() const {
  if (empty()) return 0;
  Index v = 1;
  for (int k = 0; k < rank(); ++k) v *= hi[k] - lo[k];
  return v;
}

bool Rect::contains(const Rect& other) const {
  if (other.empty()) return true;
  if (empty() || other.rank() != rank()) return false;
  for (int k = 0; k < rank(); ++k)
    if (other.lo[k] < lo[k] || other.hi[k] > hi[k]) return false;
  return true;
}

bool Rect::contains_cell(std::span<const Index> cell) const {
  for (int k = 0; k < rank(); ++k)
    if (cell[k] < lo[k] || cell[k] >= hi[k]) return false;
  return !lo.empty();
}

bool Rect::within(const Shape& dims) const {
  if (lo.size() != dims.size() || hi.size() != dims.size()) return false;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (lo[k] < 0 || hi[k] > dims[k] || lo[k] > hi[k]) return false;
  return true;
}

Rect intersect(const Rect& a, const Rect& b) {
  if (a.rank() != b.rank()) throw DomainError("rectangles of different rank");
  Rect r{a.lo, a.hi};
  for (int k = 0; k < a.rank(); ++k) {
    r.lo[k] = std::max(a.lo[k], b.lo[k]);
    r.hi[k] = std::max(r.lo[k], std::min(a.hi[k], b.hi[k]));
  }
  return r;
}

Index sym_diff_volume(const Rect& a, const Rect& b) {
  const Index both = (a.empty() || b.empty()) ? 0 : intersect(a, b).volume();
  return a.volume() + b.volume() - 2 * both;
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(Shape dims, double fill) : dims_(std::move(dims)) {
  const Index n = checked_cell_count(dims_);
  strides_ = row_major_strides(dims_);
  data_.assign(static_cast<std::size_t>(n), fill);
}

Grid::Grid(Shape dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
  const Index n = checked_cell_count(dims_);
  if (static_cast<Index>(data_.size()) != n)
    throw DomainError("grid data length " + std::to_string(data_.size()) + " does not match dims product " +
                      std::to_string(n));
  strides_ = row_major_strides(dims_);
}

std::size_t Grid::flat_index(std::span<const Index> cell) const {
  Index flat = 0;
  for (int k = 0; k < rank(); ++k) flat += cell[k] * strides_[k];
  return static_cast<std::size_t>(flat);
}

Grid Grid::crop(const Rect& r) const {
  if (!r.within(dims_) || r.empty()) throw DomainError("crop rectangle outside the grid or empty");
  Shape sub_dims(dims_.size());
  for (int k = 0; k < rank(); ++k) sub_dims[k] = r.hi[k] - r.lo[k];
  Grid out(sub_dims);
  Shape local(dims_.size(), 0);
  Shape cell(dims_.size());
  Index flat = 0;
  do {
    for (int k = 0; k < rank(); ++k) cell[k] = local[k] + r.lo[k];
    out.data_[static_cast<std::size_t>(flat++)] = at(cell);
  } while (next_index(local, sub_dims));
  return out;
}

// ---------------------------------------------------------------------------
// PrefixSum

PrefixSum::PrefixSum(const Grid& grid) : dims_(grid.dims()), cells_(grid.size()) {
  const int d = grid.rank();
  Shape padded(d);
  for (int k = 0; k < d; ++k) padded[k] = dims_[k] + 1;
  table_strides_ = row_major_strides(padded);
  Index table_size = 1;
  for (Index p : padded) table_size *= p;
  table_.assign(static_cast<std::size_t>(table_size), 0.0);

  // Scatter cells to the interior of the padded table.
  Shape cell(d, 0);
  Index flat = 0;
  do {
    Index t = 0;
    for (int k = 0; k < d; ++k) t += (cell[k] + 1) * table_strides_[k];
    table_[static_cast<std::size_t>(t)] = grid[flat++];
  } while (next_index(cell, dims_));

  const bool compensated = cells_ > kCompensatedSumThreshold;
  std::vector<double> carry;
  if (compensated) carry.resize(table_.size());

  // One cumulative pass per axis. Visiting entries in increasing order means
  // the predecessor along the axis is already final.
  for (int k = 0; k < d; ++k) {
    const Index step = table_strides_[k];
    const Index extent = padded[k];
    if (compensated) std::fill(carry.begin(), carry.end(), 0.0);
    for (Index t = 0; t < table_size; ++t) {
      if ((t / step) % extent == 0) continue;
      const auto ti = static_cast<std::size_t>(t);
      const auto pi = static_cast<std::size_t>(t - step);
      if (compensated) {
        // Kahan step: running sum table_[pi] with compensation carry[pi].
        const double y = table_[ti] - carry[pi];
        const double s = table_[pi] + y;
        carry[ti] = (s - table_[pi]) - y;
        table_[ti] = s;
      } else {
        table_[ti] += table_[pi];
      }
    }
  }
  total_ = table_.back();
}

double PrefixSum::corner(std::span<const Index> c) const {
  Index t = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) t += c[k] * table_strides_[k];
  return table_[static_cast<std::size_t>(t)];
}

double PrefixSum::rect_sum(const Rect& r) const {
  if (!r.within(dims_)) throw DomainError("rectangle outside the grid");
  if (r.empty()) return 0.0;
  const int d = static_cast<int>(dims_.size());
  double sum = 0.0;
  for (unsigned mask = 0; mask < (1u << d); ++mask) {
    Index t = 0;
    int lows = 0;
    for (int k = 0; k < d; ++k) {
      if (mask & (1u << k)) {
        t += r.hi[k] * table_strides_[k];
      } else {
        t += r.lo[k] * table_strides_[k];
        ++lows;
      }
    }
    const double v = table_[static_cast<std::size_t>(t)];
    sum += (lows % 2 == 0) ? v : -v;
  }
  return sum;
}

double contrast_from_sums(double rect_sum, Index volume, double total, Index cells) {
  if (volume <= 0 || volume >= cells) throw DomainError("contrast needs 0 < |I| < n");
  const double k = static_cast<double>(volume);
  const double n = static_cast<double>(cells);
  return (rect_sum - k * total / n) / std::sqrt(k * (n - k));
}

double contrast(const PrefixSum& ps, const Rect& r) {
  return contrast_from_sums(ps.rect_sum(r), r.volume(), ps.total(), ps.size());
}

// ---------------------------------------------------------------------------
// PatchSet

void PatchSet::validate(const Shape& dims) const {
  for (std::size_t j = 0; j < patches.size(); ++j) {
    const auto& p = patches[j];
    if (!p.rect.within(dims) || p.rect.empty())
      throw DomainError("patch " + std::to_string(j) + " is empty or out of bounds");
    if (p.jump == 0.0 || !std::isfinite(p.jump)) throw DomainError("patch jumps must be finite and non-zero");
    for (std::size_t i = 0; i < j; ++i)
      if (!intersect(patches[i].rect, p.rect).empty())
        throw DomainError("patches " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
  }
}

std::vector<Rect> PatchSet::rects() const {
  std::vector<Rect> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(p.rect);
  return out;
}

}  // namespace splade
