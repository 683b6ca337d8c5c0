#pragma once

// Dense d-dimensional lattice fields, axis-aligned rectangles and the
// summed-area table used by every estimator in the library.
//
// Indexing convention (used by every public API):
//   A Rect {lo, hi} covers the 0-based cells i with lo_k <= i_k < hi_k.
//   In 1-based lattice notation this is exactly {x : lo < x <= hi}, i.e. lo is
//   the exclusive lower corner and hi the inclusive upper corner. A Rect with
//   hi_k <= lo_k on any axis is empty.

#include <cstdint>
#include <span>
#include <vector>

namespace splade {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline constexpr int kMaxRank = 4;

/// Validates a lattice shape (1 <= d <= 4, every extent >= 1, product
/// addressable) and returns the number of cells.
Index checked_cell_count(const Shape& dims);

/// Row-major strides of a shape (last axis contiguous).
Shape row_major_strides(const Shape& dims);

struct Rect {
  Shape lo;
  Shape hi;

  static Rect full(const Shape& dims);

  int rank() const { return static_cast<int>(lo.size()); }
  bool empty() const;
  Index extent(int axis) const;
  Index volume() const;
  bool contains(const Rect& other) const;
  bool contains_cell(std::span<const Index> cell) const;
  bool within(const Shape& dims) const;

  friend bool operator==(const Rect&, const Rect&) = default;
  friend auto operator<=>(const Rect&, const Rect&) = default;
};

Rect intersect(const Rect& a, const Rect& b);

/// |a| + |b| - 2|a ∩ b|: the cell count of the symmetric difference.
Index sym_diff_volume(const Rect& a, const Rect& b);

class Grid {
 public:
  Grid() = default;
  explicit Grid(Shape dims, double fill = 0.0);
  Grid(Shape dims, std::vector<double> data);

  int rank() const { return static_cast<int>(dims_.size()); }
  const Shape& dims() const { return dims_; }
  const Shape& strides() const { return strides_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  double operator[](Index flat) const { return data_[static_cast<std::size_t>(flat)]; }
  double& operator[](Index flat) { return data_[static_cast<std::size_t>(flat)]; }

  double at(std::span<const Index> cell) const { return data_[flat_index(cell)]; }
  double& at(std::span<const Index> cell) { return data_[flat_index(cell)]; }
  std::size_t flat_index(std::span<const Index> cell) const;

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  /// Copy of the cells inside r, with shape r's extents.
  Grid crop(const Rect& r) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Shape dims_;
  Shape strides_;
  std::vector<double> data_;
};

/// Advances a row-major multi-index within dims; returns false after the last.
bool next_index(std::span<Index> cell, const Shape& dims);

/// Summed-area table with a zero border: entry c holds the sum of all cells
/// strictly below c on every axis, so any rectangle sum is a 2^d-term
/// inclusion-exclusion.
class PrefixSum {
 public:
  explicit PrefixSum(const Grid& grid);

  const Shape& dims() const { return dims_; }
  Index size() const { return cells_; }
  double total() const { return total_; }

  /// Sum of the cells covered by r (0 for an empty rect). Throws DomainError
  /// when r does not lie within the grid.
  double rect_sum(const Rect& r) const;

  /// Table value at a corner c with 0 <= c_k <= n_k.
  double corner(std::span<const Index> c) const;

 private:
  Shape dims_;
  Shape table_strides_;
  Index cells_ = 0;
  double total_ = 0.0;
  std::vector<double> table_;
};

/// Grids above this many cells are accumulated with compensated summation.
inline constexpr Index kCompensatedSumThreshold = Index{1} << 24;

/// Contrast statistic V_I = sqrt(|I|(n-|I|)/n^2) * (mean_I - mean_{I^c}).
/// Throws DomainError for empty or full rectangles.
double contrast(const PrefixSum& ps, const Rect& r);

/// Same statistic from the sufficient quantities (rectangle sum and volume,
/// grid total and cell count).
double contrast_from_sums(double rect_sum, Index volume, double total, Index cells);

struct Patch {
  Rect rect;
  double jump = 0.0;

  friend bool operator==(const Patch&, const Patch&) = default;
};

/// Piecewise-constant mean field: baseline outside every patch, baseline plus
/// the patch's jump inside it.
struct PatchSet {
  std::vector<Patch> patches;
  double baseline = 0.0;

  /// Throws DomainError unless patches are in-bounds, non-empty, pairwise
  /// disjoint and carry non-zero jumps.
  void validate(const Shape& dims) const;
  std::vector<Rect> rects() const;

  friend bool operator==(const PatchSet&, const PatchSet&) = default;
};

}  // namespace splade
