#pragma once

// Single-patch localization: the exhaustive least-squares estimator and the
// two-stage intelligent-sampling refinement built on top of it.

#include <vector>

#include "splade/grid.hpp"

namespace splade {

/// Admissible volumes for the least-squares search: n*lambda1 < |I| < n*lambda2.
struct SearchBounds {
  double lambda1 = 0.0;
  double lambda2 = 1.0;

  void validate() const;
};

/// Tuning of the two-stage estimator: block exponent alpha, window growth
/// exponent kappa and window constant C.
struct Stage1Params {
  double alpha = 0.5;
  double kappa = 0.01;
  double window_const = 1.0;

  void validate() const;
};

/// floor(n^a) computed robustly against pow() rounding just below integers.
Index floor_pow(Index n, double a);

struct Subsample {
  Grid grid;      // values at the sampled lattice points
  Shape strides;  // L_k = floor(n_k^alpha)
};

/// Sampled points sit at 0-based offsets s*L_k, s = 0..M_k-1 with
/// M_k = ceil(n_k / L_k). Throws DomainError when some M_k < 4.
Subsample subsample(const Grid& grid, double alpha);

/// Per-axis candidate coordinates for the lower and upper rectangle corners.
struct CornerCandidates {
  std::vector<std::vector<Index>> lo;
  std::vector<std::vector<Index>> hi;
};

struct ScoredRect {
  Rect rect;
  double contrast = 0.0;
};

/// Maximizes |contrast| over every rectangle {lo, hi} with lo_k drawn from
/// candidates.lo[k], hi_k from candidates.hi[k], lo_k < hi_k, and volume
/// admissible under bounds. Ties go to the smaller volume, then the
/// lexicographically smaller lo, then hi.
///
/// Throws DegenerateInput for a constant grid and NoCandidate when nothing is
/// admissible.
ScoredRect best_rectangle(const Grid& grid, const CornerCandidates& candidates, SearchBounds bounds);

/// Exhaustive least-squares estimate over every axis-aligned rectangle.
Rect naive_ls(const Grid& grid, SearchBounds bounds = {});

/// Closed corner windows [first, last] per axis for the refinement stage.
struct CornerWindows {
  std::vector<std::pair<Index, Index>> lo;
  std::vector<std::pair<Index, Index>> hi;
};

struct SinglePatchFit {
  Rect rect;
  double contrast = 0.0;
  Rect coarse;                // first-stage estimate in subsample coordinates
  Shape strides;              // L_k
  Shape half_widths;          // window half-width per axis
  CornerWindows windows;
  bool relaxed_stage1 = false;  // default stage-1 bounds admitted nothing
};

/// Window half-width ceil(C * L_k * n_k^kappa * (ln n)^(1/d)) clipped to [1, n_k].
Shape window_half_widths(const Shape& dims, const Shape& strides, const Stage1Params& p);

/// Two-stage estimator. Stage 1 runs naive_ls on the subsampled grid with
/// bounds (4/m, 1 - 4/m); stage 2 scores every corner pair inside windows
/// around the scaled stage-1 corners with the full-grid contrast, restricted
/// to `bounds`.
SinglePatchFit fit_single_patch(const Grid& grid, const Stage1Params& params, SearchBounds bounds = {});

inline Rect algorithm1(const Grid& grid, const Stage1Params& params, SearchBounds bounds = {}) {
  return fit_single_patch(grid, params, bounds).rect;
}

}  // namespace splade
