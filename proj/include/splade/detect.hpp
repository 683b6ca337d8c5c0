#pragma once

// Multi-patch localization: block screening, connected components,
// envelopes and per-envelope two-stage refinement.
//
// Envelopes are the component bounding boxes widened by a fixed number of
// first-stage blocks per side (envelope_margin_blocks) rather than by
// c * L_k * log n cells; the refinement windows of the single-patch stage
// supply the finer enlargement. Envelopes that would overlap are cut at the
// midpoint of the gap between their components so they stay disjoint.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splade/calibrate.hpp"
#include "splade/grid.hpp"
#include "splade/single_patch.hpp"

namespace splade {

/// Tiling of the lattice into blocks of side L_k = floor(n_k^alpha); the last
/// block on each axis is truncated to the domain.
class BlockPartition {
 public:
  BlockPartition(Shape dims, double alpha);

  const Shape& dims() const { return dims_; }
  const Shape& strides() const { return strides_; }
  const Shape& counts() const { return counts_; }
  Index num_blocks() const;
  Index min_block_volume() const;

  Rect block(std::span<const Index> s) const;
  Rect block(Index flat) const;
  Index block_volume(Index flat) const { return block(flat).volume(); }
  Shape block_index(Index flat) const;

 private:
  Shape dims_;
  Shape strides_;
  Shape counts_;
};

/// Grid of shape counts() holding the mean of each block.
Grid block_means(const PrefixSum& ps, const BlockPartition& part);
Grid block_means(const Grid& grid, const BlockPartition& part);

/// 1 where |mean - mu0| > q.
std::vector<std::uint8_t> flag_blocks(const Grid& means, double q, double mu0);

/// Per-block thresholds: 1 where |mean_s - mu0| > q[s].
std::vector<std::uint8_t> flag_blocks(const Grid& means, std::span<const double> q, double mu0);

/// Threshold for every block: threshold_q(sigma, |B_s|, M, level), so each
/// block is compared on the scale of its own volume and the family-wise
/// level over all M blocks is exactly `level`. Zero everywhere when sigma = 0.
std::vector<double> block_thresholds(const BlockPartition& part, double sigma, double level);

enum class Connectivity { faces, faces_and_corners };

std::string to_string(Connectivity c);
Connectivity connectivity_from_string(const std::string& name);

struct Component {
  std::vector<Index> blocks;  // flat block indices, ascending
  Index cells = 0;            // lattice cells covered
  int sign = 0;               // shared deviation sign when split by sign, else 0
  Rect bbox;                  // bounding box of the covered cells
};

/// Connected components of the flagged blocks. When `signs` is non-empty two
/// flagged blocks are adjacent only if their signs agree. Components covering
/// at most min_cells cells are dropped. Output is ordered by first block.
std::vector<Component> components(std::span<const std::uint8_t> mask, const BlockPartition& part, Index min_cells,
                                  Connectivity connectivity, std::span<const std::int8_t> signs = {});

/// Bounding box of the component widened by margin_blocks * L_k per side and
/// clipped to the domain.
Rect envelope(const Component& c, const BlockPartition& part, Index margin_blocks);

/// Merges components whose bounding boxes intersect until all boxes are
/// pairwise disjoint. Returns the number of merges.
Index merge_entangled(std::vector<Component>& comps);

/// Makes envelopes pairwise disjoint: each overlapping pair is cut along the
/// axis where their component boxes are furthest apart, at the midpoint of
/// that gap. Needs pairwise disjoint boxes; throws DomainError otherwise.
void separate_envelopes(std::vector<Rect>& envelopes, const std::vector<Rect>& boxes);

struct SpladeConfig {
  double alpha = 0.5;  // first-stage block exponent
  double level = 0.05;  // kappa of the threshold quantile
  Stage1Params stage2{0.5, 0.01, 1.0};
  Index margin_blocks = 2;
  double min_size_factor = 1.0;
  std::optional<double> mu0;    // nullopt: estimate
  std::optional<double> sigma;  // nullopt: estimate
  Connectivity connectivity = Connectivity::faces;
  bool split_by_sign = true;
  double beta = 0.7;  // boundary-layer thickness exponent
  KernelKind kernel = KernelKind::bartlett;

  void validate() const;
};

/// ceil(factor * n^alpha * ln n).
Index min_component_cells(Index cells, double alpha, double factor);

struct DetectionDiagnostics {
  double mu0 = 0.0;
  double sigma = 0.0;
  double q = 0.0;  // threshold of a full (untruncated) block
  Index flagged_blocks = 0;
  Index min_cells = 0;
  std::vector<Index> component_cells;
  std::vector<Rect> envelopes;
  std::vector<bool> refined;  // false: envelope too small, bounding box returned
  bool calibration_fallback = false;
  bool lrv_clamped = false;
  Index merged_components = 0;  // components merged because their boxes intersect

  friend bool operator==(const DetectionDiagnostics&, const DetectionDiagnostics&) = default;
};

struct Detection {
  Shape dims;
  std::vector<Rect> patches;
  std::vector<double> jumps;  // mean inside the patch minus the baseline estimate
  DetectionDiagnostics diagnostics;

  Index k_hat() const { return static_cast<Index>(patches.size()); }

  friend bool operator==(const Detection&, const Detection&) = default;
};

Detection splade_detect(const Grid& grid, const SpladeConfig& cfg);

}  // namespace splade
