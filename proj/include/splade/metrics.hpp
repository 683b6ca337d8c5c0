#pragma once

// Evaluation metrics for patch collections: adjusted Rand index over cell
// labelings, Jaccard distance and the two-sided Jaccard-Hausdorff distance
// (background sets included), plus the per-replicate benchmark record.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "splade/grid.hpp"

namespace splade {

/// Cell labels: 0 = background, j >= 1 = patch j.
struct Labeling {
  Shape dims;
  std::vector<std::int32_t> labels;

  /// Labels cells by membership in rects[j - 1]. Throws DomainError when the
  /// rectangles overlap or leave the domain.
  static Labeling from_rects(const Shape& dims, const std::vector<Rect>& rects);
};

/// Adjusted Rand index from the contingency table. Returns 1.0 when both
/// labelings are one single cluster (or there are fewer than two cells).
double ari(const Labeling& a, const Labeling& b);

/// |A sym B| / |A union B|, 0 for two empty sets.
double jaccard_distance(const Rect& a, const Rect& b);
double jaccard_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Normalized two-sided Hausdorff distance between the collections
/// {background, patches...} of truth and estimate under the Jaccard distance.
/// Patches must be disjoint and in-bounds; empty members are dropped.
double hausdorff(const Shape& dims, const std::vector<Rect>& truth, const std::vector<Rect>& est);

struct BenchRecord {
  std::string scenario;
  std::uint64_t seed = 0;
  Index k_hat = 0;
  Index k_true = 0;
  double ari = 0.0;
  double hausdorff = 0.0;
  double time_s = 0.0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

inline constexpr const char* kBenchCsvHeader = "scenario,seed,k_hat,k_true,ari,hausdorff,time_s";

/// Header line followed by one row per record.
void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);
std::string bench_csv_row(const BenchRecord& r);
/// Parses a CSV with the header above. Throws FormatError on malformed input.
std::vector<BenchRecord> read_bench_csv(std::istream& in);

/// Compares truth and estimate rectangles on the same lattice.
BenchRecord evaluate(const std::string& scenario, std::uint64_t seed, const Shape& dims,
                     const std::vector<Rect>& truth, const std::vector<Rect>& est, double time_s);

}  // namespace splade
