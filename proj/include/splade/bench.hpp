#pragma once

// Monte-Carlo replicate loop over a canonical scenario.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splade/detect.hpp"
#include "splade/metrics.hpp"
#include "splade/simulate.hpp"

namespace splade {

struct BenchConfig {
  std::string scenario = "config1";  // config1, config2 or none
  Index grid = 256;                  // N for an N x N lattice
  std::string noise = "sar:0.04";    // see parse_noise
  double jump = 1.0;
  int reps = 20;
  std::uint64_t seed = 7;
  SpladeConfig detect;
  bool timing = true;  // false: time_s = 0 so output is reproducible byte for byte

  void validate() const;
};

/// The patch layout of a scenario ("none": no patches).
PatchSet scenario_patches(const std::string& scenario, Index n, double jump);

/// Lattice of replicate r: noise seeded with seed ^ r plus the scenario patches.
Grid bench_replicate_grid(const BenchConfig& cfg, int r);

/// Runs every replicate (in parallel) and returns records in replicate order.
std::vector<BenchRecord> run_bench(const BenchConfig& cfg);

struct BenchSummary {
  int reps = 0;
  double mean_k_hat = 0.0;
  double frac_k_correct = 0.0;
  double mean_ari = 0.0;
  double mean_hausdorff = 0.0;
  double median_time_s = 0.0;
};

BenchSummary summarize(const std::vector<BenchRecord>& records);

}  // namespace splade
