#include "splade/bench.hpp"

#include <algorithm>
#include <chrono>

#include "splade/error.hpp"
#include "splade/parallel.hpp"

namespace splade {

void BenchConfig::validate() const {
  if (reps < 1) throw DomainError("reps must be >= 1");
  if (grid < 1) throw DomainError("grid size must be >= 1");
  detect.validate();
  scenario_patches(scenario, grid, jump);
  parse_noise(noise, seed);
}

PatchSet scenario_patches(const std::string& scenario, Index n, double jump) {
  if (scenario == "none") return {};
  return canonical_scenario(scenario_from_string(scenario), n, jump);
}

Grid bench_replicate_grid(const BenchConfig& cfg, int r) {
  const Shape dims{cfg.grid, cfg.grid};
  const std::uint64_t seed = cfg.seed ^ static_cast<std::uint64_t>(r);
  const auto spec = parse_noise(cfg.noise, seed);
  const Grid noise = spec ? gen_field(*spec, dims) : Grid(dims, 0.0);
  return inject_patches(noise, scenario_patches(cfg.scenario, cfg.grid, cfg.jump));
}

std::vector<BenchRecord> run_bench(const BenchConfig& cfg) {
  cfg.validate();
  const Shape dims{cfg.grid, cfg.grid};
  const std::vector<Rect> truth = scenario_patches(cfg.scenario, cfg.grid, cfg.jump).rects();
  std::vector<BenchRecord> records(static_cast<std::size_t>(cfg.reps));
  parallel_for(records.size(), [&](std::size_t r) {
    const Grid g = bench_replicate_grid(cfg, static_cast<int>(r));
    const auto t0 = std::chrono::steady_clock::now();
    const Detection det = splade_detect(g, cfg.detect);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records[r] = evaluate(cfg.scenario, cfg.seed ^ static_cast<std::uint64_t>(r), dims, truth, det.patches,
                          cfg.timing ? elapsed : 0.0);
  });
  return records;
}

BenchSummary summarize(const std::vector<BenchRecord>& records) {
  BenchSummary s;
  s.reps = static_cast<int>(records.size());
  if (records.empty()) return s;
  std::vector<double> times;
  for (const auto& r : records) {
    s.mean_k_hat += static_cast<double>(r.k_hat);
    s.frac_k_correct += r.k_hat == r.k_true ? 1.0 : 0.0;
    s.mean_ari += r.ari;
    s.mean_hausdorff += r.hausdorff;
    times.push_back(r.time_s);
  }
  const double n = static_cast<double>(records.size());
  s.mean_k_hat /= n;
  s.frac_k_correct /= n;
  s.mean_ari /= n;
  s.mean_hausdorff /= n;
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  s.median_time_s = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  return s;
}

}  // namespace splade
