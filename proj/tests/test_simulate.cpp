#include "doctest.h"

#include <cmath>

#include "splade/calibrate.hpp"
#include "splade/detect.hpp"
#include "splade/error.hpp"
#include "splade/simulate.hpp"
#include "test_support.hpp"

using namespace splade;
using splade::testing::sar_residual;

namespace {

double lag1_autocorrelation(const Grid& g) {
  const Index cols = g.dims()[1];
  double mean = 0.0;
  for (double v : g.values()) mean += v;
  mean /= static_cast<double>(g.size());
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    den += (g[i] - mean) * (g[i] - mean);
    if ((i + 1) % cols) num += (g[i] - mean) * (g[i + 1] - mean);
  }
  return num / den;
}

}  // namespace

TEST_CASE("SAR generator") {
  const Shape dims{64, 48};
  CHECK(gen_field(FieldSpec::sar(0.0, 5), dims) == gaussian_innovations(dims, 5));
  for (double rho : {0.04, 0.4, 0.8, 0.95}) {
    const Grid e = gaussian_innovations(dims, 9);
    const SarSolution sol = solve_sar(e, rho);
    CHECK(sar_residual(sol.field, e, rho) < 1e-8);
    CHECK(sol.field == gen_field(FieldSpec::sar(rho, 9), dims));
  }
  const Grid e3 = gaussian_innovations({10, 12, 8}, 2);
  CHECK(sar_residual(solve_sar(e3, 0.6).field, e3, 0.6) < 1e-8);
  CHECK_THROWS_AS(gen_field(FieldSpec::sar(1.0, 1), dims), DomainError);
}

TEST_CASE("SAR lag-1 autocorrelation increases with rho") {
  double previous = -1.0, previous_se = 0.0;
  for (double rho : {0.04, 0.4, 0.8}) {
    double sum = 0.0, sum2 = 0.0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
      const double a = lag1_autocorrelation(gen_field(FieldSpec::sar(rho, 500 + r), {256, 256}));
      sum += a;
      sum2 += a * a;
    }
    const double mean = sum / reps;
    const double se = std::sqrt(std::max(0.0, sum2 / reps - mean * mean) / reps);
    CHECK(mean - previous > 3.0 * std::max(se, previous_se));
    previous = mean;
    previous_se = se;
  }
}

TEST_CASE("max-stable generator") {
  CHECK(frechet_mean(2.5) == doctest::Approx(1.48919).epsilon(1e-5));
  CHECK_THROWS_AS(gen_field(FieldSpec::max_stable(2.0, 1), {16, 16}), DomainError);

  const auto stencil = max_stable_stencil(2, 0.6);
  bool saw_origin = false, saw_11 = false;
  for (const auto& t : stencil) {
    CHECK(t.weight >= 1e-6);
    if (t.offset == Shape{0, 0}) {
      saw_origin = true;
      CHECK(t.weight == 1.0);
    }
    if (t.offset == Shape{1, 1}) {
      saw_11 = true;
      CHECK(t.weight == doctest::Approx(0.36));
    }
  }
  CHECK(saw_origin);
  CHECK(saw_11);

  const Grid a = gen_field(FieldSpec::max_stable(3.0, 77), {64, 64});
  CHECK(a == gen_field(FieldSpec::max_stable(3.0, 77), {64, 64}));
  CHECK_FALSE(a == gen_field(FieldSpec::max_stable(3.0, 78), {64, 64}));
}

TEST_CASE("all generators: determinism and near-zero mean") {
  const Shape dims{128, 128};
  const std::vector<FieldSpec> specs{
      FieldSpec::iid(3),
      FieldSpec::sar(0.4, 3),
      FieldSpec::m_dependent(2, 3),
      FieldSpec::max_stable(3.0, 3),
      FieldSpec::linear({{{0, 0}, 1.0}, {{0, 1}, 0.5}, {{1, 0}, -0.25}}, 3),
  };
  std::vector<std::uint8_t> all(static_cast<std::size_t>(128 * 128), 1);
  for (const auto& spec : specs) {
    const Grid g = gen_field(spec, dims);
    CHECK(g == gen_field(spec, dims));
    double mean = 0.0;
    for (double v : g.values()) mean += v;
    mean /= static_cast<double>(g.size());
    // Long-run standard deviation: the standard error of the mean under dependence.
    const double sigma = std::sqrt(estimate_lrv_masked(g, all, KernelSpec{KernelKind::bartlett, {10.0, 10.0}}).sigma2);
    CHECK(std::abs(mean) <= 4.0 * sigma / std::sqrt(static_cast<double>(g.size())) + 1e-12);
  }
}

TEST_CASE("m-dependent field has unit variance and finite range") {
  const Grid g = gen_field(FieldSpec::m_dependent(2, 11), {200, 200});
  double s2 = 0.0;
  for (double v : g.values()) s2 += v * v;
  CHECK(s2 / static_cast<double>(g.size()) == doctest::Approx(1.0).epsilon(0.05));
  const Variogram vg = empirical_variogram(g, 0, 6);
  // Beyond lag m the field decorrelates: variogram reaches the sill.
  CHECK(vg.gamma[5] == doctest::Approx(vg.gamma0).epsilon(0.1));
}

TEST_CASE("inject_patches") {
  const Shape dims{10, 10};
  const Rect r{{2, 3}, {5, 7}};
  const Grid x = inject_patches(Grid(dims), PatchSet{{{r, 1.0}}, 0.0});
  Shape cell(2, 0);
  Index flat = 0;
  do {
    CHECK(x[flat++] == (r.contains_cell(cell) ? 1.0 : 0.0));
  } while (next_index(cell, dims));

  const Grid noise = gen_field(FieldSpec::iid(1), dims);
  const Grid shifted = inject_patches(noise, PatchSet{{}, 2.5});
  for (Index i = 0; i < noise.size(); ++i) CHECK(shifted[i] == noise[i] + 2.5);

  CHECK_THROWS_AS(inject_patches(noise, PatchSet{{{Rect{{0, 0}, {4, 4}}, 1.0}, {Rect{{3, 3}, {6, 6}}, 1.0}}, 0.0}),
                  DomainError);
  CHECK_THROWS_AS(inject_patches(noise, PatchSet{{{Rect{{0, 0}, {11, 4}}, 1.0}}, 0.0}), DomainError);

  const Rect big{{40, 40}, {90, 100}};
  const Grid sar = gen_field(FieldSpec::sar(0.2, 6), {128, 128});
  const Grid injected = inject_patches(sar, PatchSet{{{big, 1.0}}, 0.0});
  const PrefixSum ps(injected);
  const double inside = ps.rect_sum(big) / big.volume();
  const double outside = (ps.total() - ps.rect_sum(big)) / (injected.size() - big.volume());
  const double sigma = 1.0 / (1.0 - 0.2);
  CHECK(std::abs(inside - outside - 1.0) < 4.0 * sigma / std::sqrt(static_cast<double>(big.volume())));
}

TEST_CASE("canonical scenarios") {
  for (Index n : {64, 128, 256, 512}) {
    const PatchSet c1 = canonical_scenario(Scenario::config1, n, 1.5);
    REQUIRE(c1.patches.size() == 3);
    CHECK(c1.patches[0].jump == 1.5);
    CHECK(c1.patches[1].jump == 1.5);
    CHECK(c1.patches[2].jump == -1.5);
    CHECK_NOTHROW(c1.validate({n, n}));

    const PatchSet c2 = canonical_scenario(Scenario::config2, n, 0.5);
    REQUIRE(c2.patches.size() == 5);
    std::vector<double> jumps;
    for (const auto& p : c2.patches) jumps.push_back(p.jump);
    std::sort(jumps.begin(), jumps.end());
    CHECK(jumps == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5});
    CHECK_NOTHROW(c2.validate({n, n}));
  }
  CHECK_THROWS_AS(canonical_scenario(Scenario::config1, 32, 1.0), DomainError);

  // Separation at alpha = 0.5, measured in blocks along the best axis.
  auto min_gap_blocks = [](const PatchSet& ps, Index n) {
    const double L = static_cast<double>(floor_pow(n, 0.5));
    double worst = 1e9;
    for (std::size_t i = 0; i < ps.patches.size(); ++i)
      for (std::size_t j = i + 1; j < ps.patches.size(); ++j) {
        const Rect& a = ps.patches[i].rect;
        const Rect& b = ps.patches[j].rect;
        double best = -1e9;
        for (int k = 0; k < 2; ++k)
          best = std::max(best, static_cast<double>(std::max(b.lo[k] - a.hi[k], a.lo[k] - b.hi[k])));
        worst = std::min(worst, best / L);
      }
    return worst;
  };
  CHECK(min_gap_blocks(canonical_scenario(Scenario::config1, 256, 1.0), 256) >= 1.0);
  CHECK(min_gap_blocks(canonical_scenario(Scenario::config1, 512, 1.0), 512) >= 2.0);
  CHECK(min_gap_blocks(canonical_scenario(Scenario::config2, 256, 1.0), 256) >= 2.0);
  CHECK(min_gap_blocks(canonical_scenario(Scenario::config2, 512, 1.0), 512) >= 2.0);
}

TEST_CASE("noise descriptions") {
  CHECK_FALSE(parse_noise("none", 1).has_value());
  CHECK(parse_noise("iid", 4)->kind == FieldKind::iid_gaussian);
  const auto sar = parse_noise("sar:0.25", 9);
  CHECK(sar->kind == FieldKind::sar);
  CHECK(sar->rho == 0.25);
  CHECK(sar->seed == 9);
  const auto ms = parse_noise("maxstable:2.5:0.5", 1);
  CHECK(ms->tail_index == 2.5);
  CHECK(ms->decay_base == 0.5);
  CHECK(parse_noise("mdep:3", 1)->order == 3);
  CHECK_THROWS_AS(parse_noise("sar", 1), DomainError);
  CHECK_THROWS_AS(parse_noise("sar:x", 1), DomainError);
  CHECK_THROWS_AS(parse_noise("brown", 1), DomainError);
}
