#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "splade/calibrate.hpp"
#include "splade/error.hpp"
#include "splade/simulate.hpp"

using namespace splade;

TEST_CASE("boundary layer geometry") {
  const BoundaryLayer layer({128, 128}, 0.5);
  CHECK(layer.thickness() == Shape{11, 11});
  CHECK(layer.count() == 128 * 128 - 106 * 106);
  const Index corner[] = {0, 64}, inner[] = {64, 64}, edge[] = {117, 64};
  CHECK(layer.contains(corner));
  CHECK_FALSE(layer.contains(inner));
  CHECK(layer.contains(edge));
  CHECK(layer.intersects(Rect{{5, 20}, {30, 40}}));
  CHECK_FALSE(layer.intersects(Rect{{11, 11}, {117, 117}}));
  const auto mask = layer.mask();
  CHECK(std::count(mask.begin(), mask.end(), 1) == layer.count());
  CHECK_THROWS_AS(BoundaryLayer({16, 16}, 1.0), DomainError);
}

TEST_CASE("estimate_mu0") {
  CHECK(estimate_mu0(Grid(Shape{64, 64}, 3.25), 0.7) == 3.25);

  Grid g(Shape{128, 128}, 2.0);
  const BoundaryLayer layer(g.dims(), 0.7);
  for (Index i = 40; i < 80; ++i)
    for (Index j = 40; j < 80; ++j) g[i * 128 + j] += 5.0;
  REQUIRE_FALSE(layer.intersects(Rect{{40, 40}, {80, 80}}));
  CHECK(estimate_mu0(g, 0.7) == 2.0);

  Grid noisy = gen_field(FieldSpec::iid(12), {128, 128});
  for (auto& v : noisy.values()) v += 5.0;
  const double band = 5.0 / std::sqrt(static_cast<double>(BoundaryLayer({128, 128}, 0.5).count()));
  CHECK(std::abs(estimate_mu0(noisy, 0.5) - 5.0) < band);
}

TEST_CASE("estimate_lrv") {
  const KernelSpec unit{KernelKind::bartlett, {1.0, 1.0}};
  CHECK(estimate_lrv(Grid(Shape{64, 64}, 1.5), 0.7, unit).sigma2 == 0.0);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LrvEstimate e = estimate_lrv(gen_field(FieldSpec::iid(seed), {128, 128}), 0.7, unit);
    CHECK(std::abs(e.sigma2 - 1.0) <= 0.15);
    CHECK(e.sigma2 == e.plain_variance);  // B = 1 keeps the lag-0 term only
  }

  const KernelSpec wide{KernelKind::bartlett, {8.0, 8.0}};
  const LrvEstimate sar = estimate_lrv(gen_field(FieldSpec::sar(0.4, 3), {128, 128}), 0.7, wide);
  CHECK(sar.sigma2 > sar.plain_variance);

  const KernelSpec parzen{KernelKind::parzen, {4.0, 4.0}};
  CHECK(estimate_lrv(gen_field(FieldSpec::sar(0.4, 3), {128, 128}), 0.7, parzen).sigma2 > 1.0);

  CHECK_THROWS_AS(estimate_lrv(Grid(Shape{32, 32}), 0.7, KernelSpec{KernelKind::bartlett, {0.5, 1.0}}), DomainError);
}

TEST_CASE("estimate_lrv depends only on boundary-layer cells") {
  Grid g = gen_field(FieldSpec::sar(0.2, 8), {96, 96});
  const KernelSpec k = KernelSpec::defaults(g.dims());
  const double mu = estimate_mu0(g, 0.7);
  const double s2 = estimate_lrv(g, 0.7, k).sigma2;
  g[48 * 96 + 48] += 100.0;
  CHECK(estimate_mu0(g, 0.7) == mu);
  CHECK(estimate_lrv(g, 0.7, k).sigma2 == s2);
}

TEST_CASE("kernel defaults") {
  const KernelSpec k = KernelSpec::defaults({256, 256});
  CHECK(k.bandwidths == std::vector<double>{4.0, 4.0});
  CHECK(k.profile(0.0) == 1.0);
  CHECK(k.profile(1.0) == 0.0);
  CHECK(k.profile(-0.5) == doctest::Approx(0.5));
}

TEST_CASE("threshold_q") {
  CHECK(threshold_q(1.0, 1.0, 1, 0.05) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(threshold_q(2.0, 64.0, 100, 0.05) == doctest::Approx(2.0 * threshold_q(1.0, 64.0, 100, 0.05)));

  for (double v : {1.0, 16.0, 256.0})
    for (Index m : {Index{1}, Index{64}, Index{1024}})
      for (double kappa : {0.01, 0.05, 0.2}) {
        const double q = threshold_q(1.0, v, m, kappa);
        CHECK(threshold_q(1.0, v, m, kappa * 1.5) < q);
        CHECK(threshold_q(1.0, v, m + 1, kappa) > q);
        CHECK(threshold_q(3.0, v, m, kappa) == doctest::Approx(3.0 * q));
        CHECK(threshold_q(1.0, 4.0 * v, m, kappa) == doctest::Approx(q / 2.0));
      }

  CHECK_THROWS_AS(threshold_q(0.0, 1.0, 1, 0.05), DomainError);
  CHECK_THROWS_AS(threshold_q(1.0, 0.5, 1, 0.05), DomainError);
  CHECK_THROWS_AS(threshold_q(1.0, 1.0, 0, 0.05), DomainError);
  CHECK_THROWS_AS(threshold_q(1.0, 1.0, 1, 1.0), DomainError);
}

TEST_CASE("threshold_q agrees with a Monte-Carlo quantile (sigma 1, v 256, M 256, kappa 0.05)") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z(0.0, 16.0);  // N(0, v)
  const int draws = 200000;
  std::vector<double> maxima(draws);
  for (auto& m : maxima) {
    double best = 0.0;
    for (int s = 0; s < 256; ++s) best = std::max(best, std::abs(z(rng)));
    m = best / 256.0;  // |W(B)| / |B|
  }
  const auto idx = static_cast<std::size_t>(0.95 * draws);
  std::nth_element(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(idx), maxima.end());
  const double mc = maxima[idx];
  CHECK(std::abs(threshold_q(1.0, 256.0, 256, 0.05) / mc - 1.0) < 0.02);
}

TEST_CASE("empirical variogram") {
  const Variogram flat = empirical_variogram(Grid(Shape{32, 32}, 4.0), 0, 5);
  CHECK(flat.gamma0 == 0.0);
  for (double g : flat.gamma) CHECK(g == 0.0);

  const Variogram iid = empirical_variogram(gen_field(FieldSpec::iid(1), {128, 128}), 1, 8);
  for (double g : iid.gamma) CHECK(g == doctest::Approx(1.0).epsilon(0.05));

  const Variogram sar = empirical_variogram(gen_field(FieldSpec::sar(0.8, 1), {128, 128}), 0, 8);
  CHECK(sar.gamma[0] < sar.gamma[7]);

  Grid g = gen_field(FieldSpec::iid(4), {40, 30});
  const Variogram a = empirical_variogram(g, 0, 6);
  for (auto& v : g.values()) v += 10.0;
  const Variogram b = empirical_variogram(g, 0, 6);
  for (std::size_t h = 0; h < a.gamma.size(); ++h) CHECK(b.gamma[h] == doctest::Approx(a.gamma[h]).epsilon(1e-9));

  CHECK_THROWS_AS(empirical_variogram(g, 2, 3), DomainError);
  CHECK_THROWS_AS(empirical_variogram(g, 0, 40), DomainError);
}
