#include "doctest.h"

#include <random>
#include <sstream>

#include "splade/error.hpp"
#include "splade/metrics.hpp"
#include "test_support.hpp"

using namespace splade;
using splade::testing::random_rect;
using splade::testing::rect_mask;

namespace {

// Hausdorff distance computed from explicit cell masks.
double hausdorff_by_masks(const Shape& dims, const std::vector<Rect>& truth, const std::vector<Rect>& est) {
  auto sets = [&](const std::vector<Rect>& rs) {
    std::vector<std::vector<std::uint8_t>> out;
    std::vector<std::uint8_t> bg(static_cast<std::size_t>(checked_cell_count(dims)), 1);
    for (const Rect& r : rs) {
      const auto m = rect_mask(dims, r);
      for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) bg[i] = 0;
      if (!r.empty()) out.push_back(m);
    }
    if (std::count(bg.begin(), bg.end(), 1) > 0) out.push_back(bg);
    return out;
  };
  const auto a = sets(truth), b = sets(est);
  auto directed = [](const auto& x, const auto& y) {
    double worst = 0.0;
    for (const auto& s : x) {
      double best = 1.0;
      for (const auto& t : y) best = std::min(best, jaccard_distance(s, t));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

std::vector<Rect> random_disjoint(const Shape& dims, std::mt19937_64& rng, int count) {
  std::vector<Rect> out;
  for (int tries = 0; tries < 200 && static_cast<int>(out.size()) < count; ++tries) {
    const Rect r = random_rect(dims, rng, false);
    bool ok = true;
    for (const Rect& o : out) ok = ok && intersect(o, r).empty();
    if (ok) out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("ARI examples") {
  const Shape dims{1, 4};
  const auto a = Labeling::from_rects(dims, {Rect{{0, 2}, {1, 4}}});
  const auto b = Labeling::from_rects(dims, {Rect{{0, 2}, {1, 3}}, Rect{{0, 3}, {1, 4}}});
  CHECK(a.labels == std::vector<std::int32_t>{0, 0, 1, 1});
  CHECK(ari(a, b) == doctest::Approx(4.0 / 7.0));
  CHECK(ari(a, a) == 1.0);
  const auto empty = Labeling::from_rects(dims, {});
  CHECK(ari(empty, empty) == 1.0);
  CHECK(ari(empty, a) == doctest::Approx(0.0));
  CHECK_THROWS_AS(Labeling::from_rects(dims, {Rect{{0, 0}, {1, 3}}, Rect{{0, 2}, {1, 4}}}), DomainError);
  CHECK_THROWS_AS(Labeling::from_rects(dims, {Rect{{0, 0}, {1, 5}}}), DomainError);
}

TEST_CASE("ARI is symmetric and label-permutation invariant") {
  std::mt19937_64 rng(3);
  const Shape dims{12, 9};
  for (int t = 0; t < 30; ++t) {
    const auto ra = random_disjoint(dims, rng, 3), rb = random_disjoint(dims, rng, 3);
    const auto a = Labeling::from_rects(dims, ra);
    const auto b = Labeling::from_rects(dims, rb);
    CHECK(ari(a, b) == doctest::Approx(ari(b, a)));
    std::vector<Rect> rev(ra.rbegin(), ra.rend());
    CHECK(ari(Labeling::from_rects(dims, rev), b) == doctest::Approx(ari(a, b)));
    CHECK(ari(a, b) <= 1.0 + 1e-12);
  }
}

TEST_CASE("Jaccard distance") {
  const Rect e{{0, 0}, {0, 0}};
  CHECK(jaccard_distance(e, e) == 0.0);
  CHECK(jaccard_distance(Rect{{0, 0}, {2, 2}}, Rect{{1, 0}, {3, 2}}) == doctest::Approx(2.0 / 3.0));
  CHECK(jaccard_distance(Rect{{0, 0}, {2, 2}}, Rect{{5, 5}, {6, 6}}) == 1.0);

  std::mt19937_64 rng(8);
  const Shape dims{7, 6};
  for (int t = 0; t < 200; ++t) {
    const Rect a = random_rect(dims, rng), b = random_rect(dims, rng), c = random_rect(dims, rng);
    const double ab = jaccard_distance(a, b);
    CHECK(ab == doctest::Approx(jaccard_distance(rect_mask(dims, a), rect_mask(dims, b))));
    CHECK(ab <= jaccard_distance(a, c) + jaccard_distance(c, b) + 1e-12);
    CHECK(ab == jaccard_distance(b, a));
  }
}

TEST_CASE("Hausdorff examples and properties") {
  const Shape dims{16, 16};
  CHECK(hausdorff(dims, {Rect{{0, 0}, {4, 4}}}, {}) == doctest::Approx(0.9375));
  CHECK(hausdorff(dims, {}, {}) == 0.0);
  CHECK(hausdorff(dims, {Rect{{2, 2}, {9, 9}}}, {Rect{{2, 2}, {9, 9}}}) == 0.0);

  std::mt19937_64 rng(21);
  for (int t = 0; t < 60; ++t) {
    const auto a = random_disjoint(dims, rng, 1 + t % 4), b = random_disjoint(dims, rng, 1 + (t / 4) % 4);
    const double h = hausdorff(dims, a, b);
    CHECK(h == doctest::Approx(hausdorff(dims, b, a)));
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    CHECK(h == doctest::Approx(hausdorff_by_masks(dims, a, b)));
    CHECK(hausdorff(dims, a, a) == 0.0);
  }
}

TEST_CASE("evaluate and the bench CSV") {
  const Shape dims{16, 16};
  const BenchRecord r = evaluate("config1", 42, dims, {Rect{{0, 0}, {4, 4}}}, {}, 0.125);
  CHECK(r.k_hat == 0);
  CHECK(r.k_true == 1);
  CHECK(r.hausdorff == doctest::Approx(0.9375));
  CHECK(r.time_s == 0.125);

  std::vector<BenchRecord> recs{r, BenchRecord{"custom", 1, 3, 3, 0.1 + 0.2, 1.0 / 3.0, 1e-9}};
  std::ostringstream out;
  write_bench_csv(out, recs);
  CHECK(out.str().rfind(std::string(kBenchCsvHeader) + "\n", 0) == 0);
  std::istringstream in(out.str());
  CHECK(read_bench_csv(in) == recs);

  std::istringstream bad_header("a,b,c\n");
  CHECK_THROWS_AS(read_bench_csv(bad_header), FormatError);
  std::istringstream bad_row(std::string(kBenchCsvHeader) + "\nconfig1,1,2\n");
  CHECK_THROWS_AS(read_bench_csv(bad_row), FormatError);
  std::istringstream bad_number(std::string(kBenchCsvHeader) + "\nconfig1,x,1,1,1,0,0\n");
  CHECK_THROWS_AS(read_bench_csv(bad_number), FormatError);
}
