#include "splade/single_patch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "splade/error.hpp"
#include "splade/parallel.hpp"

namespace splade {

void SearchBounds::validate() const {
  if (!(lambda1 >= 0.0 && lambda1 < lambda2 && lambda2 <= 1.0))
    throw DomainError("search bounds need 0 <= lambda1 < lambda2 <= 1");
}

void Stage1Params::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(kappa >= 0.0)) throw DomainError("kappa must be >= 0");
  if (!(alpha + kappa < 1.0)) throw DomainError("alpha + kappa must be < 1");
  if (!(window_const > 0.0)) throw DomainError("window constant must be > 0");
}

Index floor_pow(Index n, double a) {
  const double v = std::pow(static_cast<double>(n), a);
  return static_cast<Index>(std::floor(v * (1.0 + 1e-12)));
}

Subsample subsample(const Grid& grid, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  const int d = grid.rank();
  Shape strides(d), counts(d);
  for (int k = 0; k < d; ++k) {
    const Index n = grid.dims()[k];
    strides[k] = std::max<Index>(1, floor_pow(n, alpha));
    counts[k] = (n + strides[k] - 1) / strides[k];
    if (counts[k] < 4)
      throw DomainError("alpha=" + std::to_string(alpha) + " leaves only " + std::to_string(counts[k]) +
                        " samples on axis " + std::to_string(k) + " (need >= 4)");
  }
  Grid sampled(counts);
  Shape s(d, 0), cell(d);
  Index flat = 0;
  do {
    for (int k = 0; k < d; ++k) cell[k] = s[k] * strides[k];
    sampled[flat++] = grid.at(cell);
  } while (next_index(s, counts));
  return {std::move(sampled), std::move(strides)};
}

// ---------------------------------------------------------------------------
// Corner-pair search

namespace {

struct Best {
  bool valid = false;
  double score = 0.0;
  double sum = 0.0;
  Index volume = 0;
  Shape lo, hi;
};

// Strict total order on candidates: larger score, smaller volume, then
// lexicographic corners.
bool beats(double score, Index volume, const Shape& lo, const Shape& hi, const Best& b) {
  if (!b.valid) return true;
  if (score != b.score) return score > b.score;
  if (volume != b.volume) return volume < b.volume;
  if (lo != b.lo) return lo < b.lo;
  return hi < b.hi;
}

class CornerSearch {
 public:
  CornerSearch(const Grid& grid, const CornerCandidates& cand, SearchBounds bounds) : d_(grid.rank()) {
    const Index n = grid.size();
    cells_ = static_cast<double>(n);
    vmin_ = cells_ * bounds.lambda1;
    vmax_ = cells_ * bounds.lambda2;

    coords_.resize(d_);
    lo_pos_.resize(d_);
    hi_pos_.resize(d_);
    for (int k = 0; k < d_; ++k) {
      auto& u = coords_[k];
      u = cand.lo[k];
      u.insert(u.end(), cand.hi[k].begin(), cand.hi[k].end());
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      if (!u.empty() && (u.front() < 0 || u.back() > grid.dims()[k]))
        throw DomainError("corner candidate outside the grid on axis " + std::to_string(k));
      auto locate = [&](Index v) { return static_cast<std::size_t>(std::lower_bound(u.begin(), u.end(), v) - u.begin()); };
      for (Index v : cand.lo[k]) lo_pos_[k].push_back(locate(v));
      for (Index v : cand.hi[k]) hi_pos_[k].push_back(locate(v));
      std::sort(lo_pos_[k].begin(), lo_pos_[k].end());
      lo_pos_[k].erase(std::unique(lo_pos_[k].begin(), lo_pos_[k].end()), lo_pos_[k].end());
      std::sort(hi_pos_[k].begin(), hi_pos_[k].end());
      hi_pos_[k].erase(std::unique(hi_pos_[k].begin(), hi_pos_[k].end()), hi_pos_[k].end());
    }

    slice_.assign(d_ + 1, 1);
    for (int k = d_ - 1; k >= 0; --k) slice_[k] = slice_[k + 1] * coords_[k].size();

    // Centering makes the grid total zero, so the contrast numerator is the
    // plain rectangle sum.
    long double acc = 0.0L;
    for (double v : grid.values()) acc += v;
    const double mean = static_cast<double>(acc / static_cast<long double>(n));
    Grid centered(grid.dims());
    for (Index i = 0; i < n; ++i) centered[i] = grid[i] - mean;
    const PrefixSum ps(centered);

    table_.resize(slice_[0]);
    if (slice_[0] == 0) return;
    Shape sizes(d_), pos(d_, 0), corner(d_);
    for (int k = 0; k < d_; ++k) sizes[k] = static_cast<Index>(coords_[k].size());
    std::size_t flat = 0;
    do {
      for (int k = 0; k < d_; ++k) corner[k] = coords_[k][static_cast<std::size_t>(pos[k])];
      table_[flat++] = ps.corner(corner);
    } while (next_index(pos, sizes));
  }

  Best run() const {
    std::vector<std::pair<std::size_t, std::size_t>> top;
    for (std::size_t a : lo_pos_[0])
      for (std::size_t b : hi_pos_[0])
        if (coords_[0][b] > coords_[0][a]) top.emplace_back(a, b);

    // Per-pair results keep the reduction independent of scheduling.
    std::vector<Best> per_pair_best(top.size());
    parallel_for(top.size(), [&](std::size_t i) {
      Workspace ws(d_, slice_);
      Best best;
      ws.lo[0] = coords_[0][top[i].first];
      ws.hi[0] = coords_[0][top[i].second];
      const Index extent = ws.hi[0] - ws.lo[0];
      if (d_ == 1) {
        const double s = table_[top[i].second] - table_[top[i].first];
        consider(s, extent, ws, best);
      } else {
        auto& diff = ws.level[1];
        const std::size_t len = slice_[1];
        const double* pa = table_.data() + top[i].first * len;
        const double* pb = table_.data() + top[i].second * len;
        for (std::size_t j = 0; j < len; ++j) diff[j] = pb[j] - pa[j];
        descend(1, extent, ws, best);
      }
      per_pair_best[i] = std::move(best);
    });

    Best best;
    for (auto& b : per_pair_best)
      if (b.valid && beats(b.score, b.volume, b.lo, b.hi, best)) best = std::move(b);
    return best;
  }

  double cells() const { return cells_; }

 private:
  struct Workspace {
    Workspace(int d, const std::vector<std::size_t>& slice) : lo(d), hi(d), level(d) {
      for (int k = 1; k < d; ++k) level[k].assign(slice[k], 0.0);
    }
    Shape lo, hi;
    std::vector<std::vector<double>> level;
  };

  bool admissible(double volume) const { return volume > vmin_ && volume < vmax_ && volume > 0.0 && volume < cells_; }

  void consider(double sum, Index volume, Workspace& ws, Best& best) const {
    const double v = static_cast<double>(volume);
    if (!admissible(v)) return;
    const double score = sum * sum / (v * (cells_ - v));
    if (best.valid && score < best.score) return;
    if (beats(score, volume, ws.lo, ws.hi, best)) {
      best.valid = true;
      best.score = score;
      best.sum = sum;
      best.volume = volume;
      best.lo = ws.lo;
      best.hi = ws.hi;
    }
  }

  // ws.level[k] holds the inclusion-exclusion difference over axes < k,
  // laid out over the candidate coordinates of axes k..d-1.
  void descend(int k, Index partial_volume, Workspace& ws, Best& best) const {
    if (static_cast<double>(partial_volume) >= vmax_) return;
    const auto& src = ws.level[k];
    const auto& u = coords_[k];
    if (k == d_ - 1) {
      for (std::size_t a : lo_pos_[k]) {
        const Index ua = u[a];
        const double sa = src[a];
        ws.lo[k] = ua;
        for (std::size_t b : hi_pos_[k]) {
          const Index ub = u[b];
          if (ub <= ua) continue;
          const Index volume = partial_volume * (ub - ua);
          const double v = static_cast<double>(volume);
          if (!admissible(v)) continue;
          const double s = src[b] - sa;
          const double score = s * s / (v * (cells_ - v));
          if (best.valid && score < best.score) continue;
          ws.hi[k] = ub;
          consider(s, volume, ws, best);
        }
      }
      return;
    }
    const std::size_t len = slice_[k + 1];
    auto& dst = ws.level[k + 1];
    for (std::size_t a : lo_pos_[k]) {
      for (std::size_t b : hi_pos_[k]) {
        if (u[b] <= u[a]) continue;
        const double* pa = src.data() + a * len;
        const double* pb = src.data() + b * len;
        for (std::size_t j = 0; j < len; ++j) dst[j] = pb[j] - pa[j];
        ws.lo[k] = u[a];
        ws.hi[k] = u[b];
        descend(k + 1, partial_volume * (u[b] - u[a]), ws, best);
      }
    }
  }

  int d_;
  double cells_ = 0.0;
  double vmin_ = 0.0;
  double vmax_ = 0.0;
  std::vector<std::vector<Index>> coords_;
  std::vector<std::vector<std::size_t>> lo_pos_, hi_pos_;
  std::vector<std::size_t> slice_;
  std::vector<double> table_;
};

bool is_constant(const Grid& grid) {
  const auto v = grid.values();
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

ScoredRect best_rectangle(const Grid& grid, const CornerCandidates& candidates, SearchBounds bounds) {
  bounds.validate();
  const int d = grid.rank();
  if (static_cast<int>(candidates.lo.size()) != d || static_cast<int>(candidates.hi.size()) != d)
    throw DomainError("corner candidates must cover every axis");
  if (is_constant(grid)) throw DegenerateInput("constant grid: every contrast is zero");

  const CornerSearch search(grid, candidates, bounds);
  const Best best = search.run();
  if (!best.valid) throw NoCandidate("no admissible rectangle in the search space");
  const double v = static_cast<double>(best.volume);
  return {Rect{best.lo, best.hi}, best.sum / std::sqrt(v * (search.cells() - v))};
}

Rect naive_ls(const Grid& grid, SearchBounds bounds) {
  CornerCandidates cand;
  for (Index n : grid.dims()) {
    std::vector<Index> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      lo[static_cast<std::size_t>(i)] = i;
      hi[static_cast<std::size_t>(i)] = i + 1;
    }
    cand.lo.push_back(std::move(lo));
    cand.hi.push_back(std::move(hi));
  }
  return best_rectangle(grid, cand, bounds).rect;
}

Shape window_half_widths(const Shape& dims, const Shape& strides, const Stage1Params& p) {
  const int d = static_cast<int>(dims.size());
  double n = 1.0;
  for (Index x : dims) n *= static_cast<double>(x);
  const double log_term = std::pow(std::log(n), 1.0 / d);
  Shape w(d);
  for (int k = 0; k < d; ++k) {
    const double raw =
        p.window_const * static_cast<double>(strides[k]) * std::pow(static_cast<double>(dims[k]), p.kappa) * log_term;
    w[k] = std::clamp<Index>(static_cast<Index>(std::ceil(raw)), 1, dims[k]);
  }
  return w;
}

SinglePatchFit fit_single_patch(const Grid& grid, const Stage1Params& params, SearchBounds bounds) {
  params.validate();
  bounds.validate();
  const int d = grid.rank();
  const Shape& dims = grid.dims();

  SinglePatchFit fit;
  Subsample sub = subsample(grid, params.alpha);
  const double m = static_cast<double>(sub.grid.size());
  try {
    fit.coarse = naive_ls(sub.grid, SearchBounds{4.0 / m, 1.0 - 4.0 / m});
  } catch (const NoCandidate&) {
    fit.coarse = naive_ls(sub.grid, SearchBounds{});
    fit.relaxed_stage1 = true;
  } catch (const DomainError&) {
    // 4/m >= 1 - 4/m: the default bounds are not even an interval.
    fit.coarse = naive_ls(sub.grid, SearchBounds{});
    fit.relaxed_stage1 = true;
  }

  fit.strides = sub.strides;
  fit.half_widths = window_half_widths(dims, sub.strides, params);

  CornerCandidates cand;
  cand.lo.resize(d);
  cand.hi.resize(d);
  fit.windows.lo.resize(d);
  fit.windows.hi.resize(d);
  for (int k = 0; k < d; ++k) {
    const Index w = fit.half_widths[k];
    const Index lo_center = sub.strides[k] * fit.coarse.lo[k];
    const Index hi_center = sub.strides[k] * fit.coarse.hi[k];
    fit.windows.lo[k] = {std::max<Index>(0, lo_center - w), std::min(dims[k] - 1, lo_center + w)};
    fit.windows.hi[k] = {std::max<Index>(1, hi_center - w), std::min(dims[k], hi_center + w)};
    for (Index v = fit.windows.lo[k].first; v <= fit.windows.lo[k].second; ++v) cand.lo[k].push_back(v);
    for (Index v = fit.windows.hi[k].first; v <= fit.windows.hi[k].second; ++v) cand.hi[k].push_back(v);
    if (cand.lo[k].empty() || cand.hi[k].empty())
      throw NoCandidate("refinement window is empty on axis " + std::to_string(k));
  }

  const ScoredRect best = best_rectangle(grid, cand, bounds);
  fit.rect = best.rect;
  fit.contrast = best.contrast;
  return fit;
}

}  // namespace splade
