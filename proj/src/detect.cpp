#include "splade/detect.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "splade/error.hpp"

namespace splade {

BlockPartition::BlockPartition(Shape dims, double alpha) : dims_(std::move(dims)) {
  checked_cell_count(dims_);
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("block exponent alpha must lie in (0, 1)");
  strides_.resize(dims_.size());
  counts_.resize(dims_.size());
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    strides_[k] = std::max<Index>(1, floor_pow(dims_[k], alpha));
    counts_[k] = (dims_[k] + strides_[k] - 1) / strides_[k];
  }
}

Index BlockPartition::num_blocks() const {
  Index m = 1;
  for (Index c : counts_) m *= c;
  return m;
}

Index BlockPartition::min_block_volume() const {
  Index v = 1;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    const Index last = dims_[k] - (counts_[k] - 1) * strides_[k];
    v *= std::min(strides_[k], last);
  }
  return v;
}

Rect BlockPartition::block(std::span<const Index> s) const {
  Rect r;
  r.lo.resize(dims_.size());
  r.hi.resize(dims_.size());
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (s[k] < 0 || s[k] >= counts_[k]) throw DomainError("block index out of range");
    r.lo[k] = s[k] * strides_[k];
    r.hi[k] = std::min(dims_[k], r.lo[k] + strides_[k]);
  }
  return r;
}

Shape BlockPartition::block_index(Index flat) const {
  if (flat < 0 || flat >= num_blocks()) throw DomainError("block index out of range");
  Shape s(dims_.size());
  for (std::size_t k = dims_.size(); k-- > 0;) {
    s[k] = flat % counts_[k];
    flat /= counts_[k];
  }
  return s;
}

Rect BlockPartition::block(Index flat) const {
  const Shape s = block_index(flat);
  return block(std::span<const Index>(s));
}

Grid block_means(const PrefixSum& ps, const BlockPartition& part) {
  if (ps.dims() != part.dims()) throw DomainError("partition does not match the grid");
  Grid out(part.counts());
  Shape s(part.counts().size(), 0);
  Index flat = 0;
  do {
    const Rect b = part.block(std::span<const Index>(s));
    out[flat++] = ps.rect_sum(b) / static_cast<double>(b.volume());
  } while (next_index(s, part.counts()));
  return out;
}

Grid block_means(const Grid& grid, const BlockPartition& part) { return block_means(PrefixSum(grid), part); }

std::vector<std::uint8_t> flag_blocks(const Grid& means, double q, double mu0) {
  if (!(q >= 0.0)) throw DomainError("flag threshold must be non-negative");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(means.size()));
  for (Index i = 0; i < means.size(); ++i) mask[static_cast<std::size_t>(i)] = std::abs(means[i] - mu0) > q ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> flag_blocks(const Grid& means, std::span<const double> q, double mu0) {
  if (static_cast<Index>(q.size()) != means.size()) throw DomainError("one threshold per block required");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(means.size()));
  for (Index i = 0; i < means.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (!(q[u] >= 0.0)) throw DomainError("flag threshold must be non-negative");
    mask[u] = std::abs(means[i] - mu0) > q[u] ? 1 : 0;
  }
  return mask;
}

std::vector<double> block_thresholds(const BlockPartition& part, double sigma, double level) {
  std::vector<double> q(static_cast<std::size_t>(part.num_blocks()), 0.0);
  if (sigma == 0.0) return q;
  for (Index b = 0; b < part.num_blocks(); ++b)
    q[static_cast<std::size_t>(b)] =
        threshold_q(sigma, static_cast<double>(part.block_volume(b)), part.num_blocks(), level);
  return q;
}

std::string to_string(Connectivity c) { return c == Connectivity::faces ? "faces" : "faces+corners"; }

Connectivity connectivity_from_string(const std::string& name) {
  if (name == "faces") return Connectivity::faces;
  if (name == "faces+corners" || name == "faces_and_corners" || name == "corners") return Connectivity::faces_and_corners;
  throw DomainError("unknown connectivity '" + name + "'");
}

namespace {

std::vector<Shape> neighbour_offsets(int d, Connectivity connectivity) {
  std::vector<Shape> out;
  if (connectivity == Connectivity::faces) {
    for (int k = 0; k < d; ++k)
      for (Index step : {Index{-1}, Index{1}}) {
        Shape o(d, 0);
        o[k] = step;
        out.push_back(o);
      }
    return out;
  }
  const Shape three(d, 3);
  Shape pos(d, 0);
  do {
    Shape o(d);
    bool zero = true;
    for (int k = 0; k < d; ++k) {
      o[k] = pos[k] - 1;
      zero = zero && o[k] == 0;
    }
    if (!zero) out.push_back(o);
  } while (next_index(pos, three));
  return out;
}

Rect bounding_union(const Rect& a, const Rect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Rect r = a;
  for (int k = 0; k < a.rank(); ++k) {
    r.lo[k] = std::min(a.lo[k], b.lo[k]);
    r.hi[k] = std::max(a.hi[k], b.hi[k]);
  }
  return r;
}

}  // namespace

std::vector<Component> components(std::span<const std::uint8_t> mask, const BlockPartition& part, Index min_cells,
                                  Connectivity connectivity, std::span<const std::int8_t> signs) {
  const Index m = part.num_blocks();
  if (static_cast<Index>(mask.size()) != m) throw DomainError("mask size does not match the partition");
  if (!signs.empty() && static_cast<Index>(signs.size()) != m) throw DomainError("sign size does not match the partition");
  const int d = static_cast<int>(part.counts().size());
  const Shape& counts = part.counts();
  const Shape strides = row_major_strides(counts);
  const auto offsets = neighbour_offsets(d, connectivity);

  std::vector<std::uint8_t> seen(static_cast<std::size_t>(m), 0);
  std::vector<Component> out;
  std::deque<Index> queue;
  for (Index start = 0; start < m; ++start) {
    if (!mask[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
    Component c;
    c.sign = signs.empty() ? 0 : signs[static_cast<std::size_t>(start)];
    seen[static_cast<std::size_t>(start)] = 1;
    queue.push_back(start);
    while (!queue.empty()) {
      const Index b = queue.front();
      queue.pop_front();
      c.blocks.push_back(b);
      const Rect r = part.block(b);
      c.cells += r.volume();
      c.bbox = bounding_union(c.bbox, r);
      const Shape s = part.block_index(b);
      for (const Shape& o : offsets) {
        Index nb = 0;
        bool inside = true;
        for (int k = 0; k < d && inside; ++k) {
          const Index t = s[k] + o[k];
          inside = t >= 0 && t < counts[k];
          nb += t * strides[k];
        }
        if (!inside) continue;
        const auto u = static_cast<std::size_t>(nb);
        if (!mask[u] || seen[u]) continue;
        if (!signs.empty() && signs[u] != c.sign) continue;
        seen[u] = 1;
        queue.push_back(nb);
      }
    }
    std::sort(c.blocks.begin(), c.blocks.end());
    if (c.cells > min_cells) out.push_back(std::move(c));
  }
  return out;
}

Rect envelope(const Component& c, const BlockPartition& part, Index margin_blocks) {
  if (c.blocks.empty()) throw DomainError("envelope of an empty component");
  if (margin_blocks < 0) throw DomainError("envelope margin must be non-negative");
  Rect r = c.bbox;
  for (int k = 0; k < r.rank(); ++k) {
    const Index pad = margin_blocks * part.strides()[k];
    r.lo[k] = std::max<Index>(0, r.lo[k] - pad);
    r.hi[k] = std::min(part.dims()[k], r.hi[k] + pad);
  }
  return r;
}

Index merge_entangled(std::vector<Component>& comps) {
  Index merges = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < comps.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < comps.size() && !changed; ++j) {
        if (intersect(comps[i].bbox, comps[j].bbox).empty()) continue;
        Component& a = comps[i];
        Component& b = comps[j];
        a.blocks.insert(a.blocks.end(), b.blocks.begin(), b.blocks.end());
        std::sort(a.blocks.begin(), a.blocks.end());
        a.cells += b.cells;
        a.bbox = bounding_union(a.bbox, b.bbox);
        if (a.sign != b.sign) a.sign = 0;
        comps.erase(comps.begin() + static_cast<std::ptrdiff_t>(j));
        ++merges;
        changed = true;
      }
    }
  }
  std::sort(comps.begin(), comps.end(),
            [](const Component& x, const Component& y) { return x.blocks.front() < y.blocks.front(); });
  return merges;
}

void separate_envelopes(std::vector<Rect>& envelopes, const std::vector<Rect>& boxes) {
  if (envelopes.size() != boxes.size()) throw DomainError("one component box per envelope required");
  for (std::size_t i = 0; i < envelopes.size(); ++i) {
    for (std::size_t j = i + 1; j < envelopes.size(); ++j) {
      if (intersect(envelopes[i], envelopes[j]).empty()) continue;
      const Rect& bi = boxes[i];
      const Rect& bj = boxes[j];
      int axis = -1;
      Index best_gap = -1;
      for (int k = 0; k < bi.rank(); ++k) {
        const Index gap = std::max(bj.lo[k] - bi.hi[k], bi.lo[k] - bj.hi[k]);
        if (gap > best_gap) {
          best_gap = gap;
          axis = k;
        }
      }
      if (axis < 0) throw DomainError("component boxes overlap; envelopes cannot be separated");
      const bool i_below = bi.hi[axis] <= bj.lo[axis];
      Rect& low = i_below ? envelopes[i] : envelopes[j];
      Rect& high = i_below ? envelopes[j] : envelopes[i];
      const Rect& low_box = i_below ? bi : bj;
      const Rect& high_box = i_below ? bj : bi;
      const Index cut = (low_box.hi[axis] + high_box.lo[axis]) / 2;
      low.hi[axis] = std::min(low.hi[axis], cut);
      high.lo[axis] = std::max(high.lo[axis], cut);
    }
  }
}

void SpladeConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("level must lie in (0, 1)");
  stage2.validate();
  if (margin_blocks < 0) throw DomainError("margin_blocks must be non-negative");
  if (!(min_size_factor > 0.0) || !std::isfinite(min_size_factor)) throw DomainError("min_size_factor must be > 0");
  if (mu0 && !std::isfinite(*mu0)) throw DomainError("mu0 must be finite");
  if (sigma && !(*sigma >= 0.0 && std::isfinite(*sigma))) throw DomainError("sigma must be finite and >= 0");
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
}

Index min_component_cells(Index cells, double alpha, double factor) {
  if (cells < 1) throw DomainError("cell count must be positive");
  const double n = static_cast<double>(cells);
  return static_cast<Index>(std::ceil(factor * std::pow(n, alpha) * std::log(n) - 1e-9));
}

namespace {

struct Screening {
  double mu0 = 0.0;
  double sigma = 0.0;
  double q = 0.0;
  std::vector<std::uint8_t> mask;
  std::vector<Component> comps;
};

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Half-sample mode: repeatedly keep the ceil(n/2) consecutive order
// statistics with the smallest range.
double half_sample_mode(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t lo = 0, n = v.size();
  while (n > 3) {
    const std::size_t h = (n + 1) / 2;
    std::size_t best = lo;
    double width = v[lo + h - 1] - v[lo];
    for (std::size_t i = lo + 1; i + h <= lo + n; ++i) {
      if (v[i + h - 1] - v[i] < width) {
        width = v[i + h - 1] - v[i];
        best = i;
      }
    }
    lo = best;
    n = h;
  }
  if (n == 3) {
    const double left = v[lo + 1] - v[lo], right = v[lo + 2] - v[lo + 1];
    if (left < right) return 0.5 * (v[lo] + v[lo + 1]);
    if (right < left) return 0.5 * (v[lo + 1] + v[lo + 2]);
    return v[lo + 1];
  }
  return n == 2 ? 0.5 * (v[lo] + v[lo + 1]) : v[lo];
}

// Robust cell-level scale: 1.4826 * median of |m_s - m_t| * sqrt(v / 2) over
// face-adjacent block pairs s, t with v the smaller of the two volumes.
double difference_scale(const Grid& means, const BlockPartition& part) {
  const Shape& counts = part.counts();
  const Shape strides = row_major_strides(counts);
  std::vector<double> diffs;
  Shape s(counts.size(), 0);
  Index flat = 0;
  do {
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (s[k] + 1 >= counts[k]) continue;
      const Index t = flat + strides[k];
      const double v = static_cast<double>(std::min(part.block_volume(flat), part.block_volume(t)));
      diffs.push_back(std::abs(means[flat] - means[t]) * std::sqrt(v / 2.0));
    }
    ++flat;
  } while (next_index(s, counts));
  return diffs.empty() ? 0.0 : 1.4826 * median(std::move(diffs));
}

class Screener {
 public:
  Screener(const Grid& means, const BlockPartition& part, const SpladeConfig& cfg, Index min_cells)
      : means_(means), part_(part), cfg_(cfg), min_cells_(min_cells) {}

  Screening run(double mu0, double sigma) const {
    Screening s;
    s.mu0 = mu0;
    s.sigma = sigma;
    Index full = 1;
    for (Index l : part_.strides()) full *= l;
    s.q = sigma > 0.0 ? threshold_q(sigma, static_cast<double>(full), part_.num_blocks(), cfg_.level) : 0.0;
    s.mask = flag_blocks(means_, block_thresholds(part_, sigma, cfg_.level), mu0);
    std::vector<std::int8_t> signs;
    if (cfg_.split_by_sign) {
      signs.resize(s.mask.size());
      for (std::size_t i = 0; i < signs.size(); ++i) signs[i] = means_[static_cast<Index>(i)] > mu0 ? 1 : -1;
    }
    s.comps = components(s.mask, part_, min_cells_, cfg_.connectivity, signs);
    return s;
  }

 private:
  const Grid& means_;
  const BlockPartition& part_;
  const SpladeConfig& cfg_;
  Index min_cells_;
};

bool touches_layer(const std::vector<Component>& comps, const BlockPartition& part, const BoundaryLayer& layer) {
  for (const auto& c : comps)
    for (Index b : c.blocks)
      if (layer.intersects(part.block(b))) return true;
  return false;
}

// Cell mask excluding every flagged block, dilated by one block in every
// direction.
std::vector<std::uint8_t> background_mask(const Grid& grid, std::span<const std::uint8_t> flagged,
                                          const BlockPartition& part) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(grid.size()), 1);
  const int d = grid.rank();
  for (Index b = 0; b < part.num_blocks(); ++b) {
    if (!flagged[static_cast<std::size_t>(b)]) continue;
    {
      Rect r = part.block(b);
      for (int k = 0; k < d; ++k) {
        r.lo[k] = std::max<Index>(0, r.lo[k] - part.strides()[k]);
        r.hi[k] = std::min(grid.dims()[k], r.hi[k] + part.strides()[k]);
      }
      Shape ext(d);
      for (int k = 0; k < d; ++k) ext[k] = r.extent(k);
      Shape pos(d, 0), cell(d);
      do {
        for (int k = 0; k < d; ++k) cell[k] = r.lo[k] + pos[k];
        keep[grid.flat_index(cell)] = 0;
      } while (next_index(pos, ext));
    }
  }
  return keep;
}

}  // namespace

Detection splade_detect(const Grid& grid, const SpladeConfig& cfg) {
  cfg.validate();
  const Shape& dims = grid.dims();
  checked_cell_count(dims);
  for (double v : grid.values())
    if (!std::isfinite(v)) throw DomainError("grid contains non-finite values");

  const BlockPartition part(dims, cfg.alpha);
  for (Index c : part.counts())
    if (c < 4) throw DomainError("grid needs at least 4 blocks per axis");

  const PrefixSum ps(grid);
  const Grid means = block_means(ps, part);
  const Index min_cells = min_component_cells(grid.size(), cfg.alpha, cfg.min_size_factor);
  KernelSpec kernel = KernelSpec::defaults(dims);
  kernel.kind = cfg.kernel;
  const BoundaryLayer layer(dims, cfg.beta);
  const Screener screener(means, part, cfg, min_cells);

  Detection det;
  det.dims = dims;
  auto& diag = det.diagnostics;
  diag.min_cells = min_cells;

  const auto layer_mask = layer.mask();
  const double mu0_layer = cfg.mu0 ? *cfg.mu0 : masked_mean(grid, layer_mask);
  double sigma_layer = 0.0;
  if (cfg.sigma) {
    sigma_layer = *cfg.sigma;
  } else {
    const LrvEstimate lrv = estimate_lrv_masked(grid, layer_mask, kernel);
    sigma_layer = std::sqrt(lrv.sigma2);
    diag.lrv_clamped = lrv.clamped;
  }
  Screening screen = screener.run(mu0_layer, sigma_layer);

  const bool estimated = !cfg.mu0 || !cfg.sigma;
  if (estimated) {
    // Robust global pass from the block means: the location is their mode and
    // the scale comes from differences of face-adjacent blocks. If either pass finds a
    // component reaching into the boundary layer, the layer is not patch-free:
    // re-estimate on the cells away from everything the robust pass flags.
    std::vector<double> mv(means.values().begin(), means.values().end());
    const double mu0_r = cfg.mu0 ? *cfg.mu0 : half_sample_mode(mv);
    const double sigma_r = cfg.sigma ? *cfg.sigma : difference_scale(means, part);
    const Screening robust = screener.run(mu0_r, sigma_r);
    if (touches_layer(screen.comps, part, layer) || touches_layer(robust.comps, part, layer)) {
      diag.calibration_fallback = true;
      diag.lrv_clamped = false;
      const auto keep = background_mask(grid, robust.mask, part);
      const bool any_kept = std::any_of(keep.begin(), keep.end(), [](std::uint8_t b) { return b != 0; });
      double mu0 = mu0_r, sigma = sigma_r;
      if (any_kept) {
        if (!cfg.mu0) mu0 = masked_mean(grid, keep);
        if (!cfg.sigma) {
          const LrvEstimate lrv = estimate_lrv_masked(grid, keep, kernel);
          sigma = std::sqrt(lrv.sigma2);
          diag.lrv_clamped = lrv.clamped;
        }
      }
      screen = screener.run(mu0, sigma);
    }
  }

  diag.mu0 = screen.mu0;
  diag.sigma = screen.sigma;
  diag.q = screen.q;
  diag.flagged_blocks = std::count(screen.mask.begin(), screen.mask.end(), std::uint8_t{1});

  std::vector<Component> comps = std::move(screen.comps);
  diag.merged_components = merge_entangled(comps);

  std::vector<Rect> envs, boxes;
  for (const auto& c : comps) {
    envs.push_back(envelope(c, part, cfg.margin_blocks));
    boxes.push_back(c.bbox);
  }
  separate_envelopes(envs, boxes);

  struct Found {
    Rect rect;
    Index cells;
    Rect env;
    bool refined;
  };
  std::vector<Found> found;
  // Envelopes are refined one after another; the corner search inside each
  // one is itself parallel.
  for (std::size_t j = 0; j < comps.size(); ++j) {
    const Rect& env = envs[j];
    Found f{intersect(comps[j].bbox, env), comps[j].cells, env, false};
    try {
      const Grid sub = grid.crop(env);
      const SinglePatchFit fit = fit_single_patch(sub, cfg.stage2);
      Rect r = fit.rect;
      for (int k = 0; k < r.rank(); ++k) {
        r.lo[k] += env.lo[k];
        r.hi[k] += env.lo[k];
      }
      f.rect = std::move(r);
      f.refined = true;
    } catch (const DomainError&) {
    } catch (const DegenerateInput&) {
    } catch (const NoCandidate&) {
    }
    found.push_back(std::move(f));
  }
  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
    if (a.rect.lo != b.rect.lo) return a.rect.lo < b.rect.lo;
    return a.rect.hi < b.rect.hi;
  });

  for (auto& f : found) {
    det.jumps.push_back(ps.rect_sum(f.rect) / static_cast<double>(f.rect.volume()) - diag.mu0);
    det.patches.push_back(std::move(f.rect));
    diag.component_cells.push_back(f.cells);
    diag.envelopes.push_back(std::move(f.env));
    diag.refined.push_back(f.refined);
  }
  return det;
}

}  // namespace splade
