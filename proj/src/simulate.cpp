#include "splade/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "splade/error.hpp"

namespace splade {

void FieldSpec::validate(int rank) const {
  switch (kind) {
    case FieldKind::iid_gaussian:
      break;
    case FieldKind::sar:
      if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("SAR rho must lie in [0, 1)");
      break;
    case FieldKind::linear:
      if (stencil.empty()) throw DomainError("linear field needs a non-empty stencil");
      for (const auto& t : stencil) {
        if (static_cast<int>(t.offset.size()) != rank) throw DomainError("stencil offset rank mismatch");
        if (!std::isfinite(t.weight)) throw DomainError("stencil weights must be finite");
      }
      break;
    case FieldKind::m_dependent:
      if (order < 0) throw DomainError("m-dependent order must be >= 0");
      break;
    case FieldKind::max_stable:
      if (!(tail_index > 2.0)) throw DomainError("max-stable tail index must exceed 2 (finite variance)");
      if (!(decay_base > 0.0 && decay_base < 1.0)) throw DomainError("max-stable decay base must lie in (0, 1)");
      break;
  }
}

FieldSpec FieldSpec::iid(std::uint64_t seed) {
  FieldSpec s;
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::sar(double rho, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::sar;
  s.rho = rho;
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::max_stable(double tail_index, std::uint64_t seed, double decay_base) {
  FieldSpec s;
  s.kind = FieldKind::max_stable;
  s.tail_index = tail_index;
  s.decay_base = decay_base;
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::m_dependent(Index order, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::m_dependent;
  s.order = order;
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::linear(std::vector<StencilTerm> stencil, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::linear;
  s.stencil = std::move(stencil);
  s.seed = seed;
  return s;
}

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::iid_gaussian: return "iid-gaussian";
    case FieldKind::sar: return "sar";
    case FieldKind::linear: return "linear";
    case FieldKind::m_dependent: return "m-dependent";
    case FieldKind::max_stable: return "max-stable";
  }
  return "unknown";
}

FieldKind field_kind_from_string(const std::string& name) {
  if (name == "iid-gaussian" || name == "iid") return FieldKind::iid_gaussian;
  if (name == "sar") return FieldKind::sar;
  if (name == "linear") return FieldKind::linear;
  if (name == "m-dependent" || name == "mdep") return FieldKind::m_dependent;
  if (name == "max-stable" || name == "maxstable") return FieldKind::max_stable;
  throw DomainError("unknown field kind '" + name + "'");
}

// ---------------------------------------------------------------------------

Grid gaussian_innovations(const Shape& dims, std::uint64_t seed) {
  Grid g(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : g.values()) v = normal(rng);
  return g;
}

SarSolution solve_sar(const Grid& innovations, double rho, double tol) {
  if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("SAR rho must lie in [0, 1)");
  SarSolution out{innovations, 0, 0.0};
  if (rho == 0.0) return out;

  const int d = innovations.rank();
  const Shape& dims = innovations.dims();
  const Shape& strides = innovations.strides();
  // Gauss-Seidel contracts by at most rho per sweep in the max norm (the
  // system is strictly diagonally dominant), so this cap always suffices.
  const int by_rate = static_cast<int>(std::ceil(std::log(tol) / std::log(rho))) + 10;
  const int by_gap = 10 * static_cast<int>(std::ceil(1.0 / (1.0 - rho)));
  const int max_sweeps = std::max(by_rate, by_gap);

  Grid& eps = out.field;
  Shape cell(d);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_update = 0.0;
    std::fill(cell.begin(), cell.end(), 0);
    Index flat = 0;
    do {
      double sum = 0.0;
      int neighbours = 0;
      for (int k = 0; k < d; ++k) {
        if (cell[k] > 0) {
          sum += eps[flat - strides[k]];
          ++neighbours;
        }
        if (cell[k] + 1 < dims[k]) {
          sum += eps[flat + strides[k]];
          ++neighbours;
        }
      }
      const double updated = neighbours ? rho * sum / neighbours + innovations[flat] : innovations[flat];
      max_update = std::max(max_update, std::abs(updated - eps[flat]));
      eps[flat] = updated;
      ++flat;
    } while (next_index(cell, dims));
    out.sweeps = sweep;
    out.last_update = max_update;
    if (max_update < tol) return out;
  }
  throw ConvergenceError("SAR iteration did not converge within " + std::to_string(max_sweeps) + " sweeps");
}

double frechet_mean(double tail_index) {
  if (!(tail_index > 1.0)) throw DomainError("Frechet mean needs shape > 1");
  return std::tgamma(1.0 - 1.0 / tail_index);
}

std::vector<StencilTerm> max_stable_stencil(int rank, double decay_base, double cutoff) {
  if (!(decay_base > 0.0 && decay_base < 1.0)) throw DomainError("decay base must lie in (0, 1)");
  const Index reach = static_cast<Index>(std::floor(std::log(cutoff) / std::log(decay_base) + 1e-9));
  std::vector<StencilTerm> out;
  Shape width(rank, reach + 1), s(rank, 0);
  do {
    Index l1 = 0;
    for (Index v : s) l1 += v;
    if (l1 <= reach) out.push_back({s, std::pow(decay_base, static_cast<double>(l1))});
  } while (next_index(s, width));
  return out;
}

namespace {

Shape padded_dims(const Shape& dims, Index low, Index high) {
  Shape p(dims);
  for (Index& v : p) v += low + high;
  return p;
}

// out_i = sum_s a_s e_{i - s} with e drawn on a grid padded by `low` cells
// below and `high` cells above on every axis.
Grid moving_average(const Shape& dims, const std::vector<StencilTerm>& stencil, std::uint64_t seed) {
  const int d = static_cast<int>(dims.size());
  Index low = 0, high = 0;
  for (const auto& t : stencil)
    for (Index o : t.offset) {
      low = std::max(low, o);
      high = std::max(high, -o);
    }
  const Grid e = gaussian_innovations(padded_dims(dims, low, high), seed);
  std::vector<Index> shift;
  for (const auto& t : stencil) {
    Index off = 0;
    for (int k = 0; k < d; ++k) off -= t.offset[k] * e.strides()[k];
    shift.push_back(off);
  }
  Grid out(dims);
  Shape cell(d, 0);
  Index flat = 0;
  do {
    Index base = 0;
    for (int k = 0; k < d; ++k) base += (cell[k] + low) * e.strides()[k];
    double v = 0.0;
    for (std::size_t j = 0; j < stencil.size(); ++j) v += stencil[j].weight * e[base + shift[j]];
    out[flat++] = v;
  } while (next_index(cell, dims));
  return out;
}

Grid m_dependent_field(const Shape& dims, Index order, std::uint64_t seed) {
  const int d = static_cast<int>(dims.size());
  const Grid e = gaussian_innovations(padded_dims(dims, order, 0), seed);
  const PrefixSum ps(e);
  const double scale = 1.0 / std::sqrt(std::pow(static_cast<double>(order + 1), d));
  Grid out(dims);
  Shape cell(d, 0);
  Rect box{Shape(d), Shape(d)};
  Index flat = 0;
  do {
    // Cells i-s for s in [0, order]^d sit at padded coordinates i..i+order.
    for (int k = 0; k < d; ++k) {
      box.lo[k] = cell[k];
      box.hi[k] = cell[k] + order + 1;
    }
    out[flat++] = scale * ps.rect_sum(box);
  } while (next_index(cell, dims));
  return out;
}

Grid max_stable_field(const Shape& dims, double tail_index, double decay_base, std::uint64_t seed) {
  const int d = static_cast<int>(dims.size());
  const auto stencil = max_stable_stencil(d, decay_base);
  Index reach = 0;
  for (const auto& t : stencil)
    for (Index o : t.offset) reach = std::max(reach, o);

  Grid eps(padded_dims(dims, reach, 0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double shift = frechet_mean(tail_index);
  for (double& v : eps.values()) {
    double u = unit(rng);
    while (u <= 0.0) u = unit(rng);
    v = std::pow(-std::log(u), -1.0 / tail_index) - shift;
  }

  std::vector<Index> offsets;
  for (const auto& t : stencil) {
    Index off = 0;
    for (int k = 0; k < d; ++k) off -= t.offset[k] * eps.strides()[k];
    offsets.push_back(off);
  }
  Grid out(dims);
  Shape cell(d, 0);
  Index flat = 0;
  long double total = 0.0L;
  do {
    Index base = 0;
    for (int k = 0; k < d; ++k) base += (cell[k] + reach) * eps.strides()[k];
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < stencil.size(); ++j) m = std::max(m, stencil[j].weight * eps[base + offsets[j]]);
    out[flat++] = m;
    total += m;
  } while (next_index(cell, dims));
  const double mean = static_cast<double>(total / static_cast<long double>(out.size()));
  for (double& v : out.values()) v -= mean;
  return out;
}

}  // namespace

Grid gen_field(const FieldSpec& spec, const Shape& dims) {
  checked_cell_count(dims);
  spec.validate(static_cast<int>(dims.size()));
  switch (spec.kind) {
    case FieldKind::iid_gaussian:
      return gaussian_innovations(dims, spec.seed);
    case FieldKind::sar:
      return solve_sar(gaussian_innovations(dims, spec.seed), spec.rho).field;
    case FieldKind::linear:
      return moving_average(dims, spec.stencil, spec.seed);
    case FieldKind::m_dependent:
      return m_dependent_field(dims, spec.order, spec.seed);
    case FieldKind::max_stable:
      return max_stable_field(dims, spec.tail_index, spec.decay_base, spec.seed);
  }
  throw DomainError("unknown field kind");
}

Grid inject_patches(const Grid& noise, const PatchSet& patches) {
  patches.validate(noise.dims());
  Grid out(noise);
  for (double& v : out.values()) v += patches.baseline;
  const int d = noise.rank();
  for (const auto& p : patches.patches) {
    Shape local(d, 0), cell(d), extent(d);
    for (int k = 0; k < d; ++k) extent[k] = p.rect.extent(k);
    do {
      for (int k = 0; k < d; ++k) cell[k] = p.rect.lo[k] + local[k];
      out.at(cell) += p.jump;
    } while (next_index(local, extent));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Scenario s) { return s == Scenario::config1 ? "config1" : "config2"; }

Scenario scenario_from_string(const std::string& name) {
  if (name == "config1") return Scenario::config1;
  if (name == "config2") return Scenario::config2;
  throw DomainError("unknown scenario '" + name + "'");
}

PatchSet canonical_scenario(Scenario name, Index n, double jump) {
  if (n < 64) throw DomainError("canonical scenarios need N >= 64");
  if (jump == 0.0 || !std::isfinite(jump)) throw DomainError("scenario jump must be finite and non-zero");
  struct Layout {
    double x0, x1, y0, y1, factor;
  };
  // Fractions of N: (x-lo, x-hi) x (y-lo, y-hi) and the jump multiplier.
  static constexpr Layout config1[] = {
      {0.15, 0.35, 0.15, 0.85, 1.0},
      {0.55, 0.85, 0.55, 0.85, 1.0},
      {0.55, 0.85, 0.15, 0.45, -1.0},
  };
  // Bottom-left, top-left, top-right, bottom-right, centre.
  static constexpr Layout config2[] = {
      {0.05, 0.25, 0.05, 0.40, 1.0}, {0.05, 0.25, 0.60, 0.95, 2.0}, {0.75, 0.95, 0.60, 0.95, 3.0},
      {0.75, 0.95, 0.05, 0.40, 4.0}, {0.42, 0.58, 0.25, 0.75, 5.0},
  };
  auto at = [n](double f) { return static_cast<Index>(std::llround(f * static_cast<double>(n))); };
  PatchSet set;
  auto add = [&](const Layout& l) {
    set.patches.push_back({Rect{{at(l.x0), at(l.y0)}, {at(l.x1), at(l.y1)}}, l.factor * jump});
  };
  if (name == Scenario::config1) {
    for (const auto& l : config1) add(l);
  } else {
    for (const auto& l : config2) add(l);
  }
  set.validate({n, n});
  return set;
}

}  // namespace splade

namespace splade {

namespace {

double parse_real(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw DomainError("bad " + what + " '" + text + "'");
  return v;
}

}  // namespace

std::optional<FieldSpec> parse_noise(const std::string& text, std::uint64_t seed) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  const std::string& kind = parts[0];
  auto expect = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo || parts.size() > hi) throw DomainError("bad noise description '" + text + "'");
  };
  if (kind == "none") {
    expect(1, 1);
    return std::nullopt;
  }
  if (kind == "iid") {
    expect(1, 1);
    return FieldSpec::iid(seed);
  }
  if (kind == "sar") {
    expect(2, 2);
    return FieldSpec::sar(parse_real(parts[1], "SAR rho"), seed);
  }
  if (kind == "maxstable" || kind == "max-stable") {
    expect(2, 3);
    const double base = parts.size() == 3 ? parse_real(parts[2], "decay base") : 0.6;
    return FieldSpec::max_stable(parse_real(parts[1], "tail index"), seed, base);
  }
  if (kind == "mdep" || kind == "m-dependent") {
    expect(2, 2);
    const double m = parse_real(parts[1], "order");
    if (m != std::floor(m)) throw DomainError("m-dependent order must be an integer");
    return FieldSpec::m_dependent(static_cast<Index>(m), seed);
  }
  throw DomainError("unknown noise kind '" + kind + "'");
}

}  // namespace splade
