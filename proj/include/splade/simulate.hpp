#pragma once

// Synthetic noise fields and piecewise-constant mean fields.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splade/grid.hpp"

namespace splade {

enum class FieldKind { iid_gaussian, sar, linear, m_dependent, max_stable };

/// One coefficient a_s of a finitely supported moving-average stencil.
struct StencilTerm {
  Shape offset;
  double weight = 0.0;
};

struct FieldSpec {
  FieldKind kind = FieldKind::iid_gaussian;
  double rho = 0.0;                 // sar
  std::vector<StencilTerm> stencil;  // linear
  Index order = 1;                  // m-dependent
  double tail_index = 3.0;          // max-stable (Frechet shape, > 2)
  double decay_base = 0.6;          // max-stable stencil a_s = base^(s_1+...+s_d)
  std::uint64_t seed = 0;

  void validate(int rank) const;

  static FieldSpec iid(std::uint64_t seed);
  static FieldSpec sar(double rho, std::uint64_t seed);
  static FieldSpec max_stable(double tail_index, std::uint64_t seed, double decay_base = 0.6);
  static FieldSpec m_dependent(Index order, std::uint64_t seed);
  static FieldSpec linear(std::vector<StencilTerm> stencil, std::uint64_t seed);
};

std::string to_string(FieldKind kind);

/// Compact noise description used on the command line: "iid", "sar:RHO",
/// "maxstable:TAIL[:BASE]", "mdep:M", or "none" (nullopt, a zero field).
std::optional<FieldSpec> parse_noise(const std::string& text, std::uint64_t seed);
FieldKind field_kind_from_string(const std::string& name);

/// Mean-zero stationary noise on the given lattice. Deterministic in
/// (spec, dims).
Grid gen_field(const FieldSpec& spec, const Shape& dims);

/// iid N(0,1) draws in row-major order; the innovations every generator
/// starts from.
Grid gaussian_innovations(const Shape& dims, std::uint64_t seed);

struct SarSolution {
  Grid field;
  int sweeps = 0;
  double last_update = 0.0;
};

inline constexpr double kSarTolerance = 1e-10;

/// Solves eps = rho * W eps + e for row-normalized nearest-neighbour weights
/// (2d neighbours in the interior, fewer on faces) by Gauss-Seidel sweeps
/// until the max-norm update drops below tol.
SarSolution solve_sar(const Grid& innovations, double rho, double tol = kSarTolerance);

/// E[Z] = Gamma(1 - 1/shape) for Z ~ Frechet(shape).
double frechet_mean(double tail_index);

/// Offsets s >= 0 with base^(s_1+...+s_d) >= cutoff, weights base^|s|_1.
std::vector<StencilTerm> max_stable_stencil(int rank, double decay_base, double cutoff = 1e-6);

/// X = baseline + jump_j inside patch j, baseline elsewhere, plus noise.
Grid inject_patches(const Grid& noise, const PatchSet& patches);

enum class Scenario { config1, config2 };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// Canonical N x N patch layouts. config1: three patches with jumps
/// (+jump, +jump, -jump). config2: five patches with jumps jump..5*jump.
PatchSet canonical_scenario(Scenario name, Index n, double jump);

}  // namespace splade
