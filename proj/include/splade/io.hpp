#pragma once

// Persistence: the SPLG binary grid format, CSV export of 2-D grids and the
// JSON patch document.
//
// SPLG layout (all integers and floats little-endian):
//   bytes 0-3   magic "SPLG"
//   u32         version (1)
//   u32         rank d (1..4)
//   d x u64     extents
//   n x f64     values, row-major

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "splade/detect.hpp"
#include "splade/grid.hpp"
#include "splade/simulate.hpp"

namespace splade {

inline constexpr std::uint32_t kGridFileVersion = 1;

void write_grid(std::ostream& out, const Grid& grid);
/// Throws FormatError (bad_magic, version_mismatch, truncated, malformed).
Grid read_grid(std::istream& in);
void save_grid(const std::filesystem::path& path, const Grid& grid);
Grid load_grid(const std::filesystem::path& path);

/// One line per row, comma-separated, shortest round-trip decimal form.
void write_grid_csv(std::ostream& out, const Grid& grid);
Grid read_grid_csv(std::istream& in);

/// PatchDoc: dims, k_hat, patches [{lo, hi, jump_estimate}] and diagnostics.
nlohmann::json to_patch_doc(const Detection& det);
Detection from_patch_doc(const nlohmann::json& doc);

/// Ground-truth document: jump_estimate holds the true jump and
/// diagnostics.mu0 the baseline.
nlohmann::json truth_patch_doc(const Shape& dims, const PatchSet& truth);

void save_patch_doc(const std::filesystem::path& path, const Detection& det);
Detection load_patch_doc(const std::filesystem::path& path);

/// Simulation request: lattice, noise model and ground-truth patches.
///
///   {"dims": [256, 256],
///    "noise": "sar:0.04" | {"kind": "sar", "rho": 0.04, ...} | "none",
///    "seed": 7,
///    "baseline": 0.0,
///    "patches": [{"lo": [..], "hi": [..], "jump": 1.0}, ...]}
///
/// Instead of "patches", {"scenario": "config1", "jump": 1.0} selects a
/// canonical layout (square dims required). A "seed" inside a noise object
/// overrides the top-level one.
struct SimulationSpec {
  Shape dims;
  std::optional<FieldSpec> noise;
  PatchSet truth;
};

SimulationSpec parse_simulation_spec(const nlohmann::json& doc);
Grid simulate(const SimulationSpec& spec);

}  // namespace splade
