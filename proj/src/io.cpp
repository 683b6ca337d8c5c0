#include "splade/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "splade/error.hpp"

namespace splade {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <class T>
bool get_le(std::istream& in, T& value) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return true;
}

constexpr std::array<char, 4> kMagic{'S', 'P', 'L', 'G'};

}  // namespace

void write_grid(std::ostream& out, const Grid& grid) {
  checked_cell_count(grid.dims());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kGridFileVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grid.rank()));
  for (Index n : grid.dims()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(n));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(grid.values().data()),
              static_cast<std::streamsize>(grid.values().size() * sizeof(double)));
  } else {
    for (double v : grid.values()) put_le<double>(out, v);
  }
  if (!out) throw FormatError(FormatError::Kind::io, "failed to write grid");
}

Grid read_grid(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError(FormatError::Kind::truncated, "grid file shorter than its header");
  if (magic != kMagic) throw FormatError(FormatError::Kind::bad_magic, "not a SPLG grid file (bad magic)");
  std::uint32_t version = 0, rank = 0;
  if (!get_le(in, version)) throw FormatError(FormatError::Kind::truncated, "grid file truncated in header");
  if (version != kGridFileVersion)
    throw FormatError(FormatError::Kind::version_mismatch,
                      "unsupported SPLG version " + std::to_string(version) + " (expected 1)");
  if (!get_le(in, rank)) throw FormatError(FormatError::Kind::truncated, "grid file truncated in header");
  if (rank < 1 || rank > static_cast<std::uint32_t>(kMaxRank))
    throw FormatError(FormatError::Kind::malformed, "grid rank " + std::to_string(rank) + " out of range");
  Shape dims(rank);
  for (auto& n : dims) {
    std::uint64_t v = 0;
    if (!get_le(in, v)) throw FormatError(FormatError::Kind::truncated, "grid file truncated in header");
    if (v == 0 || v > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()))
      throw FormatError(FormatError::Kind::malformed, "grid extent out of range");
    n = static_cast<Index>(v);
  }
  Index cells = 0;
  try {
    cells = checked_cell_count(dims);
  } catch (const DomainError& e) {
    throw FormatError(FormatError::Kind::malformed, e.what());
  }
  std::vector<double> data(static_cast<std::size_t>(cells));
  const auto bytes = static_cast<std::streamsize>(data.size() * sizeof(double));
  if (!in.read(reinterpret_cast<char*>(data.data()), bytes) || in.gcount() != bytes)
    throw FormatError(FormatError::Kind::truncated, "grid payload truncated");
  if constexpr (std::endian::native == std::endian::big) {
    for (double& v : data) {
      auto* p = reinterpret_cast<char*>(&v);
      std::reverse(p, p + sizeof(double));
    }
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(FormatError::Kind::malformed, "trailing bytes after grid payload");
  return Grid(std::move(dims), std::move(data));
}

void save_grid(const std::filesystem::path& path, const Grid& grid) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for writing");
  write_grid(out, grid);
}

Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "'");
  return read_grid(in);
}

// ---------------------------------------------------------------------------

void write_grid_csv(std::ostream& out, const Grid& grid) {
  if (grid.rank() != 2) throw DomainError("CSV export needs a 2-D grid");
  const Index rows = grid.dims()[0], cols = grid.dims()[1];
  std::array<char, 64> buf{};
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      if (c) out << ',';
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), grid[r * cols + c]);
      out.write(buf.data(), res.ptr - buf.data());
    }
    out << '\n';
  }
  if (!out) throw FormatError(FormatError::Kind::io, "failed to write CSV");
}

Grid read_grid_csv(std::istream& in) {
  std::vector<double> data;
  Index rows = 0, cols = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Index count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      std::size_t a = start, b = end;
      while (a < b && line[a] == ' ') ++a;
      while (b > a && line[b - 1] == ' ') --b;
      char* stop = nullptr;
      const std::string field = line.substr(a, b - a);
      const double v = std::strtod(field.c_str(), &stop);
      if (field.empty() || stop != field.c_str() + field.size())
        throw FormatError(FormatError::Kind::malformed, "bad CSV value '" + field + "'");
      data.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols >= 0 && count != cols) throw FormatError(FormatError::Kind::malformed, "ragged CSV rows");
    cols = count;
    ++rows;
  }
  if (rows == 0) throw FormatError(FormatError::Kind::truncated, "empty CSV");
  return Grid(Shape{rows, cols}, std::move(data));
}

// ---------------------------------------------------------------------------

namespace {

json rect_corner(const Shape& v) { return json(v); }

Shape read_shape(const json& j, const char* what) {
  if (!j.is_array()) throw FormatError(FormatError::Kind::malformed, std::string(what) + " must be an array");
  Shape s;
  for (const auto& x : j) {
    if (!x.is_number_integer()) throw FormatError(FormatError::Kind::malformed, std::string(what) + " must hold integers");
    s.push_back(x.get<Index>());
  }
  return s;
}

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw FormatError(FormatError::Kind::malformed, std::string("PatchDoc is missing '") + key + "'");
  return j.at(key);
}

double read_double(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw FormatError(FormatError::Kind::malformed, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

json to_patch_doc(const Detection& det) {
  json patches = json::array();
  for (std::size_t j = 0; j < det.patches.size(); ++j) {
    patches.push_back({{"lo", rect_corner(det.patches[j].lo)},
                       {"hi", rect_corner(det.patches[j].hi)},
                       {"jump_estimate", det.jumps.at(j)}});
  }
  const auto& d = det.diagnostics;
  json envelopes = json::array();
  for (const Rect& r : d.envelopes) envelopes.push_back({{"lo", r.lo}, {"hi", r.hi}});
  json refined = json::array();
  for (bool b : d.refined) refined.push_back(b);
  return {{"dims", det.dims},
          {"k_hat", det.k_hat()},
          {"patches", patches},
          {"diagnostics",
           {{"mu0", d.mu0},
            {"sigma", d.sigma},
            {"q", d.q},
            {"flagged_blocks", d.flagged_blocks},
            {"min_cells", d.min_cells},
            {"component_cells", d.component_cells},
            {"envelopes", envelopes},
            {"refined", refined},
            {"calibration_fallback", d.calibration_fallback},
            {"lrv_clamped", d.lrv_clamped},
            {"merged_components", d.merged_components}}}};
}

static Detection parse_patch_doc(const json& doc) {
  Detection det;
  det.dims = read_shape(field(doc, "dims"), "dims");
  try {
    checked_cell_count(det.dims);
  } catch (const DomainError& e) {
    throw FormatError(FormatError::Kind::malformed, e.what());
  }
  const json& patches = field(doc, "patches");
  if (!patches.is_array()) throw FormatError(FormatError::Kind::malformed, "'patches' must be an array");
  for (const auto& p : patches) {
    Rect r{read_shape(field(p, "lo"), "lo"), read_shape(field(p, "hi"), "hi")};
    if (r.lo.size() != det.dims.size() || r.hi.size() != det.dims.size() || !r.within(det.dims) || r.empty())
      throw FormatError(FormatError::Kind::malformed, "patch rectangle invalid for dims");
    det.patches.push_back(std::move(r));
    det.jumps.push_back(read_double(p, "jump_estimate"));
  }
  const json& k_hat = field(doc, "k_hat");
  if (!k_hat.is_number_integer() || k_hat.get<Index>() != det.k_hat())
    throw FormatError(FormatError::Kind::malformed, "k_hat does not match the number of patches");

  auto& d = det.diagnostics;
  const json& dj = field(doc, "diagnostics");
  d.mu0 = read_double(dj, "mu0");
  d.sigma = read_double(dj, "sigma");
  d.q = read_double(dj, "q");
  d.flagged_blocks = field(dj, "flagged_blocks").get<Index>();
  d.component_cells = field(dj, "component_cells").get<std::vector<Index>>();
  // Optional fields, absent from minimal documents.
  if (dj.contains("min_cells")) d.min_cells = dj.at("min_cells").get<Index>();
  if (dj.contains("envelopes"))
    for (const auto& e : dj.at("envelopes")) d.envelopes.push_back({read_shape(field(e, "lo"), "lo"), read_shape(field(e, "hi"), "hi")});
  if (dj.contains("refined"))
    for (const auto& b : dj.at("refined")) d.refined.push_back(b.get<bool>());
  if (dj.contains("calibration_fallback")) d.calibration_fallback = dj.at("calibration_fallback").get<bool>();
  if (dj.contains("lrv_clamped")) d.lrv_clamped = dj.at("lrv_clamped").get<bool>();
  if (dj.contains("merged_components")) d.merged_components = dj.at("merged_components").get<Index>();
  return det;
}

Detection from_patch_doc(const json& doc) {
  try {
    return parse_patch_doc(doc);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("invalid PatchDoc: ") + e.what());
  }
}

json truth_patch_doc(const Shape& dims, const PatchSet& truth) {
  truth.validate(dims);
  Detection det;
  det.dims = dims;
  for (const auto& p : truth.patches) {
    det.patches.push_back(p.rect);
    det.jumps.push_back(p.jump);
  }
  det.diagnostics.mu0 = truth.baseline;
  return to_patch_doc(det);
}

void save_patch_doc(const std::filesystem::path& path, const Detection& det) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for writing");
  out << to_patch_doc(det).dump(2) << '\n';
  if (!out) throw FormatError(FormatError::Kind::io, "failed to write '" + path.string() + "'");
}

Detection load_patch_doc(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("invalid JSON in '") + path.string() + "': " + e.what());
  }
  return from_patch_doc(doc);
}

// ---------------------------------------------------------------------------

namespace {

FieldSpec parse_field_object(const json& j, std::uint64_t seed) {
  FieldSpec spec;
  spec.kind = field_kind_from_string(field(j, "kind").get<std::string>());
  spec.seed = j.value("seed", seed);
  spec.rho = j.value("rho", spec.rho);
  spec.order = j.value("order", spec.order);
  spec.tail_index = j.value("tail_index", spec.tail_index);
  spec.decay_base = j.value("decay_base", spec.decay_base);
  if (j.contains("stencil")) {
    for (const auto& t : j.at("stencil"))
      spec.stencil.push_back({read_shape(field(t, "offset"), "offset"), read_double(t, "weight")});
  }
  return spec;
}

SimulationSpec parse_simulation_spec_impl(const json& doc) {
  SimulationSpec spec;
  spec.dims = read_shape(field(doc, "dims"), "dims");
  checked_cell_count(spec.dims);
  const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
  if (doc.contains("noise")) {
    const json& noise = doc.at("noise");
    if (noise.is_string()) {
      spec.noise = parse_noise(noise.get<std::string>(), seed);
    } else if (noise.is_object()) {
      spec.noise = parse_field_object(noise, seed);
    } else if (!noise.is_null()) {
      throw FormatError(FormatError::Kind::malformed, "'noise' must be a string or an object");
    }
  }
  if (spec.noise) spec.noise->validate(static_cast<int>(spec.dims.size()));
  spec.truth.baseline = doc.value("baseline", 0.0);
  if (doc.contains("scenario")) {
    if (doc.contains("patches")) throw FormatError(FormatError::Kind::malformed, "give either 'scenario' or 'patches'");
    if (spec.dims.size() != 2 || spec.dims[0] != spec.dims[1])
      throw DomainError("canonical scenarios need square 2-D dims");
    const double baseline = spec.truth.baseline;
    spec.truth = canonical_scenario(scenario_from_string(doc.at("scenario").get<std::string>()), spec.dims[0],
                                    doc.value("jump", 1.0));
    spec.truth.baseline = baseline;
  } else if (doc.contains("patches")) {
    for (const auto& p : doc.at("patches"))
      spec.truth.patches.push_back(
          {Rect{read_shape(field(p, "lo"), "lo"), read_shape(field(p, "hi"), "hi")}, read_double(p, "jump")});
  }
  spec.truth.validate(spec.dims);
  return spec;
}

}  // namespace

SimulationSpec parse_simulation_spec(const json& doc) {
  try {
    return parse_simulation_spec_impl(doc);
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("invalid simulation spec: ") + e.what());
  }
}

Grid simulate(const SimulationSpec& spec) {
  const Grid noise = spec.noise ? gen_field(*spec.noise, spec.dims) : Grid(spec.dims, 0.0);
  return inject_patches(noise, spec.truth);
}

}  // namespace splade
