// Python bindings. Grids cross the boundary as float64 numpy arrays of rank
// 1 to 4; rectangles as splade.Rect (0-based, half-open).

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "splade/calibrate.hpp"
#include "splade/detect.hpp"
#include "splade/error.hpp"
#include "splade/io.hpp"
#include "splade/metrics.hpp"
#include "splade/parallel.hpp"
#include "splade/simulate.hpp"
#include "splade/single_patch.hpp"

namespace py = pybind11;
using namespace splade;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Grid to_grid(const Array& a) {
  if (a.ndim() < 1 || a.ndim() > kMaxRank) throw DomainError("arrays must have 1 to 4 dimensions");
  Shape dims(a.shape(), a.shape() + a.ndim());
  return Grid(dims, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Grid& g) {
  std::vector<py::ssize_t> shape(g.dims().begin(), g.dims().end());
  Array out(shape);
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

std::string rect_repr(const Rect& r) {
  std::ostringstream s;
  auto list = [&](const Shape& v) {
    s << '[';
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
    s << ']';
  };
  s << "Rect(lo=";
  list(r.lo);
  s << ", hi=";
  list(r.hi);
  s << ')';
  return s.str();
}

PatchSet to_patch_set(const std::vector<std::pair<Rect, double>>& patches, double baseline) {
  PatchSet ps;
  ps.baseline = baseline;
  for (const auto& [r, j] : patches) ps.patches.push_back({r, j});
  return ps;
}

std::vector<std::pair<Rect, double>> from_patch_set(const PatchSet& ps) {
  std::vector<std::pair<Rect, double>> out;
  for (const auto& p : ps.patches) out.emplace_back(p.rect, p.jump);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-patch localization on lattices";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DegenerateInput>(m, "DegenerateInput", base.ptr());
  py::register_exception<NoCandidate>(m, "NoCandidate", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  py::class_<Rect>(m, "Rect")
      .def(py::init([](Shape lo, Shape hi) {
             if (lo.size() != hi.size()) throw DomainError("lo and hi must have the same length");
             return Rect{std::move(lo), std::move(hi)};
           }),
           py::arg("lo"), py::arg("hi"))
      .def_readwrite("lo", &Rect::lo)
      .def_readwrite("hi", &Rect::hi)
      .def_property_readonly("volume", &Rect::volume)
      .def("empty", &Rect::empty)
      .def("slices", [](const Rect& r) {
        py::tuple t(r.lo.size());
        for (std::size_t k = 0; k < r.lo.size(); ++k) t[k] = py::slice(r.lo[k], r.hi[k], 1);
        return t;
      }, "Tuple of slices selecting the rectangle from a numpy array.")
      .def(py::self == py::self)
      .def(py::self < py::self)
      .def("__hash__", [](const Rect& r) { return py::hash(py::make_tuple(py::tuple(py::cast(r.lo)), py::tuple(py::cast(r.hi)))); })
      .def("__repr__", &rect_repr);

  py::class_<Detection>(m, "Detection")
      .def_readonly("dims", &Detection::dims)
      .def_readonly("patches", &Detection::patches)
      .def_readonly("jumps", &Detection::jumps)
      .def_property_readonly("k_hat", &Detection::k_hat)
      .def_property_readonly("diagnostics", [](const Detection& d) {
        return py::module_::import("json").attr("loads")(to_patch_doc(d).at("diagnostics").dump());
      })
      .def("to_json", [](const Detection& d, int indent) { return to_patch_doc(d).dump(indent); }, py::arg("indent") = 2)
      .def_static("from_json", [](const std::string& text) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
          throw FormatError(FormatError::Kind::malformed, e.what());
        }
        return from_patch_doc(doc);
      })
      .def(py::self == py::self)
      .def("__repr__", [](const Detection& d) { return "Detection(k_hat=" + std::to_string(d.k_hat()) + ")"; });

  m.def(
      "detect",
      [](const Array& x, double alpha, double level, double alpha2, double kappa2, double window_const,
         Index margin_blocks, double min_size_factor, std::optional<double> mu0, std::optional<double> sigma,
         const std::string& connectivity, bool split_by_sign, double beta, const std::string& kernel) {
        SpladeConfig cfg;
        cfg.alpha = alpha;
        cfg.level = level;
        cfg.stage2 = {alpha2, kappa2, window_const};
        cfg.margin_blocks = margin_blocks;
        cfg.min_size_factor = min_size_factor;
        cfg.mu0 = mu0;
        cfg.sigma = sigma;
        cfg.connectivity = connectivity_from_string(connectivity);
        cfg.split_by_sign = split_by_sign;
        cfg.beta = beta;
        if (kernel == "bartlett") {
          cfg.kernel = KernelKind::bartlett;
        } else if (kernel == "parzen") {
          cfg.kernel = KernelKind::parzen;
        } else {
          throw DomainError("unknown kernel '" + kernel + "'");
        }
        const Grid g = to_grid(x);
        py::gil_scoped_release release;
        return splade_detect(g, cfg);
      },
      py::arg("x"), py::kw_only(), py::arg("alpha") = 0.5, py::arg("level") = 0.05, py::arg("alpha2") = 0.5,
      py::arg("kappa2") = 0.01, py::arg("window_const") = 1.0, py::arg("margin_blocks") = 2,
      py::arg("min_size_factor") = 1.0, py::arg("mu0") = py::none(), py::arg("sigma") = py::none(),
      py::arg("connectivity") = "faces", py::arg("split_by_sign") = true, py::arg("beta") = 0.7,
      py::arg("kernel") = "bartlett", "Localize every anomalous rectangle in a lattice.");

  m.def(
      "naive_ls",
      [](const Array& x, double lambda1, double lambda2) { return naive_ls(to_grid(x), SearchBounds{lambda1, lambda2}); },
      py::arg("x"), py::arg("lambda1") = 0.0, py::arg("lambda2") = 1.0,
      "Exhaustive least-squares single-rectangle estimate.");
  m.def(
      "algorithm1",
      [](const Array& x, double alpha, double kappa, double window_const) {
        return algorithm1(to_grid(x), Stage1Params{alpha, kappa, window_const});
      },
      py::arg("x"), py::arg("alpha") = 0.5, py::arg("kappa") = 0.01, py::arg("window_const") = 1.0,
      "Two-stage single-rectangle estimate (subsample, then refine).");
  m.def("threshold_q", &threshold_q, py::arg("sigma"), py::arg("block_volume"), py::arg("num_blocks"),
        py::arg("level"));

  m.def(
      "noise",
      [](const Shape& shape, const std::string& kind, std::uint64_t seed) {
        const auto spec = parse_noise(kind, seed);
        return to_array(spec ? gen_field(*spec, shape) : Grid(shape));
      },
      py::arg("shape"), py::arg("kind") = "iid", py::arg("seed") = 0,
      "Mean-zero noise field: 'iid', 'sar:RHO', 'maxstable:TAIL[:BASE]', 'mdep:M' or 'none'.");
  m.def(
      "scenario",
      [](const std::string& name, Index n, double jump) {
        return from_patch_set(canonical_scenario(scenario_from_string(name), n, jump));
      },
      py::arg("name"), py::arg("n"), py::arg("jump") = 1.0, "Canonical patch layout as [(Rect, jump), ...].");
  m.def(
      "inject",
      [](const Array& x, const std::vector<std::pair<Rect, double>>& patches, double baseline) {
        return to_array(inject_patches(to_grid(x), to_patch_set(patches, baseline)));
      },
      py::arg("x"), py::arg("patches"), py::arg("baseline") = 0.0, "Adds baseline plus each patch's jump to x.");

  m.def(
      "ari",
      [](const Shape& dims, const std::vector<Rect>& a, const std::vector<Rect>& b) {
        return ari(Labeling::from_rects(dims, a), Labeling::from_rects(dims, b));
      },
      py::arg("dims"), py::arg("truth"), py::arg("estimate"));
  m.def("hausdorff", &hausdorff, py::arg("dims"), py::arg("truth"), py::arg("estimate"));
  m.def("jaccard_distance", py::overload_cast<const Rect&, const Rect&>(&jaccard_distance), py::arg("a"),
        py::arg("b"));

  m.def("save_grid", [](const std::filesystem::path& p, const Array& x) { save_grid(p, to_grid(x)); },
        py::arg("path"), py::arg("x"));
  m.def("load_grid", [](const std::filesystem::path& p) { return to_array(load_grid(p)); }, py::arg("path"));
  m.def("save_patch_doc", &save_patch_doc, py::arg("path"), py::arg("detection"));
  m.def("load_patch_doc", &load_patch_doc, py::arg("path"));

  m.def("thread_count", &thread_count, "Worker threads used by parallel loops (SPLADE_THREADS).");
}
