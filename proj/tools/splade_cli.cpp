// splade: command-line front end for simulation, detection, evaluation,
// benchmarking and frame processing.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "splade/bench.hpp"
#include "splade/detect.hpp"
#include "splade/error.hpp"
#include "splade/frames.hpp"
#include "splade/io.hpp"
#include "splade/metrics.hpp"
#include "splade/parallel.hpp"
#include "splade/simulate.hpp"

namespace {

using namespace splade;

struct DetectFlags {
  double alpha = 0.5;
  double alpha2 = 0.5;
  double kappa2 = 0.01;
  double window_const = 1.0;
  double level = 0.05;
  std::string mu0 = "auto";
  std::string sigma = "auto";
  Index margin_blocks = 2;
  double min_size_factor = 1.0;
  std::string connectivity = "faces";
  bool no_sign_split = false;
  double beta = 0.7;
  std::string kernel = "bartlett";

  void add_to(CLI::App& app) {
    app.add_option("--alpha", alpha, "first-stage block exponent")->capture_default_str();
    app.add_option("--alpha2", alpha2, "refinement subsampling exponent")->capture_default_str();
    app.add_option("--kappa2", kappa2, "refinement window growth exponent")->capture_default_str();
    app.add_option("--window-const", window_const, "refinement window constant")->capture_default_str();
    app.add_option("--level", level, "family-wise level of the block threshold")->capture_default_str();
    app.add_option("--mu0", mu0, "baseline level, or 'auto' to estimate")->capture_default_str();
    app.add_option("--sigma", sigma, "long-run standard deviation, or 'auto' to estimate")->capture_default_str();
    app.add_option("--margin-blocks", margin_blocks, "envelope margin in blocks")->capture_default_str();
    app.add_option("--min-size-factor", min_size_factor, "component size threshold factor")->capture_default_str();
    app.add_option("--connectivity", connectivity, "block adjacency: faces or faces+corners")
        ->capture_default_str()
        ->check(CLI::IsMember({"faces", "faces+corners"}));
    app.add_flag("--no-sign-split", no_sign_split, "join adjacent flagged blocks of opposite sign");
    app.add_option("--beta", beta, "boundary-layer thickness exponent")->capture_default_str();
    app.add_option("--kernel", kernel, "long-run variance kernel: bartlett or parzen")
        ->capture_default_str()
        ->check(CLI::IsMember({"bartlett", "parzen"}));
  }

  static std::optional<double> auto_or_number(const std::string& text, const char* name) {
    if (text == "auto") return std::nullopt;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size()) throw DomainError(std::string("--") + name + " must be 'auto' or a number");
    return v;
  }

  SpladeConfig config() const {
    SpladeConfig cfg;
    cfg.alpha = alpha;
    cfg.level = level;
    cfg.stage2 = {alpha2, kappa2, window_const};
    cfg.margin_blocks = margin_blocks;
    cfg.min_size_factor = min_size_factor;
    cfg.mu0 = auto_or_number(mu0, "mu0");
    cfg.sigma = auto_or_number(sigma, "sigma");
    cfg.connectivity = connectivity_from_string(connectivity);
    cfg.split_by_sign = !no_sign_split;
    cfg.beta = beta;
    cfg.kernel = kernel == "parzen" ? KernelKind::parzen : KernelKind::bartlett;
    cfg.validate();
    return cfg;
  }
};

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  auto out = open_out(path);
  out << text;
  if (!out) throw FormatError(FormatError::Kind::io, "failed to write '" + path + "'");
}

std::string default_truth_path(const std::string& out) {
  std::filesystem::path p(out);
  p.replace_extension(".truth.json");
  return p.string();
}

int cmd_simulate(const std::string& spec_path, const std::string& out, std::string truth_out) {
  std::ifstream in(spec_path);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + spec_path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::malformed, std::string("invalid JSON in '") + spec_path + "': " + e.what());
  }
  const SimulationSpec spec = parse_simulation_spec(doc);
  save_grid(out, simulate(spec));
  if (truth_out.empty()) truth_out = default_truth_path(out);
  write_text(truth_out, truth_patch_doc(spec.dims, spec.truth).dump(2) + "\n");
  std::cerr << "simulate: wrote " << out << " and " << truth_out << "\n";
  return 0;
}

int cmd_detect(const std::string& in, const std::string& out, const DetectFlags& flags) {
  const Grid grid = load_grid(in);
  const Detection det = splade_detect(grid, flags.config());
  write_text(out, to_patch_doc(det).dump(2) + "\n");
  std::cerr << "detect: k_hat = " << det.k_hat() << (det.diagnostics.calibration_fallback ? " (calibration fallback)" : "")
            << "\n";
  return 0;
}

int cmd_eval(const std::string& truth_path, const std::string& est_path, const std::string& out,
             const std::string& scenario, std::uint64_t seed, double time_s) {
  const Detection truth = load_patch_doc(truth_path);
  const Detection est = load_patch_doc(est_path);
  if (truth.dims != est.dims) throw DomainError("truth and estimate have different dims");
  const BenchRecord rec = evaluate(scenario, seed, truth.dims, truth.patches, est.patches, time_s);
  std::ostringstream os;
  write_bench_csv(os, {rec});
  write_text(out, os.str());
  return 0;
}

int cmd_bench(BenchConfig cfg, const DetectFlags& flags, const std::string& out) {
  cfg.detect = flags.config();
  const auto records = run_bench(cfg);
  std::ostringstream os;
  write_bench_csv(os, records);
  write_text(out, os.str());
  const BenchSummary s = summarize(records);
  std::cerr << "bench: reps=" << s.reps << " mean_k_hat=" << s.mean_k_hat << " frac_k_correct=" << s.frac_k_correct
            << " mean_ari=" << s.mean_ari << " mean_hausdorff=" << s.mean_hausdorff
            << " median_time_s=" << s.median_time_s << "\n";
  return 0;
}

int cmd_frames(const std::string& dir, const std::string& baseline, const std::string& channel,
               const std::string& out, const DetectFlags& flags) {
  const SpladeConfig cfg = flags.config();
  const FrameSource source(dir, parse_frame_range(baseline), channel_from_string(channel));
  std::vector<std::string> lines(source.size());
  parallel_for(source.size(), [&](std::size_t i) {
    nlohmann::json doc = to_patch_doc(splade_detect(source.grid(i), cfg));
    doc["frame"] = source.path(i).filename().string();
    lines[i] = doc.dump();
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(out, text);
  std::cerr << "frames: processed " << source.size() << " frames\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splade: localization of rectangular mean-shift patches in lattice data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "splade 0.1.0");

  std::string spec_path, sim_out, truth_out;
  auto* sim = app.add_subcommand("simulate", "generate a lattice from a JSON simulation spec");
  sim->add_option("--spec", spec_path, "simulation spec (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "output grid (SPLG)")->required();
  sim->add_option("--truth", truth_out, "truth PatchDoc (default: <out>.truth.json)");

  std::string det_in, det_out = "-";
  DetectFlags det_flags;
  auto* det = app.add_subcommand("detect", "localize patches in a SPLG grid");
  det->add_option("--in", det_in, "input grid (SPLG)")->required()->check(CLI::ExistingFile);
  det->add_option("--out", det_out, "output PatchDoc (JSON, '-' for stdout)")->capture_default_str();
  det_flags.add_to(*det);

  std::string ev_truth, ev_est, ev_out = "-", ev_scenario = "custom";
  std::uint64_t ev_seed = 0;
  double ev_time = 0.0;
  auto* ev = app.add_subcommand("eval", "score an estimate against the truth");
  ev->add_option("--truth", ev_truth, "truth PatchDoc")->required()->check(CLI::ExistingFile);
  ev->add_option("--est", ev_est, "estimated PatchDoc")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "output CSV ('-' for stdout)")->capture_default_str();
  ev->add_option("--scenario", ev_scenario, "scenario label for the record")->capture_default_str();
  ev->add_option("--seed", ev_seed, "seed label for the record")->capture_default_str();
  ev->add_option("--time", ev_time, "wall time to record (seconds)")->capture_default_str();

  BenchConfig bench_cfg;
  DetectFlags bench_flags;
  std::string bench_out = "-";
  bool no_timing = false;
  auto* bench = app.add_subcommand("bench", "run a Monte-Carlo replicate loop");
  bench->add_option("--scenario", bench_cfg.scenario, "config1, config2 or none")
      ->capture_default_str()
      ->check(CLI::IsMember({"config1", "config2", "none"}));
  bench->add_option("--grid", bench_cfg.grid, "lattice side N")->capture_default_str();
  bench->add_option("--noise", bench_cfg.noise, "iid, sar:RHO, maxstable:TAIL[:BASE], mdep:M or none")
      ->capture_default_str();
  bench->add_option("--jump", bench_cfg.jump, "jump size")->capture_default_str();
  bench->add_option("--reps", bench_cfg.reps, "number of replicates")->capture_default_str();
  bench->add_option("--seed", bench_cfg.seed, "base seed; replicate r uses seed XOR r")->capture_default_str();
  bench->add_option("--out", bench_out, "output CSV ('-' for stdout)")->capture_default_str();
  bench->add_flag("--no-timing", no_timing, "write time_s = 0 for reproducible output");
  bench_flags.add_to(*bench);

  std::string fr_dir, fr_baseline, fr_channel = "mean", fr_out = "-";
  DetectFlags fr_flags;
  auto* fr = app.add_subcommand("frames", "detect patches in every frame of a PGM/PPM directory");
  fr->add_option("--dir", fr_dir, "frame directory")->required()->check(CLI::ExistingDirectory);
  fr->add_option("--baseline", fr_baseline, "baseline frames a:b (half-open, sorted order)")->required();
  fr->add_option("--channel", fr_channel, "r, g, b or mean")
      ->capture_default_str()
      ->check(CLI::IsMember({"r", "g", "b", "mean"}));
  fr->add_option("--out", fr_out, "output JSON lines ('-' for stdout)")->capture_default_str();
  fr_flags.add_to(*fr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints help to stdout and errors to stderr.
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(spec_path, sim_out, truth_out);
    if (*det) return cmd_detect(det_in, det_out, det_flags);
    if (*ev) return cmd_eval(ev_truth, ev_est, ev_out, ev_scenario, ev_seed, ev_time);
    if (*bench) {
      bench_cfg.timing = !no_timing;
      return cmd_bench(bench_cfg, bench_flags, bench_out);
    }
    if (*fr) return cmd_frames(fr_dir, fr_baseline, fr_channel, fr_out, fr_flags);
  } catch (const std::exception& e) {
    std::cerr << "splade: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
