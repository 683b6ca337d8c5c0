#include "doctest.h"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "splade/bench.hpp"
#include "splade/frames.hpp"
#include "splade/io.hpp"
#include "splade/parallel.hpp"

using namespace splade;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct RunResult {
  int status = -1;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout; stderr is discarded.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" SPLADE_CLI_PATH "\" " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("cli: detect on a zero grid reports no patches") {
  TempDir dir("splade_cli_zero");
  save_grid(dir.path / "zero.splg", Grid(Shape{64, 64}));
  const RunResult r = run_cli("detect --in " + q(dir.path / "zero.splg"));
  REQUIRE(r.status == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("k_hat") == 0);
  CHECK(doc.at("patches").empty());
}

TEST_CASE("cli: usage errors exit non-zero") {
  CHECK(run_cli("--definitely-unknown").status != 0);
  CHECK(run_cli("detect --in /nonexistent/file.splg").status != 0);
  CHECK(run_cli("bench --grid 8 --reps 1").status != 0);
  CHECK(run_cli("").status != 0);
  CHECK(run_cli("--help").status == 0);
}

TEST_CASE("cli: simulate, detect, eval pipeline matches the library") {
  TempDir dir("splade_cli_pipeline");
  std::ofstream(dir.path / "spec.json") << R"({"dims": [128, 128], "noise": "sar:0.2", "seed": 3,
                                             "scenario": "config1", "jump": 1.0})";
  REQUIRE(run_cli("simulate --spec " + q(dir.path / "spec.json") + " --out " + q(dir.path / "x.splg")).status == 0);
  REQUIRE(fs::exists(dir.path / "x.truth.json"));
  const Grid grid = load_grid(dir.path / "x.splg");
  CHECK(grid == simulate(parse_simulation_spec(json::parse(slurp(dir.path / "spec.json")))));

  REQUIRE(run_cli("detect --in " + q(dir.path / "x.splg") + " --out " + q(dir.path / "est.json")).status == 0);
  const Detection est = load_patch_doc(dir.path / "est.json");
  CHECK(est == splade_detect(grid, SpladeConfig{}));

  const RunResult ev = run_cli("eval --truth " + q(dir.path / "x.truth.json") + " --est " + q(dir.path / "est.json") +
                               " --scenario config1 --seed 3");
  REQUIRE(ev.status == 0);
  std::istringstream csv(ev.out);
  const auto recs = read_bench_csv(csv);
  REQUIRE(recs.size() == 1);
  const Detection truth = load_patch_doc(dir.path / "x.truth.json");
  CHECK(recs[0] == evaluate("config1", 3, grid.dims(), truth.patches, est.patches, 0.0));

  SpladeConfig tuned;
  tuned.alpha = 0.4;
  tuned.mu0 = 0.0;
  tuned.connectivity = Connectivity::faces_and_corners;
  const RunResult t = run_cli("detect --in " + q(dir.path / "x.splg") + " --alpha 0.4 --mu0 0 --connectivity faces+corners");
  REQUIRE(t.status == 0);
  CHECK(from_patch_doc(json::parse(t.out)) == splade_detect(grid, tuned));
}

TEST_CASE("cli: bench output is reproducible and matches run_bench") {
  const std::string args = "bench --scenario config1 --grid 128 --noise sar:0.2 --reps 3 --seed 11 --no-timing";
  const RunResult a = run_cli(args);
  const RunResult b = run_cli(args);
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);

  BenchConfig cfg;
  cfg.grid = 128;
  cfg.noise = "sar:0.2";
  cfg.reps = 3;
  cfg.seed = 11;
  cfg.timing = false;
  std::ostringstream expected;
  write_bench_csv(expected, run_bench(cfg));
  CHECK(a.out == expected.str());
}

TEST_CASE("cli: results do not depend on SPLADE_THREADS") {
  const std::string args = "bench --scenario config2 --grid 128 --noise iid --jump 0.5 --reps 4 --no-timing";
  const RunResult one = run_cli(args, "SPLADE_THREADS=1");
  const RunResult four = run_cli(args, "SPLADE_THREADS=4");
  REQUIRE(one.status == 0);
  CHECK(one.out == four.out);
}

TEST_CASE("thread_count honours SPLADE_THREADS") {
  const char* saved = std::getenv("SPLADE_THREADS");
  const std::string restore = saved ? saved : "";
  ::setenv("SPLADE_THREADS", "3", 1);
  CHECK(thread_count() == 3);
  std::atomic<int> hits{0};
  parallel_for(100, [&](std::size_t) { ++hits; });
  CHECK(hits == 100);
  ::setenv("SPLADE_THREADS", "0", 1);
  CHECK(thread_count() >= 1);
  ::setenv("SPLADE_THREADS", "junk", 1);
  CHECK(thread_count() >= 1);
  if (saved) {
    ::setenv("SPLADE_THREADS", restore.c_str(), 1);
  } else {
    ::unsetenv("SPLADE_THREADS");
  }
}

TEST_CASE("cli: frames writes one PatchDoc line per frame") {
  TempDir dir("splade_cli_frames");
  for (int f = 0; f < 4; ++f) {
    Image im;
    im.height = im.width = 64;
    im.pixels.assign(64 * 64, 0.2);
    if (f >= 2)
      for (Index y = 16; y < 48; ++y)
        for (Index x = 10; x < 50; ++x) im.pixels[static_cast<std::size_t>(y * 64 + x)] = 0.8;
    write_pnm(dir.path / ("f" + std::to_string(f) + ".pgm"), im);
  }
  const RunResult r = run_cli("frames --dir " + q(dir.path) + " --baseline 0:2 --min-size-factor 0.5");
  REQUIRE(r.status == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<json> docs;
  while (std::getline(lines, line))
    if (!line.empty()) docs.push_back(json::parse(line));
  REQUIRE(docs.size() == 4);
  CHECK(docs[0].at("frame") == "f0.pgm");
  CHECK(docs[0].at("k_hat") == 0);
  CHECK(docs[1].at("k_hat") == 0);
  REQUIRE(docs[3].at("k_hat") == 1);
  const Detection d = from_patch_doc(docs[3]);
  CHECK(d.patches[0] == Rect{{16, 10}, {48, 50}});
  CHECK(run_cli("frames --dir " + q(dir.path) + " --baseline 0:9").status != 0);
}
