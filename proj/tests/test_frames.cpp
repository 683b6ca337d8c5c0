#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "splade/detect.hpp"
#include "splade/error.hpp"
#include "splade/frames.hpp"

using namespace splade;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Image gray(Index h, Index w, double v) {
  Image im;
  im.height = h;
  im.width = w;
  im.pixels.assign(static_cast<std::size_t>(h * w), v);
  return im;
}

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03d.pgm", i);
  return buf;
}

}  // namespace

TEST_CASE("PNM round trip") {
  TempDir dir("splade_pnm_rt");
  Image rgb;
  rgb.height = 3;
  rgb.width = 4;
  rgb.channels = 3;
  for (int i = 0; i < 36; ++i) rgb.pixels.push_back(static_cast<double>(i * 7 % 256) / 255.0);
  write_pnm(dir.path / "a.ppm", rgb);
  const Image back = read_pnm(dir.path / "a.ppm");
  CHECK(back.channels == 3);
  CHECK(back.height == 3);
  CHECK(back.width == 4);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(rgb.pixels[i]));

  write_pnm(dir.path / "b.pgm", gray(5, 2, 0.2));
  const Image g = read_pnm(dir.path / "b.pgm");
  CHECK(g.channels == 1);
  CHECK(g.at(4, 1, 0) == doctest::Approx(51.0 / 255.0));
}

TEST_CASE("hand-written PGM headers") {
  TempDir dir("splade_pnm_hand");
  {
    std::ofstream out(dir.path / "m2.pgm", std::ios::binary);
    out << "P5\n# comment line\n2 2\n2\n";
    out.put(1).put(1).put(1).put(1);
  }
  const Image im = read_pnm(dir.path / "m2.pgm");
  for (double v : im.pixels) CHECK(v == 0.5);
  {
    std::ofstream out(dir.path / "wide.pgm", std::ios::binary);
    out << "P5 1 1 65535\n";
    out.put(static_cast<char>(0x80)).put(0);
  }
  CHECK(read_pnm(dir.path / "wide.pgm").pixels[0] == doctest::Approx(32768.0 / 65535.0));
  {
    std::ofstream out(dir.path / "ascii.pgm");
    out << "P2\n1 1\n255\n7\n";
  }
  try {
    read_pnm(dir.path / "ascii.pgm");
    FAIL("ASCII PGM accepted");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::unsupported);
  }
  {
    std::ofstream out(dir.path / "short.pgm", std::ios::binary);
    out << "P5\n4 4\n255\n";
    out.put(1);
  }
  CHECK_THROWS_AS(read_pnm(dir.path / "short.pgm"), FormatError);
}

TEST_CASE("frame ranges and channels") {
  const FrameRange r = parse_frame_range("2:5");
  CHECK(r.first == 2);
  CHECK(r.last == 5);
  CHECK_THROWS_AS(parse_frame_range("3:3"), DomainError);
  CHECK_THROWS_AS(parse_frame_range("3"), DomainError);
  CHECK_THROWS_AS(parse_frame_range("a:b"), DomainError);
  CHECK(channel_from_string("g") == Channel::g);
  CHECK(to_string(Channel::mean) == "mean");
  CHECK_THROWS_AS(channel_from_string("alpha"), DomainError);
}

TEST_CASE("baseline centring") {
  TempDir dir("splade_frames_centre");
  for (int i = 0; i < 3; ++i) write_pnm(dir.path / frame_name(i), gray(6, 5, 0.4));
  const FrameSource src(dir.path, {0, 2}, Channel::mean);
  CHECK(src.size() == 3);
  CHECK(src.dims() == Shape{6, 5});
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Grid g = src.grid(i);
    for (double v : g.values()) CHECK(v == 0.0);
  }

  Image rgb;
  rgb.height = 2;
  rgb.width = 2;
  rgb.channels = 3;
  for (int p = 0; p < 4; ++p) rgb.pixels.insert(rgb.pixels.end(), {1.0, 0.0, 0.5});
  TempDir cdir("splade_frames_rgb");
  write_pnm(cdir.path / "a.ppm", rgb);
  write_pnm(cdir.path / "b.ppm", rgb);
  CHECK(FrameSource(cdir.path, {0, 1}, Channel::r).grid(1)[0] == 0.0);
  const auto grids = frames_to_grids(cdir.path, {0, 1}, Channel::b);
  CHECK(grids.size() == 2);

  CHECK_THROWS_AS(FrameSource(dir.path, {0, 4}, Channel::mean), DomainError);
  CHECK_THROWS_AS(FrameSource(dir.path / "missing", {0, 1}, Channel::mean), FormatError);

  write_pnm(dir.path / frame_name(9), gray(4, 4, 0.4));
  const FrameSource mixed(dir.path, {0, 1}, Channel::mean);
  CHECK_THROWS_AS(mixed.grid(3), FormatError);
}

TEST_CASE("a moving bright square is tracked to within two blocks") {
  TempDir dir("splade_frames_track");
  const Index n = 128, side = 40;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.03);
  const int baseline = 4, frames = 10;
  for (int f = 0; f < frames; ++f) {
    Image im = gray(n, n, 0.0);
    const Index y0 = 30 + 4 * f, x0 = 20 + 6 * f;
    for (Index y = 0; y < n; ++y)
      for (Index x = 0; x < n; ++x) {
        double v = 0.4 + noise(rng);
        if (f >= baseline && y >= y0 && y < y0 + side && x >= x0 && x < x0 + side) v += 0.3;
        im.pixels[static_cast<std::size_t>(y * n + x)] = v;
      }
    write_pnm(dir.path / frame_name(f), im);
  }
  const FrameSource src(dir.path, {0, static_cast<std::size_t>(baseline)}, Channel::mean);
  const Index L = 11;
  for (int f = baseline; f < frames; ++f) {
    const Detection det = splade_detect(src.grid(static_cast<std::size_t>(f)), SpladeConfig{});
    INFO("frame " << f);
    REQUIRE(det.k_hat() == 1);
    const Index y0 = 30 + 4 * f, x0 = 20 + 6 * f;
    const Rect& r = det.patches[0];
    CHECK(std::abs(r.lo[0] - y0) <= 2 * L);
    CHECK(std::abs(r.lo[1] - x0) <= 2 * L);
    CHECK(std::abs(r.hi[0] - (y0 + side)) <= 2 * L);
    CHECK(std::abs(r.hi[1] - (x0 + side)) <= 2 * L);
    CHECK(det.jumps[0] == doctest::Approx(0.3).epsilon(0.1));
  }
}
