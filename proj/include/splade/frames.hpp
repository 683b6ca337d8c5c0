#pragma once

// Frame ingestion for video-style inputs: binary PGM (P5) / PPM (P6) frames
// in a directory, centred by a baseline mean image and reduced to one
// channel per frame.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splade/grid.hpp"

namespace splade {

/// Decoded pixmap with samples scaled to [0, 1] by the file's maxval.
struct Image {
  Index height = 0;
  Index width = 0;
  int channels = 1;            // 1 (PGM) or 3 (PPM)
  std::vector<double> pixels;  // row-major, interleaved channels

  double at(Index y, Index x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

Image read_pnm(const std::filesystem::path& path);
/// Writes P5 for 1 channel, P6 for 3, maxval 255; samples are clamped to
/// [0, 1] and rounded.
void write_pnm(const std::filesystem::path& path, const Image& image);

enum class Channel { r, g, b, mean };

std::string to_string(Channel c);
Channel channel_from_string(const std::string& name);

/// Half-open range [first, last) of frame indices in sorted order.
struct FrameRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Parses "a:b" (half-open).
FrameRange parse_frame_range(const std::string& text);

/// Frames of a directory (.pgm/.ppm/.pnm, sorted by file name) read on
/// demand. The baseline mean image is computed once at construction.
class FrameSource {
 public:
  FrameSource(const std::filesystem::path& dir, FrameRange baseline, Channel channel);

  std::size_t size() const { return files_.size(); }
  const std::filesystem::path& path(std::size_t i) const { return files_.at(i); }
  Shape dims() const { return {height_, width_}; }

  /// Selected channel of frame i minus the baseline mean of that channel, as
  /// a height x width grid with values in [-1, 1].
  Grid grid(std::size_t i) const;

 private:
  std::vector<double> channel_plane(const Image& image) const;

  std::vector<std::filesystem::path> files_;
  Channel channel_;
  Index height_ = 0;
  Index width_ = 0;
  std::vector<double> baseline_;
};

/// Every frame of the directory as a centred grid.
std::vector<Grid> frames_to_grids(const std::filesystem::path& dir, FrameRange baseline, Channel channel);

}  // namespace splade
