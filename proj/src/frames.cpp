#include "splade/frames.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "splade/error.hpp"

namespace splade {

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c = 0;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

Index header_number(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](unsigned char ch) { return std::isdigit(ch); }))
    throw FormatError(tok.empty() ? FormatError::Kind::truncated : FormatError::Kind::malformed,
                      "bad pixmap header in '" + path.string() + "'");
  return std::stoll(tok);
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "'");
  char magic[2] = {};
  if (!in.read(magic, 2)) throw FormatError(FormatError::Kind::truncated, "empty pixmap '" + path.string() + "'");
  Image img;
  if (magic[0] == 'P' && magic[1] == '5') {
    img.channels = 1;
  } else if (magic[0] == 'P' && magic[1] == '6') {
    img.channels = 3;
  } else {
    throw FormatError(FormatError::Kind::unsupported, "'" + path.string() + "' is not a binary PGM/PPM file");
  }
  img.width = header_number(in, path);
  img.height = header_number(in, path);
  const Index maxval = header_number(in, path);
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 65535)
    throw FormatError(FormatError::Kind::malformed, "bad pixmap dimensions in '" + path.string() + "'");
  // header_token consumed exactly one whitespace byte after maxval.
  const std::size_t samples = static_cast<std::size_t>(img.width * img.height * img.channels);
  const std::size_t width = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(samples * width);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw FormatError(FormatError::Kind::truncated, "pixmap data truncated in '" + path.string() + "'");
  img.pixels.resize(samples);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < samples; ++i) {
    const unsigned v = width == 1 ? raw[i] : (unsigned{raw[2 * i]} << 8) | raw[2 * i + 1];
    img.pixels[i] = static_cast<double>(std::min<unsigned>(v, static_cast<unsigned>(maxval))) * scale;
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw DomainError("pixmaps have 1 or 3 channels");
  if (image.pixels.size() != static_cast<std::size_t>(image.width * image.height * image.channels))
    throw DomainError("pixel count does not match the image size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open '" + path.string() + "' for writing");
  out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(image.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "failed to write '" + path.string() + "'");
}

std::string to_string(Channel c) {
  switch (c) {
    case Channel::r: return "r";
    case Channel::g: return "g";
    case Channel::b: return "b";
    case Channel::mean: return "mean";
  }
  return "mean";
}

Channel channel_from_string(const std::string& name) {
  if (name == "r") return Channel::r;
  if (name == "g") return Channel::g;
  if (name == "b") return Channel::b;
  if (name == "mean") return Channel::mean;
  throw DomainError("unknown channel '" + name + "' (expected r, g, b or mean)");
}

FrameRange parse_frame_range(const std::string& text) {
  const std::size_t colon = text.find(':');
  auto number = [&](const std::string& s) -> std::size_t {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); }))
      throw DomainError("bad frame range '" + text + "' (expected a:b)");
    return static_cast<std::size_t>(std::stoull(s));
  };
  if (colon == std::string::npos) throw DomainError("bad frame range '" + text + "' (expected a:b)");
  FrameRange r{number(text.substr(0, colon)), number(text.substr(colon + 1))};
  if (r.last <= r.first) throw DomainError("empty baseline range '" + text + "'");
  return r;
}

FrameSource::FrameSource(const std::filesystem::path& dir, FrameRange baseline, Channel channel)
    : channel_(channel) {
  if (!std::filesystem::is_directory(dir)) throw FormatError(FormatError::Kind::io, "'" + dir.string() + "' is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files_.push_back(entry.path());
  }
  std::sort(files_.begin(), files_.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  if (files_.empty()) throw FormatError(FormatError::Kind::io, "no PGM/PPM frames in '" + dir.string() + "'");
  if (baseline.last <= baseline.first) throw DomainError("empty baseline range");
  if (baseline.last > files_.size())
    throw DomainError("baseline range ends at frame " + std::to_string(baseline.last) + " but only " +
                      std::to_string(files_.size()) + " frames exist");

  const Image first = read_pnm(files_.front());
  height_ = first.height;
  width_ = first.width;
  for (std::size_t i = baseline.first; i < baseline.last; ++i) {
    const std::vector<double> plane = channel_plane(read_pnm(files_[i]));
    if (baseline_.empty()) baseline_.assign(plane.size(), 0.0);
    for (std::size_t p = 0; p < plane.size(); ++p) baseline_[p] += plane[p];
  }
  const double count = static_cast<double>(baseline.last - baseline.first);
  for (double& v : baseline_) v /= count;
}

std::vector<double> FrameSource::channel_plane(const Image& image) const {
  if (image.height != height_ || image.width != width_)
    throw FormatError(FormatError::Kind::malformed, "frames differ in size");
  std::vector<double> plane(static_cast<std::size_t>(height_ * width_));
  for (Index y = 0; y < height_; ++y) {
    for (Index x = 0; x < width_; ++x) {
      double v = 0.0;
      if (image.channels == 1) {
        v = image.at(y, x, 0);
      } else if (channel_ == Channel::mean) {
        v = (image.at(y, x, 0) + image.at(y, x, 1) + image.at(y, x, 2)) / 3.0;
      } else {
        v = image.at(y, x, static_cast<int>(channel_));
      }
      plane[static_cast<std::size_t>(y * width_ + x)] = v;
    }
  }
  return plane;
}

Grid FrameSource::grid(std::size_t i) const {
  std::vector<double> plane = channel_plane(read_pnm(files_.at(i)));
  for (std::size_t p = 0; p < plane.size(); ++p) plane[p] -= baseline_[p];
  return Grid(dims(), std::move(plane));
}

std::vector<Grid> frames_to_grids(const std::filesystem::path& dir, FrameRange baseline, Channel channel) {
  const FrameSource source(dir, baseline, channel);
  std::vector<Grid> out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) out.push_back(source.grid(i));
  return out;
}

}  // namespace splade
