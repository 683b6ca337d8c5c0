#include "splade/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "splade/error.hpp"

namespace splade {

Labeling Labeling::from_rects(const Shape& dims, const std::vector<Rect>& rects) {
  const Index n = checked_cell_count(dims);
  Labeling out{dims, std::vector<std::int32_t>(static_cast<std::size_t>(n), 0)};
  const Shape strides = row_major_strides(dims);
  const int d = static_cast<int>(dims.size());
  for (std::size_t j = 0; j < rects.size(); ++j) {
    const Rect& r = rects[j];
    if (r.rank() != d || !r.within(dims)) throw DomainError("labeling rectangle outside the domain");
    if (r.empty()) continue;
    Shape ext(d);
    for (int k = 0; k < d; ++k) ext[k] = r.extent(k);
    Shape pos(d, 0);
    do {
      Index flat = 0;
      for (int k = 0; k < d; ++k) flat += (r.lo[k] + pos[k]) * strides[k];
      auto& label = out.labels[static_cast<std::size_t>(flat)];
      if (label != 0) throw DomainError("labeling rectangles overlap");
      label = static_cast<std::int32_t>(j + 1);
    } while (next_index(pos, ext));
  }
  return out;
}

namespace {

double choose2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

double ari(const Labeling& a, const Labeling& b) {
  if (a.dims != b.dims || a.labels.size() != b.labels.size()) throw DomainError("labelings differ in shape");
  const auto n = static_cast<double>(a.labels.size());
  std::map<std::pair<std::int32_t, std::int32_t>, double> table;
  std::map<std::int32_t, double> rows, cols;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    table[{a.labels[i], b.labels[i]}] += 1.0;
    rows[a.labels[i]] += 1.0;
    cols[b.labels[i]] += 1.0;
  }
  if (n < 2.0 || (rows.size() == 1 && cols.size() == 1)) return 1.0;
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, c] : table) index += choose2(c);
  for (const auto& [key, c] : rows) sum_rows += choose2(c);
  for (const auto& [key, c] : cols) sum_cols += choose2(c);
  const double expected = sum_rows * sum_cols / choose2(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return index == expected ? 1.0 : 0.0;
  return (index - expected) / denom;
}

namespace {

double jaccard_from_counts(double size_a, double size_b, double overlap) {
  const double uni = size_a + size_b - overlap;
  if (uni <= 0.0) return 0.0;
  return (uni - overlap) / uni;
}

}  // namespace

double jaccard_distance(const Rect& a, const Rect& b) {
  const double va = a.empty() ? 0.0 : static_cast<double>(a.volume());
  const double vb = b.empty() ? 0.0 : static_cast<double>(b.volume());
  const Rect both = intersect(a, b);
  return jaccard_from_counts(va, vb, both.empty() ? 0.0 : static_cast<double>(both.volume()));
}

double jaccard_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw DomainError("masks differ in size");
  double na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    both += (a[i] != 0) && (b[i] != 0);
  }
  return jaccard_from_counts(na, nb, both);
}

double hausdorff(const Shape& dims, const std::vector<Rect>& truth, const std::vector<Rect>& est) {
  const double n = static_cast<double>(checked_cell_count(dims));
  auto volumes = [&](const std::vector<Rect>& rects) {
    std::vector<double> v;
    for (const Rect& r : rects) {
      if (static_cast<std::size_t>(r.rank()) != dims.size() || !r.within(dims))
        throw DomainError("rectangle outside the domain");
      v.push_back(r.empty() ? 0.0 : static_cast<double>(r.volume()));
    }
    return v;
  };
  const std::vector<double> va = volumes(truth), vb = volumes(est);
  const std::size_t ka = truth.size(), kb = est.size();

  // Index 0 is the background of each collection; sizes and overlaps follow
  // from pairwise rectangle intersections because patches are disjoint.
  std::vector<double> size_a(ka + 1), size_b(kb + 1);
  std::vector<std::vector<double>> overlap(ka + 1, std::vector<double>(kb + 1, 0.0));
  double union_a = 0.0, union_b = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < ka; ++i) union_a += va[i];
  for (std::size_t j = 0; j < kb; ++j) union_b += vb[j];
  if (union_a > n || union_b > n) throw DomainError("patches overlap");
  for (std::size_t i = 0; i < ka; ++i) {
    for (std::size_t j = 0; j < kb; ++j) {
      const Rect r = intersect(truth[i], est[j]);
      overlap[i + 1][j + 1] = r.empty() ? 0.0 : static_cast<double>(r.volume());
      cross += overlap[i + 1][j + 1];
    }
  }
  size_a[0] = n - union_a;
  size_b[0] = n - union_b;
  for (std::size_t i = 0; i < ka; ++i) size_a[i + 1] = va[i];
  for (std::size_t j = 0; j < kb; ++j) size_b[j + 1] = vb[j];
  for (std::size_t i = 1; i <= ka; ++i) {
    double covered = 0.0;
    for (std::size_t j = 1; j <= kb; ++j) covered += overlap[i][j];
    overlap[i][0] = size_a[i] - covered;
  }
  for (std::size_t j = 1; j <= kb; ++j) {
    double covered = 0.0;
    for (std::size_t i = 1; i <= ka; ++i) covered += overlap[i][j];
    overlap[0][j] = size_b[j] - covered;
  }
  overlap[0][0] = n - union_a - union_b + cross;

  std::vector<std::vector<double>> dist(ka + 1, std::vector<double>(kb + 1));
  for (std::size_t i = 0; i <= ka; ++i)
    for (std::size_t j = 0; j <= kb; ++j) dist[i][j] = jaccard_from_counts(size_a[i], size_b[j], overlap[i][j]);

  const double inf = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  bool any_a = false, any_b = false;
  for (std::size_t i = 0; i <= ka; ++i) {
    if (size_a[i] == 0.0) continue;
    any_a = true;
    double best = inf;
    for (std::size_t j = 0; j <= kb; ++j)
      if (size_b[j] > 0.0) best = std::min(best, dist[i][j]);
    worst = std::max(worst, best);
  }
  for (std::size_t j = 0; j <= kb; ++j) {
    if (size_b[j] == 0.0) continue;
    any_b = true;
    double best = inf;
    for (std::size_t i = 0; i <= ka; ++i)
      if (size_a[i] > 0.0) best = std::min(best, dist[i][j]);
    worst = std::max(worst, best);
  }
  if (!any_a || !any_b) return 0.0;
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* field) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    value = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
      throw FormatError(FormatError::Kind::malformed, std::string("bad value for ") + field + ": '" + s + "'");
  } else {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw FormatError(FormatError::Kind::malformed, std::string("bad value for ") + field + ": '" + s + "'");
  }
  return value;
}

}  // namespace

std::string bench_csv_row(const BenchRecord& r) {
  if (r.scenario.find_first_of(",\n\r") != std::string::npos)
    throw DomainError("scenario name may not contain commas or newlines");
  std::ostringstream os;
  os << r.scenario << ',' << r.seed << ',' << r.k_hat << ',' << r.k_true << ',' << format_double(r.ari) << ','
     << format_double(r.hausdorff) << ',' << format_double(r.time_s);
  return os.str();
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : records) out << bench_csv_row(r) << '\n';
}

std::vector<BenchRecord> read_bench_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(FormatError::Kind::truncated, "empty bench CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kBenchCsvHeader) throw FormatError(FormatError::Kind::malformed, "unexpected bench CSV header");
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw FormatError(FormatError::Kind::malformed, "bench CSV row needs 7 fields");
    BenchRecord r;
    r.scenario = f[0];
    r.seed = parse_number<std::uint64_t>(f[1], "seed");
    r.k_hat = parse_number<Index>(f[2], "k_hat");
    r.k_true = parse_number<Index>(f[3], "k_true");
    r.ari = parse_number<double>(f[4], "ari");
    r.hausdorff = parse_number<double>(f[5], "hausdorff");
    r.time_s = parse_number<double>(f[6], "time_s");
    out.push_back(std::move(r));
  }
  return out;
}

BenchRecord evaluate(const std::string& scenario, std::uint64_t seed, const Shape& dims,
                     const std::vector<Rect>& truth, const std::vector<Rect>& est, double time_s) {
  BenchRecord r;
  r.scenario = scenario;
  r.seed = seed;
  r.k_true = static_cast<Index>(truth.size());
  r.k_hat = static_cast<Index>(est.size());
  r.ari = ari(Labeling::from_rects(dims, truth), Labeling::from_rects(dims, est));
  r.hausdorff = hausdorff(dims, truth, est);
  r.time_s = time_s;
  return r;
}

}  // namespace splade
