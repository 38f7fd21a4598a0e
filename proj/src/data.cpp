#include "pafrob/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <iterator>
#include <numbers>
#include <ostream>

#include "pafrob/csv.hpp"
#include "pafrob/rng.hpp"

namespace pafrob::data {

Shape Dataset::sample_shape() const {
  const Shape& s = x.shape();
  return Shape(s.begin() + 1, s.end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw std::invalid_argument("subset needs at least one index");
  const std::size_t width = shape_numel(sample_shape());
  const auto src = x.values();
  std::vector<double> values;
  values.reserve(indices.size() * width);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw std::out_of_range("subset index " + std::to_string(i) + " out of range");
    values.insert(values.end(), src.begin() + static_cast<std::ptrdiff_t>(i * width),
                  src.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
    labels.push_back(y[i]);
  }
  Shape shape = sample_shape();
  shape.insert(shape.begin(), indices.size());
  Dataset out = *this;
  out.x = Tensor(std::move(shape), std::move(values));
  out.y = std::move(labels);
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx);
}

namespace {

constexpr double kMoonShift = 1.5;
constexpr double kMoonScale = 0.25;

std::array<double, 2> upper_arc(double t) { return {std::cos(t), std::sin(t)}; }
std::array<double, 2> lower_arc(double t) { return {1.0 - std::cos(t), 0.5 - std::sin(t)}; }

double linf_gap(double t, double s) {
  const auto a = upper_arc(t);
  const auto b = lower_arc(s);
  return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

}  // namespace

double two_moons_margin() {
  static const double margin = [] {
    // Coarse grid over both arc parameters, then repeated zoom.
    constexpr int kCoarse = 1000;
    const double pi = std::numbers::pi;
    double best = linf_gap(0.0, 0.0), bt = 0.0, bs = 0.0;
    for (int i = 0; i <= kCoarse; ++i)
      for (int j = 0; j <= kCoarse; ++j) {
        const double t = pi * i / kCoarse, s = pi * j / kCoarse;
        const double d = linf_gap(t, s);
        if (d < best) best = d, bt = t, bs = s;
      }
    double radius = 2.0 * pi / kCoarse;
    for (int round = 0; round < 12; ++round) {
      const double t0 = bt, s0 = bs;
      for (int i = -20; i <= 20; ++i)
        for (int j = -20; j <= 20; ++j) {
          const double t = std::clamp(t0 + radius * i / 20.0, 0.0, pi);
          const double s = std::clamp(s0 + radius * j / 20.0, 0.0, pi);
          const double d = linf_gap(t, s);
          if (d < best) best = d, bt = t, bs = s;
        }
      radius /= 8.0;
    }
    return best * kMoonScale;
  }();
  return margin;
}

Dataset two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("two_moons needs a positive even n");
  if (noise < 0.0) throw std::invalid_argument("two_moons noise must be >= 0");
  Rng rng(derive_seed(seed, "two_moons"));
  const std::size_t half = n / 2;
  std::vector<double> values(n * 2);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % half;
    const double t = half > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
    const int label = i < half ? 0 : 1;
    auto p = label == 0 ? upper_arc(t) : lower_arc(t);
    for (int d = 0; d < 2; ++d) {
      const double noisy = p[static_cast<std::size_t>(d)] + noise * rng.normal();
      values[i * 2 + static_cast<std::size_t>(d)] =
          std::clamp((noisy + kMoonShift) * kMoonScale, 0.0, 1.0);
    }
    labels[i] = label;
  }
  Dataset ds;
  ds.x = Tensor({n, 2}, std::move(values));
  ds.y = std::move(labels);
  ds.classes = 2;
  ds.name = "two_moons";
  ds.seed = seed;
  ds.margin = two_moons_margin();
  return ds;
}

Dataset gaussian_blobs(std::size_t n, const std::vector<std::array<double, 2>>& centers,
                       double sigma, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("gaussian_blobs needs n > 0");
  if (centers.size() < 2) throw std::invalid_argument("gaussian_blobs needs at least two centers");
  if (sigma < 0.0) throw std::invalid_argument("gaussian_blobs sigma must be >= 0");
  for (const auto& c : centers)
    if (c[0] < 0.0 || c[0] > 1.0 || c[1] < 0.0 || c[1] > 1.0)
      throw std::invalid_argument("gaussian_blobs centers must lie in [0,1]^2");

  constexpr double kCut = 3.0;
  Rng rng(derive_seed(seed, "gaussian_blobs"));
  std::vector<double> values(n * 2);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % centers.size();
    double px = centers[c][0], py = centers[c][1];
    if (sigma > 0.0) {
      for (;;) {
        const double dx = sigma * rng.normal(), dy = sigma * rng.normal();
        px = centers[c][0] + dx;
        py = centers[c][1] + dy;
        if (std::hypot(dx, dy) <= kCut * sigma && px >= 0.0 && px <= 1.0 && py >= 0.0 && py <= 1.0)
          break;
      }
    }
    values[i * 2] = px;
    values[i * 2 + 1] = py;
    labels[i] = static_cast<int>(c);
  }

  double min_center = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < centers.size(); ++a)
    for (std::size_t b = a + 1; b < centers.size(); ++b)
      min_center = std::min(min_center, std::hypot(centers[a][0] - centers[b][0],
                                                   centers[a][1] - centers[b][1]));
  Dataset ds;
  ds.x = Tensor({n, 2}, std::move(values));
  ds.y = std::move(labels);
  ds.classes = centers.size();
  ds.name = "gaussian_blobs";
  ds.seed = seed;
  ds.margin = min_center - 2.0 * kCut * sigma;
  return ds;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t offset,
                        const std::filesystem::path& path) {
  if (b.size() < offset + 4)
    throw IdxTruncatedError("IDX file " + path.string() + " is truncated in its header");
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

void check_magic(std::uint32_t got, std::uint32_t expected, const std::filesystem::path& path) {
  if (got != expected)
    throw IdxMagicError("IDX file " + path.string() + ": bad magic, expected " + hex32(expected) +
                        ", got " + hex32(got));
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto img = read_bytes(images_path);
  check_magic(read_be32(img, 0, images_path), kIdxImageMagic, images_path);
  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t pixels = count * rows * cols;
  if (img.size() < 16 + pixels)
    throw IdxTruncatedError("IDX image file " + images_path.string() + " holds " +
                            std::to_string(img.size() - 16) + " pixel bytes, header promises " +
                            std::to_string(pixels));

  const auto lab = read_bytes(labels_path);
  check_magic(read_be32(lab, 0, labels_path), kIdxLabelMagic, labels_path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  if (lab.size() < 8 + label_count)
    throw IdxTruncatedError("IDX label file " + labels_path.string() + " holds " +
                            std::to_string(lab.size() - 8) + " labels, header promises " +
                            std::to_string(label_count));
  if (label_count != count)
    throw IdxCountMismatchError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                                std::to_string(label_count) + " labels");
  if (count == 0 || rows == 0 || cols == 0) throw IdxError("IDX files contain no images");

  std::vector<double> values(pixels);
  for (std::size_t i = 0; i < pixels; ++i) values[i] = static_cast<double>(img[16 + i]) / 255.0;
  std::vector<int> labels(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = lab[8 + i];
    max_label = std::max(max_label, labels[i]);
  }

  Dataset ds;
  ds.x = Tensor({count, 1, rows, cols}, std::move(values));
  ds.y = std::move(labels);
  ds.classes = static_cast<std::size_t>(max_label) + 1;
  ds.name = "idx:" + images_path.filename().string();
  return ds;
}

void write_csv(std::ostream& os, const Dataset& ds) {
  const std::size_t width = shape_numel(ds.sample_shape());
  std::vector<std::string> fields;
  for (std::size_t d = 0; d < width; ++d) fields.push_back("f" + std::to_string(d));
  fields.push_back("label");
  write_csv_row(os, fields);
  const auto v = ds.x.values();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    fields.clear();
    for (std::size_t d = 0; d < width; ++d) fields.push_back(format_double(v[i * width + d]));
    fields.push_back(std::to_string(ds.y[i]));
    write_csv_row(os, fields);
  }
}

}  // namespace pafrob::data
