#include "fm3d/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "fm3d/ini.hpp"
#include "fm3d/rng.hpp"

namespace fm3d {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at, const char* what) {
  if (bytes.size() < at + 4) throw Error(Errc::TruncatedFile, std::string(what) + ": header truncated");
  return (std::uint32_t(bytes[at]) << 24) | (std::uint32_t(bytes[at + 1]) << 16) |
         (std::uint32_t(bytes[at + 2]) << 8) | std::uint32_t(bytes[at + 3]);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int Dataset::num_classes() const noexcept {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

Shape Dataset::sample_shape() const {
  require_rank(images, 4, "dataset images");
  return {images.dim(1), images.dim(2), images.dim(3)};
}

Dataset Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t per = shape_size(sample_shape());
  Dataset out{Tensor<double>({indices.size(), images.dim(1), images.dim(2), images.dim(3)}), {}};
  out.labels.reserve(indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    if (i >= size()) throw Error(Errc::IndexOutOfRange, "sample " + std::to_string(i));
    std::copy_n(images.raw() + i * per, per, out.images.raw() + b * per);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (read_be32(images, 0, "image file") != kImageMagic) {
    throw Error(Errc::BadMagic, "image file magic is not 0x00000803");
  }
  if (read_be32(labels, 0, "label file") != kLabelMagic) {
    throw Error(Errc::BadMagic, "label file magic is not 0x00000801");
  }
  const std::size_t n = read_be32(images, 4, "image file");
  const std::size_t h = read_be32(images, 8, "image file");
  const std::size_t w = read_be32(images, 12, "image file");
  const std::size_t n_labels = read_be32(labels, 4, "label file");
  if (n != n_labels) {
    throw Error(Errc::CountMismatch, std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  }
  const std::size_t pixels = n * h * w;
  if (images.size() < 16 + pixels) throw Error(Errc::TruncatedFile, "image file shorter than its header claims");
  if (labels.size() < 8 + n) throw Error(Errc::TruncatedFile, "label file shorter than its header claims");

  Dataset ds{Tensor<double>({n, 1, h, w}), std::vector<int>(n)};
  for (std::size_t i = 0; i < pixels; ++i) ds.images[i] = double(images[16 + i]) / 255.0;
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = labels[8 + i];
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  return parse_idx(img, lab);
}

Dataset parse_csv(std::string_view text, int channels, int height, int width) {
  if (channels < 1 || height < 1 || width < 1) throw Error(Errc::BadDims, "CSV image dims must be >= 1");
  const std::size_t per = std::size_t(channels) * height * width;
  std::vector<double> pixels;
  std::vector<int> labels;
  std::size_t pos = 0;
  int line_no = 0;
  bool header = true;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::size_t fields = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      std::int64_t v = 0;
      try {
        v = parse_int(cell);
      } catch (const Error& e) {
        throw ConfigError(Errc::BadValue, "csv", line_no, e.message());
      }
      if (fields == 0) {
        if (v < 0) throw ConfigError(Errc::BadValue, "csv", line_no, "negative label");
        labels.push_back(int(v));
      } else {
        if (v < 0 || v > 255) throw ConfigError(Errc::BadValue, "csv", line_no, "pixel outside 0-255");
        pixels.push_back(double(v) / 255.0);
      }
      ++fields;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields != per + 1) {
      throw ConfigError(Errc::CountMismatch, "csv", line_no,
                        "expected " + std::to_string(per) + " pixels, got " + std::to_string(fields - 1));
    }
  }
  const std::size_t n = labels.size();
  return Dataset{Tensor<double>({n, std::size_t(channels), std::size_t(height), std::size_t(width)}, std::move(pixels)),
                 std::move(labels)};
}

Dataset load_csv(const std::filesystem::path& path, int channels, int height, int width) {
  const auto bytes = read_file(path);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), channels, height,
                   width);
}

Dataset synth_dataset(std::uint64_t seed, int n, int num_classes, int height, int width, int channels) {
  if (num_classes < 1 || n < num_classes || height < 1 || width < 1 || channels < 1) {
    throw Error(Errc::BadDims, "synthetic dataset needs n >= num_classes >= 1 and positive image dims");
  }
  constexpr double kPi = std::numbers::pi;
  constexpr double kContrast = 0.3;
  constexpr double kNoise = 0.25;
  Rng rng(seed);
  Dataset ds{Tensor<double>({std::size_t(n), std::size_t(channels), std::size_t(height), std::size_t(width)}),
             std::vector<int>(std::size_t(n))};
  const double extent = double(std::max(height, width));
  for (int s = 0; s < n; ++s) {
    const int label = s % num_classes;
    ds.labels[s] = label;
    // Orientation spreads classes over half a turn; spatial frequency
    // alternates between two values so neighbouring classes also differ in scale.
    const double theta = kPi * label / num_classes;
    const double cycles = 2.0 + 1.0 * (label % 2);
    const double omega = 2.0 * kPi * cycles / extent;
    const double phase = uniform(rng, 0.0, 2.0 * kPi);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int c = 0; c < channels; ++c) {
      // Each channel sees the grating shifted by a quarter period.
      const double channel_phase = phase + 0.5 * kPi * c;
      for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
          const double v = 0.5 + kContrast * std::sin(omega * (ct * w + st * h) + channel_phase) +
                           uniform(rng, -kNoise, kNoise);
          ds.images.at(std::size_t(s), std::size_t(c), std::size_t(h), std::size_t(w)) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return ds;
}

}  // namespace fm3d
