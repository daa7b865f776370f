#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fm3d/tensor.hpp"

namespace fm3d {

// Images are (N, C, H, W) scaled to [0, 1]; labels are class indices.
struct Dataset {
  Tensor<double> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  int num_classes() const noexcept;  // 1 + largest label, 0 when empty
  Shape sample_shape() const;        // (C, H, W)

  // Samples at `indices`, in that order.
  Dataset gather(std::span<const std::size_t> indices) const;
};

// IDX containers: images magic 0x00000803 with N, H, W big-endian u32
// dimensions; labels magic 0x00000801 with N. Pixel bytes are divided by 255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

// CSV with a header line, then `label,pix0,pix1,...` rows of C*H*W pixel
// values 0-255 in (c, h, w) row-major order.
Dataset load_csv(const std::filesystem::path& path, int channels, int height, int width);
Dataset parse_csv(std::string_view text, int channels, int height, int width);

// Class-conditional oriented gratings with a random phase per sample plus
// uniform noise of amplitude 0.25, clamped to [0, 1]. Sample i has label
// i mod num_classes. Same arguments give a bitwise-identical dataset.
Dataset synth_dataset(std::uint64_t seed, int n, int num_classes, int height, int width, int channels);

}  // namespace fm3d
