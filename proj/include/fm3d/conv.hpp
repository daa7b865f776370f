#pragma once

#include <variant>

#include "fm3d/filter_map.hpp"
#include "fm3d/tensor.hpp"

namespace fm3d {

// Direct 2D cross-correlation (no kernel flip).
//   input   (N, C, H, W)
//   filters (K, s1, s2, C)
//   output  (N, K, (H + 2p - s1)/stride + 1, (W + 2p - s2)/stride + 1)
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& filters, int stride, int padding);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input_grad;    // (N, C, H, W)
  Tensor<T> filter_grads;  // (K, s1, s2, C)
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& filters,
                               const Tensor<T>& out_grad, int stride, int padding);

template <typename T>
struct BaselineWeights {
  Tensor<T> filters;  // (K, s1, s2, c)
};

// A convolution layer's trainable state. conv_stride and padding act on the
// input image; a filter map's ExtractionStrides act on the map only.
template <typename T>
struct ConvLayerParams {
  std::variant<BaselineWeights<T>, FilterMap<T>> weights;
  int conv_stride = 1;
  int padding = 0;

  bool filter_mapped() const noexcept { return std::holds_alternative<FilterMap<T>>(weights); }
  const FilterMap<T>& map() const { return std::get<FilterMap<T>>(weights); }
  FilterMap<T>& map() { return std::get<FilterMap<T>>(weights); }
  const Tensor<T>& baseline_filters() const { return std::get<BaselineWeights<T>>(weights).filters; }
  Tensor<T>& baseline_filters() { return std::get<BaselineWeights<T>>(weights).filters; }

  std::size_t out_channels() const;
  FilterShape filter_shape() const;
  std::size_t param_count() const;
};

// Extract the filter bank, then convolve. Requires FilterMapped weights.
template <typename T>
Tensor<T> fmconv_forward(const Tensor<T>& input, const ConvLayerParams<T>& params);

template <typename T>
struct FmConvGrads {
  Tensor<T> input_grad;
  Tensor<T> map_grad;  // (m1, m2, mc)
};

template <typename T>
FmConvGrads<T> fmconv_backward(const Tensor<T>& input, const ConvLayerParams<T>& params,
                               const Tensor<T>& out_grad, GradMode mode = GradMode::Average);

}  // namespace fm3d
