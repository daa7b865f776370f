#pragma once

#include <span>
#include <vector>

#include "fm3d/tensor.hpp"

namespace fm3d {

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& out_grad);

// 2x2 max pooling with stride 2 over (N, C, H, W); a trailing odd row or
// column is dropped. Ties go to the first element in row-major order.
template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input offset per output element
};

template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                            const Tensor<T>& out_grad);

// Mean over H and W: (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Tensor<T> avgpool_global_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> avgpool_global_backward(const Shape& input_shape, const Tensor<T>& out_grad);

// Fully connected layer on the flattened per-sample features.
//   x (N, ...) with F features per sample, weights (out, F), bias (out)
//   output (N, out, 1, 1)
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input_grad;
  Tensor<T> weight_grad;
  Tensor<T> bias_grad;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights,
                             const Tensor<T>& out_grad);

template <typename T>
struct SoftmaxXent {
  T loss;              // mean over the batch
  Tensor<T> grad;      // d loss / d logits, same shape as logits
};

// logits (N, classes, ...) with classes*... flattened per sample.
template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, std::span<const int> labels);

// Index of the largest logit per sample; ties resolve to the lowest class.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

}  // namespace fm3d
