#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fm3d/conv.hpp"
#include "fm3d/layers.hpp"

namespace fm3d {

// A trainable tensor together with its gradient buffer. Filter maps also
// carry their spec so callers can recover coverage counts.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
  const FilterMapSpec* map_spec = nullptr;
  GradMode grad_mode = GradMode::Sum;
};

// Each layer caches what its backward pass needs during forward. backward()
// overwrites the layer's parameter gradients with those of the last forward
// batch and returns the input gradient.
template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const noexcept { return name_; }
  virtual std::string_view kind() const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  virtual Tensor<T> backward(const Tensor<T>& out_grad) = 0;
  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual void set_grad_mode(GradMode) {}

 private:
  std::string name_;
};

template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  ConvLayer(std::string name, ConvLayerParams<T> params, GradMode mode = GradMode::Average);

  std::string_view kind() const override { return "conv"; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& out_grad) override;
  std::vector<ParamRef<T>> params() override;
  void set_grad_mode(GradMode mode) override { mode_ = mode; }

  const ConvLayerParams<T>& conv_params() const noexcept { return params_; }
  ConvLayerParams<T>& conv_params() noexcept { return params_; }
  // Map gradient for filter-mapped layers, filter-bank gradient otherwise.
  const Tensor<T>& grad() const noexcept { return grad_; }

 private:
  ConvLayerParams<T> params_;
  GradMode mode_;
  Tensor<T> grad_;
  Tensor<T> input_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string_view kind() const override { return "relu"; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& out_grad) override;

 private:
  Tensor<T> input_;
};

template <typename T>
class MaxPool2Layer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string_view kind() const override { return "maxpool"; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& out_grad) override;

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class GlobalAvgPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string_view kind() const override { return "avgpool"; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& out_grad) override;

 private:
  Shape input_shape_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(std::string name, Tensor<T> weights, Tensor<T> bias);
  std::string_view kind() const override { return "dense"; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& out_grad) override;
  std::vector<ParamRef<T>> params() override;

  const Tensor<T>& weights() const noexcept { return weights_; }
  const Tensor<T>& bias() const noexcept { return bias_; }

 private:
  Tensor<T> weights_, bias_;
  Tensor<T> weight_grad_, bias_grad_;
  Tensor<T> input_;
};

// out = conv2(relu(conv1(x))) + x. Both convolutions must preserve shape.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(std::string name, std::unique_ptr<ConvLayer<T>> conv1,
                std::unique_ptr<ConvLayer<T>> conv2);
  std::string_view kind() const override { return "residual"; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& out_grad) override;
  std::vector<ParamRef<T>> params() override;
  void set_grad_mode(GradMode mode) override;

  ConvLayer<T>& conv1() noexcept { return *conv1_; }
  ConvLayer<T>& conv2() noexcept { return *conv2_; }

 private:
  std::unique_ptr<ConvLayer<T>> conv1_, conv2_;
  ReluLayer<T> relu_;
};

template <typename T>
class Model {
 public:
  Model() = default;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  const std::vector<std::unique_ptr<Layer<T>>>& layers() const noexcept { return layers_; }

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& logits_grad);
  // Forward, softmax cross-entropy, backward. Parameter gradients are left in
  // the layers' grad buffers.
  T loss_and_grad(const Tensor<T>& x, std::span<const int> labels);

  std::vector<ParamRef<T>> params();
  std::size_t param_count();
  void set_grad_mode(GradMode mode);

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

enum class GradCompare {
  AsComputed,   // analytic gradient exactly as the layers report it
  CountScaled,  // average-mode map gradients multiplied by coverage counts
};

struct GradCheckOptions {
  double epsilon = 1e-5;     // step is epsilon * max(1, |theta|)
  double threshold = 1e-5;
  double abs_floor = 1e-6;   // denominator floor for near-zero gradients
  std::size_t max_coords = 10000;
  GradCompare compare = GradCompare::AsComputed;
  // Five-point stencil (error O(h^4)) instead of the two-point central
  // difference; pair it with a larger epsilon such as 1e-3.
  bool five_point = false;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  bool passed = false;
};

// Central finite differences of the mean softmax cross-entropy over a
// deterministic set of parameter coordinates: all of them when there are
// fewer than max_coords, otherwise an evenly strided sample.
template <typename T>
GradCheckReport grad_check(Model<T>& model, const Tensor<T>& x, std::span<const int> labels,
                           const GradCheckOptions& options = {});

}  // namespace fm3d
