#include "fm3d/model.hpp"

#include <algorithm>
#include <cmath>

namespace fm3d {

template <typename T>
ConvLayer<T>::ConvLayer(std::string name, ConvLayerParams<T> params, GradMode mode)
    : Layer<T>(std::move(name)), params_(std::move(params)), mode_(mode) {
  if (params_.filter_mapped()) {
    validate_spec(params_.map().spec);
    require_shape(params_.map().data, map_dims(params_.map().spec).shape(), this->name() + " map");
    grad_ = Tensor<T>(params_.map().data.shape());
  } else {
    require_rank(params_.baseline_filters(), 4, this->name() + " filters");
    grad_ = Tensor<T>(params_.baseline_filters().shape());
  }
}

template <typename T>
Tensor<T> ConvLayer<T>::forward(const Tensor<T>& x) {
  input_ = x;
  if (params_.filter_mapped()) return fmconv_forward(x, params_);
  return conv2d_forward(x, params_.baseline_filters(), params_.conv_stride, params_.padding);
}

template <typename T>
Tensor<T> ConvLayer<T>::backward(const Tensor<T>& out_grad) {
  if (params_.filter_mapped()) {
    FmConvGrads<T> g = fmconv_backward(input_, params_, out_grad, mode_);
    grad_ = std::move(g.map_grad);
    return std::move(g.input_grad);
  }
  Conv2dGrads<T> g = conv2d_backward(input_, params_.baseline_filters(), out_grad,
                                     params_.conv_stride, params_.padding);
  grad_ = std::move(g.filter_grads);
  return std::move(g.input_grad);
}

template <typename T>
std::vector<ParamRef<T>> ConvLayer<T>::params() {
  if (params_.filter_mapped()) {
    auto& map = params_.map();
    return {{this->name() + ".map", &map.data, &grad_, &map.spec, mode_}};
  }
  return {{this->name() + ".weight", &params_.baseline_filters(), &grad_, nullptr, GradMode::Sum}};
}

template <typename T>
Tensor<T> ReluLayer<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return relu_forward(x);
}

template <typename T>
Tensor<T> ReluLayer<T>::backward(const Tensor<T>& out_grad) {
  return relu_backward(input_, out_grad);
}

template <typename T>
Tensor<T> MaxPool2Layer<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  MaxPoolResult<T> r = maxpool2_forward(x);
  argmax_ = std::move(r.argmax);
  return std::move(r.output);
}

template <typename T>
Tensor<T> MaxPool2Layer<T>::backward(const Tensor<T>& out_grad) {
  return maxpool2_backward(input_shape_, argmax_, out_grad);
}

template <typename T>
Tensor<T> GlobalAvgPoolLayer<T>::forward(const Tensor<T>& x) {
  input_shape_ = x.shape();
  return avgpool_global_forward(x);
}

template <typename T>
Tensor<T> GlobalAvgPoolLayer<T>::backward(const Tensor<T>& out_grad) {
  return avgpool_global_backward(input_shape_, out_grad);
}

template <typename T>
DenseLayer<T>::DenseLayer(std::string name, Tensor<T> weights, Tensor<T> bias)
    : Layer<T>(std::move(name)), weights_(std::move(weights)), bias_(std::move(bias)) {
  require_rank(weights_, 2, this->name() + " weights");
  require_shape(bias_, {weights_.dim(0)}, this->name() + " bias");
  weight_grad_ = Tensor<T>(weights_.shape());
  bias_grad_ = Tensor<T>(bias_.shape());
}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& x) {
  input_ = x;
  return dense_forward(x, weights_, bias_);
}

template <typename T>
Tensor<T> DenseLayer<T>::backward(const Tensor<T>& out_grad) {
  DenseGrads<T> g = dense_backward(input_, weights_, out_grad);
  weight_grad_ = std::move(g.weight_grad);
  bias_grad_ = std::move(g.bias_grad);
  return std::move(g.input_grad);
}

template <typename T>
std::vector<ParamRef<T>> DenseLayer<T>::params() {
  return {{this->name() + ".weight", &weights_, &weight_grad_, nullptr, GradMode::Sum},
          {this->name() + ".bias", &bias_, &bias_grad_, nullptr, GradMode::Sum}};
}

template <typename T>
ResidualBlock<T>::ResidualBlock(std::string name, std::unique_ptr<ConvLayer<T>> conv1,
                                std::unique_ptr<ConvLayer<T>> conv2)
    : Layer<T>(name), conv1_(std::move(conv1)), conv2_(std::move(conv2)), relu_(name + ".relu") {}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) {
  Tensor<T> out = conv2_->forward(relu_.forward(conv1_->forward(x)));
  require_shape(out, x.shape(), this->name() + " branch output");
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  return out;
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& out_grad) {
  Tensor<T> g = conv1_->backward(relu_.backward(conv2_->backward(out_grad)));
  require_shape(g, out_grad.shape(), this->name() + " branch input gradient");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += out_grad[i];
  return g;
}

template <typename T>
std::vector<ParamRef<T>> ResidualBlock<T>::params() {
  auto p = conv1_->params();
  auto q = conv2_->params();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

template <typename T>
void ResidualBlock<T>::set_grad_mode(GradMode mode) {
  conv1_->set_grad_mode(mode);
  conv2_->set_grad_mode(mode);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x) {
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h);
  return h;
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& logits_grad) {
  Tensor<T> g = logits_grad;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
T Model<T>::loss_and_grad(const Tensor<T>& x, std::span<const int> labels) {
  SoftmaxXent<T> sx = softmax_xent(forward(x), labels);
  backward(sx.grad);
  return sx.loss;
}

template <typename T>
std::vector<ParamRef<T>> Model<T>::params() {
  std::vector<ParamRef<T>> out;
  for (auto& layer : layers_) {
    auto p = layer->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
std::size_t Model<T>::param_count() {
  std::size_t n = 0;
  for (const auto& p : params()) n += p.value->size();
  return n;
}

template <typename T>
void Model<T>::set_grad_mode(GradMode mode) {
  for (auto& layer : layers_) layer->set_grad_mode(mode);
}

template <typename T>
GradCheckReport grad_check(Model<T>& model, const Tensor<T>& x, std::span<const int> labels,
                           const GradCheckOptions& options) {
  model.loss_and_grad(x, labels);
  auto params = model.params();

  // Snapshot analytic gradients before the probing forwards touch anything.
  std::vector<Tensor<T>> analytic;
  std::size_t total = 0;
  for (const auto& p : params) {
    Tensor<T> g = *p.grad;
    if (options.compare == GradCompare::CountScaled && p.map_spec &&
        p.grad_mode == GradMode::Average) {
      const CoverageCount cov = coverage_counts(*p.map_spec);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= static_cast<T>(cov.counts[j]);
    }
    analytic.push_back(std::move(g));
    total += p.value->size();
  }

  const std::size_t step = total < options.max_coords ? 1 : (total + options.max_coords - 1) / options.max_coords;
  auto loss_at = [&]() { return double(softmax_xent(model.forward(x), labels).loss); };

  GradCheckReport report;
  std::size_t flat = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& value = *params[pi].value;
    // First coordinate of this tensor that lands on the global stride.
    std::size_t i = (step - flat % step) % step;
    for (; i < value.size(); i += step) {
      const T saved = value[i];
      const T h = static_cast<T>(options.epsilon * std::max(1.0, std::abs(double(saved))));
      auto loss_shifted = [&](T d) {
        value[i] = saved + d;
        return loss_at();
      };
      double numeric = 0;
      if (options.five_point) {
        numeric = (-loss_shifted(2 * h) + 8 * loss_shifted(h) - 8 * loss_shifted(-h) + loss_shifted(-2 * h)) /
                  (12.0 * double(h));
      } else {
        numeric = (loss_shifted(h) - loss_shifted(-h)) / (2.0 * double(h));
      }
      value[i] = saved;
      const double exact = double(analytic[pi][i]);
      const double denom = std::max({std::abs(numeric), std::abs(exact), options.abs_floor});
      const double rel = std::abs(numeric - exact) / denom;
      ++report.coords_checked;
      if (report.worst_param.empty() || rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = params[pi].name;
        report.worst_index = i;
      }
    }
    flat += value.size();
  }
  report.passed = report.max_rel_err <= options.threshold;
  return report;
}

#define FM3D_INSTANTIATE_MODEL(T)                                                   \
  template class ConvLayer<T>;                                                      \
  template class ReluLayer<T>;                                                      \
  template class MaxPool2Layer<T>;                                                  \
  template class GlobalAvgPoolLayer<T>;                                             \
  template class DenseLayer<T>;                                                     \
  template class ResidualBlock<T>;                                                  \
  template class Model<T>;                                                          \
  template GradCheckReport grad_check(Model<T>&, const Tensor<T>&, std::span<const int>, \
                                      const GradCheckOptions&);

FM3D_INSTANTIATE_MODEL(float)
FM3D_INSTANTIATE_MODEL(double)

#undef FM3D_INSTANTIATE_MODEL

}  // namespace fm3d
