#include "fm3d/layers.hpp"

#include <cmath>

namespace fm3d {
namespace {

template <typename T>
std::size_t features_per_sample(const Tensor<T>& x) {
  if (x.rank() < 2 || x.dim(0) == 0) {
    throw Error(Errc::ShapeMismatch, "expected a batched tensor, got shape " + shape_string(x.shape()));
  }
  return x.size() / x.dim(0);
}

}  // namespace

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& out_grad) {
  require_shape(out_grad, x.shape(), "relu output gradient");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? out_grad[i] : T(0);
  return g;
}

template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& x) {
  require_rank(x, 4, "maxpool input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h < 2 || w < 2) throw Error(Errc::ShapeMismatch, "maxpool2 needs H, W >= 2");
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult<T> r{Tensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j, ++o) {
          std::size_t best = x.offset(b, ch, 2 * i, 2 * j);
          for (std::size_t di = 0; di < 2; ++di) {
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t at = x.offset(b, ch, 2 * i + di, 2 * j + dj);
              if (x[at] > x[best]) best = at;
            }
          }
          r.output[o] = x[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                            const Tensor<T>& out_grad) {
  if (argmax.size() != out_grad.size()) {
    throw Error(Errc::ShapeMismatch, "maxpool gradient does not match recorded argmax");
  }
  Tensor<T> g(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += out_grad[o];
  return g;
}

template <typename T>
Tensor<T> avgpool_global_forward(const Tensor<T>& x) {
  require_rank(x, 4, "avgpool input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (hw == 0) throw Error(Errc::ShapeMismatch, "avgpool over empty spatial extent");
  Tensor<T> y({n, c, 1, 1});
  for (std::size_t p = 0; p < n * c; ++p) {
    T acc = 0;
    for (std::size_t k = 0; k < hw; ++k) acc += x[p * hw + k];
    y[p] = acc / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
Tensor<T> avgpool_global_backward(const Shape& input_shape, const Tensor<T>& out_grad) {
  if (input_shape.size() != 4) throw Error(Errc::ShapeMismatch, "avgpool input must be rank 4");
  require_shape(out_grad, {input_shape[0], input_shape[1], 1, 1}, "avgpool output gradient");
  const std::size_t hw = input_shape[2] * input_shape[3];
  Tensor<T> g(input_shape);
  for (std::size_t p = 0; p < out_grad.size(); ++p) {
    const T share = out_grad[p] / static_cast<T>(hw);
    for (std::size_t k = 0; k < hw; ++k) g[p * hw + k] = share;
  }
  return g;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  const std::size_t f = features_per_sample(x);
  require_rank(weights, 2, "dense weights");
  const std::size_t out = weights.dim(0);
  if (weights.dim(1) != f) {
    throw Error(Errc::ShapeMismatch, "dense layer expects " + std::to_string(weights.dim(1)) +
                                         " features, input has " + std::to_string(f));
  }
  require_shape(bias, {out}, "dense bias");
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, out, 1, 1});
  for (std::size_t b = 0; b < n; ++b) {
    const T* xin = x.raw() + b * f;
    for (std::size_t o = 0; o < out; ++o) {
      const T* w = weights.raw() + o * f;
      T acc = bias[o];
      for (std::size_t i = 0; i < f; ++i) acc += w[i] * xin[i];
      y[b * out + o] = acc;
    }
  }
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights,
                             const Tensor<T>& out_grad) {
  const std::size_t f = features_per_sample(x);
  const std::size_t n = x.dim(0), out = weights.dim(0);
  require_shape(out_grad, {n, out, 1, 1}, "dense output gradient");
  DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weights.shape()), Tensor<T>({out})};
  for (std::size_t b = 0; b < n; ++b) {
    const T* xin = x.raw() + b * f;
    T* gx = g.input_grad.raw() + b * f;
    for (std::size_t o = 0; o < out; ++o) {
      const T go = out_grad[b * out + o];
      const T* w = weights.raw() + o * f;
      T* gw = g.weight_grad.raw() + o * f;
      for (std::size_t i = 0; i < f; ++i) {
        gw[i] += go * xin[i];
        gx[i] += go * w[i];
      }
      g.bias_grad[o] += go;
    }
  }
  return g;
}

template <typename T>
SoftmaxXent<T> softmax_xent(const Tensor<T>& logits, std::span<const int> labels) {
  const std::size_t k = features_per_sample(logits);
  const std::size_t n = logits.dim(0);
  if (labels.size() != n) {
    throw Error(Errc::ShapeMismatch, std::to_string(labels.size()) + " labels for batch of " +
                                         std::to_string(n));
  }
  SoftmaxXent<T> r{T(0), Tensor<T>(logits.shape())};
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const int label = labels[b];
    if (label < 0 || std::size_t(label) >= k) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                             std::to_string(k) + ")");
    }
    const T* z = logits.raw() + b * k;
    T* g = r.grad.raw() + b * k;
    T peak = z[0];
    for (std::size_t i = 1; i < k; ++i) peak = std::max(peak, z[i]);
    T denom = 0;
    for (std::size_t i = 0; i < k; ++i) denom += std::exp(z[i] - peak);
    const T log_denom = std::log(denom);
    r.loss += (log_denom - (z[label] - peak)) * inv_n;
    for (std::size_t i = 0; i < k; ++i) g[i] = std::exp(z[i] - peak - log_denom) * inv_n;
    g[label] -= inv_n;
  }
  return r;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  const std::size_t k = features_per_sample(logits);
  std::vector<int> out(logits.dim(0));
  for (std::size_t b = 0; b < out.size(); ++b) {
    const T* z = logits.raw() + b * k;
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i) {
      if (z[i] > z[best]) best = i;
    }
    out[b] = int(best);
  }
  return out;
}

#define FM3D_INSTANTIATE_LAYERS(T)                                                            \
  template Tensor<T> relu_forward(const Tensor<T>&);                                          \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                       \
  template MaxPoolResult<T> maxpool2_forward(const Tensor<T>&);                               \
  template Tensor<T> maxpool2_backward(const Shape&, std::span<const std::size_t>,            \
                                       const Tensor<T>&);                                     \
  template Tensor<T> avgpool_global_forward(const Tensor<T>&);                                \
  template Tensor<T> avgpool_global_backward(const Shape&, const Tensor<T>&);                 \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template SoftmaxXent<T> softmax_xent(const Tensor<T>&, std::span<const int>);               \
  template std::vector<int> argmax_rows(const Tensor<T>&);

FM3D_INSTANTIATE_LAYERS(float)
FM3D_INSTANTIATE_LAYERS(double)

#undef FM3D_INSTANTIATE_LAYERS

}  // namespace fm3d
