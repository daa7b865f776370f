#include "fm3d/conv.hpp"

#include <algorithm>

namespace fm3d {
namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;        // input
  std::size_t k, s1, s2;         // filters
  std::size_t out_h, out_w;
  int stride, pad;
};

template <typename T>
ConvGeometry check_geometry(const Tensor<T>& input, const Tensor<T>& filters, int stride,
                            int padding) {
  require_rank(input, 4, "conv input");
  require_rank(filters, 4, "conv filters");
  if (stride < 1 || padding < 0) {
    throw Error(Errc::ShapeMismatch, "conv stride must be >= 1 and padding >= 0");
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), filters.dim(0),
                 filters.dim(1), filters.dim(2), 0, 0, stride, padding};
  if (filters.dim(3) != g.c) {
    throw Error(Errc::ShapeMismatch, "filter channels " + std::to_string(filters.dim(3)) +
                                         " != input channels " + std::to_string(g.c));
  }
  const auto padded_h = std::int64_t(g.h) + 2 * padding;
  const auto padded_w = std::int64_t(g.w) + 2 * padding;
  if (padded_h < std::int64_t(g.s1) || padded_w < std::int64_t(g.s2)) {
    throw Error(Errc::ShapeMismatch, "filter " + std::to_string(g.s1) + "x" + std::to_string(g.s2) +
                                         " larger than padded input");
  }
  g.out_h = std::size_t((padded_h - std::int64_t(g.s1)) / stride + 1);
  g.out_w = std::size_t((padded_w - std::int64_t(g.s2)) / stride + 1);
  return g;
}

// Output positions o in [lo, hi) whose input coordinate o*stride + offset - pad
// lies inside [0, extent).
struct Span {
  std::size_t lo, hi;
};

Span valid_outputs(std::size_t offset, int pad, int stride, std::size_t extent, std::size_t out) {
  const std::int64_t shift = std::int64_t(offset) - pad;
  std::int64_t lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
  std::int64_t hi = (std::int64_t(extent) - 1 - shift);
  hi = hi < 0 ? 0 : hi / stride + 1;
  hi = std::min<std::int64_t>(hi, std::int64_t(out));
  lo = std::min(lo, hi);
  return {std::size_t(lo), std::size_t(hi)};
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& filters, int stride, int padding) {
  const ConvGeometry g = check_geometry(input, filters, stride, padding);
  Tensor<T> out({g.n, g.k, g.out_h, g.out_w});
  const std::size_t st = std::size_t(stride);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t k = 0; k < g.k; ++k) {
      T* plane = &out.at(n, k, 0, 0);
      for (std::size_t ch = 0; ch < g.c; ++ch) {
        const T* in_plane = &input.at(n, ch, 0, 0);
        for (std::size_t i = 0; i < g.s1; ++i) {
          const Span rows = valid_outputs(i, padding, stride, g.h, g.out_h);
          for (std::size_t j = 0; j < g.s2; ++j) {
            const Span cols = valid_outputs(j, padding, stride, g.w, g.out_w);
            const T w = filters.at(k, i, j, ch);
            if (cols.lo == cols.hi) continue;
            const std::size_t first_col = cols.lo * st + j - std::size_t(padding);
            for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
              const T* in_ptr = in_plane + (oh * st + i - std::size_t(padding)) * g.w + first_col;
              T* out_row = plane + oh * g.out_w;
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow, in_ptr += st) out_row[ow] += w * *in_ptr;
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& filters,
                               const Tensor<T>& out_grad, int stride, int padding) {
  const ConvGeometry g = check_geometry(input, filters, stride, padding);
  require_shape(out_grad, {g.n, g.k, g.out_h, g.out_w}, "conv output gradient");
  Conv2dGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(filters.shape())};
  const std::size_t st = std::size_t(stride);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t k = 0; k < g.k; ++k) {
      const T* gplane = &out_grad.at(n, k, 0, 0);
      for (std::size_t ch = 0; ch < g.c; ++ch) {
        const T* in_plane = &input.at(n, ch, 0, 0);
        T* ig_plane = &grads.input_grad.at(n, ch, 0, 0);
        for (std::size_t i = 0; i < g.s1; ++i) {
          const Span rows = valid_outputs(i, padding, stride, g.h, g.out_h);
          for (std::size_t j = 0; j < g.s2; ++j) {
            const Span cols = valid_outputs(j, padding, stride, g.w, g.out_w);
            const T w = filters.at(k, i, j, ch);
            if (cols.lo == cols.hi) continue;
            const std::size_t first_col = cols.lo * st + j - std::size_t(padding);
            T acc = 0;
            for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
              const std::size_t base = (oh * st + i - std::size_t(padding)) * g.w + first_col;
              const T* in_ptr = in_plane + base;
              T* ig_ptr = ig_plane + base;
              const T* g_row = gplane + oh * g.out_w;
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow, in_ptr += st, ig_ptr += st) {
                acc += g_row[ow] * *in_ptr;
                *ig_ptr += w * g_row[ow];
              }
            }
            grads.filter_grads.at(k, i, j, ch) += acc;
          }
        }
      }
    }
  }
  return grads;
}

template <typename T>
std::size_t ConvLayerParams<T>::out_channels() const {
  return filter_mapped() ? std::size_t(map().spec.grid.count()) : baseline_filters().dim(0);
}

template <typename T>
FilterShape ConvLayerParams<T>::filter_shape() const {
  if (filter_mapped()) return map().spec.shape;
  const auto& f = baseline_filters();
  return {int(f.dim(1)), int(f.dim(2)), int(f.dim(3))};
}

template <typename T>
std::size_t ConvLayerParams<T>::param_count() const {
  return filter_mapped() ? map().data.size() : baseline_filters().size();
}

namespace {

template <typename T>
const FilterMap<T>& require_filter_map(const ConvLayerParams<T>& params, const Tensor<T>& input) {
  if (!params.filter_mapped()) {
    throw Error(Errc::ShapeMismatch, "fmconv requires filter-mapped weights");
  }
  const auto& map = params.map();
  require_rank(input, 4, "fmconv input");
  if (std::size_t(map.spec.shape.c) != input.dim(1)) {
    throw Error(Errc::ShapeMismatch, "filter map channel count " + std::to_string(map.spec.shape.c) +
                                         " != input channels " + std::to_string(input.dim(1)));
  }
  return map;
}

}  // namespace

template <typename T>
Tensor<T> fmconv_forward(const Tensor<T>& input, const ConvLayerParams<T>& params) {
  const FilterBank<T> bank = extract_filters(require_filter_map(params, input));
  return conv2d_forward(input, bank.filters, params.conv_stride, params.padding);
}

template <typename T>
FmConvGrads<T> fmconv_backward(const Tensor<T>& input, const ConvLayerParams<T>& params,
                               const Tensor<T>& out_grad, GradMode mode) {
  const FilterMap<T>& map = require_filter_map(params, input);
  const FilterBank<T> bank = extract_filters(map);
  Conv2dGrads<T> g = conv2d_backward(input, bank.filters, out_grad, params.conv_stride, params.padding);
  return {std::move(g.input_grad), aggregate_gradients(g.filter_grads, map.spec, mode)};
}

#define FM3D_INSTANTIATE_CONV(T)                                                              \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, int, int);           \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,                \
                                          const Tensor<T>&, int, int);                       \
  template struct ConvLayerParams<T>;                                                        \
  template Tensor<T> fmconv_forward(const Tensor<T>&, const ConvLayerParams<T>&);            \
  template FmConvGrads<T> fmconv_backward(const Tensor<T>&, const ConvLayerParams<T>&,       \
                                          const Tensor<T>&, GradMode);

FM3D_INSTANTIATE_CONV(float)
FM3D_INSTANTIATE_CONV(double)

#undef FM3D_INSTANTIATE_CONV

}  // namespace fm3d
