#pragma once

// Slow reference implementations that share no code with the library.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fm3d/filter_map.hpp"
#include "fm3d/tensor.hpp"

namespace oracle {

using fm3d::FilterMapSpec;
using fm3d::Shape;
using fm3d::Tensor;

inline int wrap(long v, long n) { return int(((v % n) + n) % n); }

// Random valid spec: s1, s2 in 1..4, k's in 1..4, z in 1..3, c = k3*z.
inline FilterMapSpec random_spec(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  FilterMapSpec s;
  s.grid = {pick(1, 4), pick(1, 4), pick(1, 4)};
  s.strides.z = pick(1, 3);
  s.shape = {pick(1, 4), pick(1, 4), s.grid.k3 * s.strides.z};
  s.strides.x = pick(1, s.shape.s1);
  s.strides.y = pick(1, s.shape.s2);
  return s;
}

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = T(u(rng));
  return t;
}

// Filter k cut from the map with explicit modular arithmetic; bank (K,s1,s2,c).
template <typename T>
Tensor<T> extract(const Tensor<T>& map, const FilterMapSpec& s) {
  const long m1 = long(s.grid.k1) * s.strides.x, m2 = long(s.grid.k2) * s.strides.y,
             mc = long(s.grid.k3) * s.strides.z;
  Tensor<T> bank({std::size_t(s.grid.count()), std::size_t(s.shape.s1), std::size_t(s.shape.s2),
                  std::size_t(s.shape.c)});
  long k = 0;
  for (int g1 = 0; g1 < s.grid.k1; ++g1)
    for (int g2 = 0; g2 < s.grid.k2; ++g2)
      for (int g3 = 0; g3 < s.grid.k3; ++g3, ++k)
        for (int i = 0; i < s.shape.s1; ++i)
          for (int j = 0; j < s.shape.s2; ++j)
            for (int ch = 0; ch < s.shape.c; ++ch)
              bank.at(k, i, j, ch) = map.at(wrap(long(g1) * s.strides.x + i, m1), wrap(long(g2) * s.strides.y + j, m2),
                                            wrap(long(g3) * s.strides.z + ch, mc));
  return bank;
}

// Adjoint of extract: sums every filter entry back onto its map element.
template <typename T>
Tensor<T> scatter_sum(const Tensor<T>& bank, const FilterMapSpec& s) {
  const long m1 = long(s.grid.k1) * s.strides.x, m2 = long(s.grid.k2) * s.strides.y,
             mc = long(s.grid.k3) * s.strides.z;
  Tensor<T> map({std::size_t(m1), std::size_t(m2), std::size_t(mc)});
  long k = 0;
  for (int g1 = 0; g1 < s.grid.k1; ++g1)
    for (int g2 = 0; g2 < s.grid.k2; ++g2)
      for (int g3 = 0; g3 < s.grid.k3; ++g3, ++k)
        for (int i = 0; i < s.shape.s1; ++i)
          for (int j = 0; j < s.shape.s2; ++j)
            for (int ch = 0; ch < s.shape.c; ++ch)
              map.at(wrap(long(g1) * s.strides.x + i, m1), wrap(long(g2) * s.strides.y + j, m2),
                     wrap(long(g3) * s.strides.z + ch, mc)) += bank.at(k, i, j, ch);
  return map;
}

inline Tensor<std::int64_t> brute_counts(const FilterMapSpec& s) {
  Tensor<std::int64_t> ones({std::size_t(s.grid.count()), std::size_t(s.shape.s1), std::size_t(s.shape.s2),
                             std::size_t(s.shape.c)},
                            1);
  return scatter_sum(ones, s);
}

// Seven nested loops; input (N,C,H,W), filters (K,s1,s2,C).
template <typename T>
Tensor<T> conv(const Tensor<T>& x, const Tensor<T>& f, int stride, int pad) {
  const long N = long(x.dim(0)), C = long(x.dim(1)), H = long(x.dim(2)), W = long(x.dim(3));
  const long K = long(f.dim(0)), S1 = long(f.dim(1)), S2 = long(f.dim(2));
  const long OH = (H + 2 * pad - S1) / stride + 1, OW = (W + 2 * pad - S2) / stride + 1;
  Tensor<T> y({std::size_t(N), std::size_t(K), std::size_t(OH), std::size_t(OW)});
  for (long n = 0; n < N; ++n)
    for (long k = 0; k < K; ++k)
      for (long oh = 0; oh < OH; ++oh)
        for (long ow = 0; ow < OW; ++ow) {
          T acc = 0;
          for (long c = 0; c < C; ++c)
            for (long i = 0; i < S1; ++i)
              for (long j = 0; j < S2; ++j) {
                const long h = oh * stride + i - pad, w = ow * stride + j - pad;
                if (h >= 0 && h < H && w >= 0 && w < W) acc += x.at(n, c, h, w) * f.at(k, i, j, c);
              }
          y.at(n, k, oh, ow) = acc;
        }
  return y;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

inline double rel_err(double numeric, double analytic, double floor = 1e-12) {
  return std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
}

// Central difference of f along coordinate i of t.
template <typename T, typename F>
double central_diff(Tensor<T>& t, std::size_t i, double h, F&& f) {
  const T saved = t[i];
  t[i] = T(double(saved) + h);
  const double up = f();
  t[i] = T(double(saved) - h);
  const double down = f();
  t[i] = saved;
  return (up - down) / (2 * h);
}

// Five-point stencil, truncation error O(h^4).
template <typename T, typename F>
double five_point_diff(Tensor<T>& t, std::size_t i, double h, F&& f) {
  const T saved = t[i];
  auto at = [&](double d) {
    t[i] = T(double(saved) + d);
    return f();
  };
  const double v = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  t[i] = saved;
  return v;
}

}  // namespace oracle
