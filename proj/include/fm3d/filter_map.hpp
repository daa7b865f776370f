#pragma once

// 3D filter maps: a single shared tensor per convolution layer from which K
// overlapping filters are cut out with cyclic indexing.
//
// Axis convention everywhere: (spatial1, spatial2, channel). A map that is
// often written "64 x 8 x 8" channel-first is (8, 8, 64) here.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fm3d/error.hpp"
#include "fm3d/rational.hpp"
#include "fm3d/tensor.hpp"

namespace fm3d {

struct FilterShape {
  int s1 = 0;  // spatial height
  int s2 = 0;  // spatial width
  int c = 0;   // channels

  std::size_t size() const noexcept { return std::size_t(s1) * std::size_t(s2) * std::size_t(c); }
  friend bool operator==(const FilterShape&, const FilterShape&) = default;
};

struct FilterGrid {
  int k1 = 0;
  int k2 = 0;
  int k3 = 0;

  std::int64_t count() const noexcept { return std::int64_t(k1) * k2 * k3; }
  friend bool operator==(const FilterGrid&, const FilterGrid&) = default;
};

// Step between consecutive filter origins inside the map. Unrelated to the
// stride a convolution uses over its input image.
struct ExtractionStrides {
  int x = 0;
  int y = 0;
  int z = 0;

  friend bool operator==(const ExtractionStrides&, const ExtractionStrides&) = default;
};

struct FilterMapSpec {
  FilterShape shape;
  FilterGrid grid;
  ExtractionStrides strides;

  friend bool operator==(const FilterMapSpec&, const FilterMapSpec&) = default;
};

struct MapDims {
  int m1 = 0;
  int m2 = 0;
  int mc = 0;

  std::size_t size() const noexcept { return std::size_t(m1) * std::size_t(m2) * std::size_t(mc); }
  Shape shape() const { return {std::size_t(m1), std::size_t(m2), std::size_t(mc)}; }
  friend bool operator==(const MapDims&, const MapDims&) = default;
};

struct GridPosition {
  int k1_idx = 0;
  int k2_idx = 0;
  int k3_idx = 0;
  friend bool operator==(const GridPosition&, const GridPosition&) = default;
};

// Coordinate inside one filter: (row, column, channel).
struct LocalIndex {
  int i = 0;
  int j = 0;
  int ch = 0;
};

struct MapIndex {
  int a = 0;
  int b = 0;
  int d = 0;
  friend bool operator==(const MapIndex&, const MapIndex&) = default;
};

enum class GradMode {
  Sum,      // exact chain-rule gradient of the shared map
  Average,  // scatter-sum divided by coverage count (default training rule)
};

std::string_view to_string(GradMode mode) noexcept;
GradMode parse_grad_mode(std::string_view text);

std::string to_string(const FilterMapSpec& spec);

// Throws Error with NonPositiveDimension, ChannelConstraintViolated
// (k3*z != c) or StrideExceedsFilter (x > s1, y > s2 or z > c).
void validate_spec(const FilterMapSpec& spec);

// (k1*x, k2*y, k3*z).
MapDims map_dims(const FilterMapSpec& spec);

// Row-major decomposition of filter index k, k3 fastest.
GridPosition filter_origin(std::int64_t k, const FilterGrid& grid);

// The mapping T: filter k, local coordinate t -> map coordinate, cyclic in all
// three dimensions.
MapIndex index_map(std::int64_t k, LocalIndex t, const FilterMapSpec& spec);

// Number of (grid position, local offset) pairs landing on each index of one
// cyclic dimension of `length` when `count` windows of `extent` are placed
// every `stride`.
std::vector<std::int64_t> cyclic_coverage(int length, int stride, int extent, int count);

struct CoverageCount {
  FilterMapSpec spec;
  Tensor<std::int64_t> counts;  // map-shaped
};

// Averaging denominator per map element, from the separable per-dimension form.
CoverageCount coverage_counts(const FilterMapSpec& spec);

// Elements of all K filters over elements of the map, exact.
Ratio param_ratio(const FilterMapSpec& spec);

template <typename T>
struct FilterMap {
  FilterMapSpec spec;
  Tensor<T> data;  // (m1, m2, mc)

  static FilterMap zeros(const FilterMapSpec& spec) {
    validate_spec(spec);
    return FilterMap{spec, Tensor<T>(map_dims(spec).shape())};
  }
};

template <typename T>
struct FilterBank {
  FilterMapSpec spec;
  Tensor<T> filters;  // (K, s1, s2, c)

  std::size_t count() const noexcept { return filters.empty() ? 0 : filters.dim(0); }
  std::span<const T> filter(std::size_t k) const {
    const std::size_t n = spec.shape.size();
    return filters.data().subspan(k * n, n);
  }
};

inline Shape bank_shape(const FilterMapSpec& spec) {
  return {std::size_t(spec.grid.count()), std::size_t(spec.shape.s1), std::size_t(spec.shape.s2),
          std::size_t(spec.shape.c)};
}

namespace detail {

// For every grid position p along one dimension and every local offset o,
// the cyclic map coordinate (p*stride + o) mod length.
inline std::vector<int> cyclic_table(int count, int stride, int extent, int length) {
  std::vector<int> table(std::size_t(count) * std::size_t(extent));
  for (int p = 0; p < count; ++p) {
    for (int o = 0; o < extent; ++o) {
      table[std::size_t(p) * extent + o] = (p * stride + o) % length;
    }
  }
  return table;
}

struct IndexTables {
  std::vector<int> dim1, dim2, chan;
};

inline IndexTables index_tables(const FilterMapSpec& spec) {
  const MapDims m = map_dims(spec);
  return {cyclic_table(spec.grid.k1, spec.strides.x, spec.shape.s1, m.m1),
          cyclic_table(spec.grid.k2, spec.strides.y, spec.shape.s2, m.m2),
          cyclic_table(spec.grid.k3, spec.strides.z, spec.shape.c, m.mc)};
}

// Visits every (k, t) in ascending k then lexicographic t, passing the flat
// bank offset and the flat map offset.
template <typename Visit>
void for_each_mapping(const FilterMapSpec& spec, Visit&& visit) {
  const IndexTables tab = index_tables(spec);
  const MapDims m = map_dims(spec);
  const auto [s1, s2, c] = spec.shape;
  const auto [k1, k2, k3] = spec.grid;
  std::size_t bank_off = 0;
  for (int p1 = 0; p1 < k1; ++p1) {
    for (int p2 = 0; p2 < k2; ++p2) {
      for (int p3 = 0; p3 < k3; ++p3) {
        const int* rows = &tab.dim1[std::size_t(p1) * s1];
        const int* cols = &tab.dim2[std::size_t(p2) * s2];
        const int* chans = &tab.chan[std::size_t(p3) * c];
        for (int i = 0; i < s1; ++i) {
          for (int j = 0; j < s2; ++j) {
            const std::size_t row_base = (std::size_t(rows[i]) * m.m2 + cols[j]) * m.mc;
            for (int ch = 0; ch < c; ++ch) visit(bank_off++, row_base + chans[ch]);
          }
        }
      }
    }
  }
}

}  // namespace detail

// Materializes all K filters: bank[k][t] = map[T(k, t)].
template <typename T>
FilterBank<T> extract_filters(const FilterMap<T>& map) {
  validate_spec(map.spec);
  require_shape(map.data, map_dims(map.spec).shape(), "filter map");
  FilterBank<T> bank{map.spec, Tensor<T>(bank_shape(map.spec))};
  T* out = bank.filters.raw();
  const T* in = map.data.raw();
  detail::for_each_mapping(map.spec, [&](std::size_t b, std::size_t m) { out[b] = in[m]; });
  return bank;
}

// Scatter-sums a gradient bank (K, s1, s2, c) back onto the map through T.
// Average mode then divides each element by its coverage count. Accumulation
// order is fixed: ascending k, then lexicographic t.
template <typename T>
Tensor<T> aggregate_gradients(const Tensor<T>& grads, const FilterMapSpec& spec,
                              GradMode mode = GradMode::Average) {
  validate_spec(spec);
  require_shape(grads, bank_shape(spec), "gradient bank");
  Tensor<T> out(map_dims(spec).shape());
  T* acc = out.raw();
  const T* g = grads.raw();
  detail::for_each_mapping(spec, [&](std::size_t b, std::size_t m) { acc[m] += g[b]; });
  if (mode == GradMode::Average) {
    const CoverageCount cov = coverage_counts(spec);
    for (std::size_t j = 0; j < out.size(); ++j) acc[j] /= static_cast<T>(cov.counts[j]);
  }
  return out;
}

}  // namespace fm3d
