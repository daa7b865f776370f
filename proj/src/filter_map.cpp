#include "fm3d/filter_map.hpp"

#include <sstream>

namespace fm3d {

std::string_view to_string(GradMode mode) noexcept {
  return mode == GradMode::Sum ? "sum" : "average";
}

GradMode parse_grad_mode(std::string_view text) {
  if (text == "sum") return GradMode::Sum;
  if (text == "average") return GradMode::Average;
  throw Error(Errc::BadValue, "grad mode must be 'sum' or 'average', got '" + std::string(text) + "'");
}

std::string to_string(const FilterMapSpec& spec) {
  std::ostringstream os;
  os << "filter " << spec.shape.s1 << "x" << spec.shape.s2 << "x" << spec.shape.c << ", grid "
     << spec.grid.k1 << "x" << spec.grid.k2 << "x" << spec.grid.k3 << ", strides " << spec.strides.x
     << "x" << spec.strides.y << "x" << spec.strides.z;
  return os.str();
}

void validate_spec(const FilterMapSpec& spec) {
  const auto& [s1, s2, c] = spec.shape;
  const auto& [k1, k2, k3] = spec.grid;
  const auto& [x, y, z] = spec.strides;
  if (s1 < 1 || s2 < 1 || c < 1 || k1 < 1 || k2 < 1 || k3 < 1 || x < 1 || y < 1 || z < 1) {
    throw Error(Errc::NonPositiveDimension, "all sizes must be >= 1 (" + to_string(spec) + ")");
  }
  if (std::int64_t(k3) * z != c) {
    throw Error(Errc::ChannelConstraintViolated,
                "k3*z = " + std::to_string(std::int64_t(k3) * z) + " must equal c = " +
                    std::to_string(c) + " (" + to_string(spec) + ")");
  }
  if (x > s1 || y > s2 || z > c) {
    throw Error(Errc::StrideExceedsFilter,
                "extraction strides must not exceed the filter extent (" + to_string(spec) + ")");
  }
}

MapDims map_dims(const FilterMapSpec& spec) {
  return {spec.grid.k1 * spec.strides.x, spec.grid.k2 * spec.strides.y,
          spec.grid.k3 * spec.strides.z};
}

GridPosition filter_origin(std::int64_t k, const FilterGrid& grid) {
  if (k < 0 || k >= grid.count()) {
    throw Error(Errc::IndexOutOfRange,
                "filter index " + std::to_string(k) + " outside [0, " + std::to_string(grid.count()) + ")");
  }
  const std::int64_t plane = std::int64_t(grid.k2) * grid.k3;
  return {int(k / plane), int((k % plane) / grid.k3), int(k % grid.k3)};
}

MapIndex index_map(std::int64_t k, LocalIndex t, const FilterMapSpec& spec) {
  const GridPosition p = filter_origin(k, spec.grid);
  if (t.i < 0 || t.i >= spec.shape.s1 || t.j < 0 || t.j >= spec.shape.s2 || t.ch < 0 ||
      t.ch >= spec.shape.c) {
    throw Error(Errc::IndexOutOfRange, "local index (" + std::to_string(t.i) + "," +
                                           std::to_string(t.j) + "," + std::to_string(t.ch) +
                                           ") outside filter " + to_string(spec));
  }
  const MapDims m = map_dims(spec);
  return {(p.k1_idx * spec.strides.x + t.i) % m.m1, (p.k2_idx * spec.strides.y + t.j) % m.m2,
          (p.k3_idx * spec.strides.z + t.ch) % m.mc};
}

std::vector<std::int64_t> cyclic_coverage(int length, int stride, int extent, int count) {
  std::vector<std::int64_t> cov(std::size_t(length), 0);
  for (int p = 0; p < count; ++p) {
    for (int o = 0; o < extent; ++o) ++cov[std::size_t((p * stride + o) % length)];
  }
  return cov;
}

CoverageCount coverage_counts(const FilterMapSpec& spec) {
  validate_spec(spec);
  const MapDims m = map_dims(spec);
  const auto c1 = cyclic_coverage(m.m1, spec.strides.x, spec.shape.s1, spec.grid.k1);
  const auto c2 = cyclic_coverage(m.m2, spec.strides.y, spec.shape.s2, spec.grid.k2);
  const auto cc = cyclic_coverage(m.mc, spec.strides.z, spec.shape.c, spec.grid.k3);
  CoverageCount out{spec, Tensor<std::int64_t>(m.shape())};
  for (int a = 0; a < m.m1; ++a) {
    for (int b = 0; b < m.m2; ++b) {
      for (int d = 0; d < m.mc; ++d) out.counts.at(a, b, d) = c1[a] * c2[b] * cc[d];
    }
  }
  return out;
}

Ratio param_ratio(const FilterMapSpec& spec) {
  validate_spec(spec);
  const std::int64_t filters = spec.grid.count() * std::int64_t(spec.shape.size());
  return Ratio(filters, std::int64_t(map_dims(spec).size()));
}

}  // namespace fm3d
