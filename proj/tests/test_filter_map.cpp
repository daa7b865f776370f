#include "doctest.h"
#include "fm3d/filter_map.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fm3d;

namespace {

const FilterMapSpec kExample{{3, 3, 64}, {4, 4, 4}, {2, 2, 16}};

FilterMap<double> random_map(const FilterMapSpec& s, std::mt19937_64& rng) {
  return {s, oracle::random_tensor<double>(map_dims(s).shape(), rng)};
}

}  // namespace

TEST_CASE("validate_spec accepts and rejects") {
  CHECK_NOTHROW(validate_spec(kExample));
  CHECK_NOTHROW(validate_spec({{3, 3, 64}, {1, 1, 1}, {3, 3, 64}}));
  CHECK(thrown([] { validate_spec({{3, 3, 64}, {4, 4, 4}, {2, 2, 15}}); }) == Errc::ChannelConstraintViolated);
  CHECK(thrown([] { validate_spec({{3, 0, 64}, {4, 4, 4}, {2, 2, 16}}); }) == Errc::NonPositiveDimension);
  CHECK(thrown([] { validate_spec({{3, 3, 64}, {4, -1, 4}, {2, 2, 16}}); }) == Errc::NonPositiveDimension);
  CHECK(thrown([] { validate_spec({{3, 3, 8}, {4, 4, 2}, {4, 2, 4}}); }) == Errc::StrideExceedsFilter);
  CHECK(thrown([] { validate_spec({{3, 3, 8}, {4, 4, 2}, {2, 4, 4}}); }) == Errc::StrideExceedsFilter);
}

TEST_CASE("map dims") {
  CHECK(map_dims(kExample) == MapDims{8, 8, 64});
  CHECK(map_dims({{3, 3, 64}, {1, 1, 1}, {3, 3, 64}}) == MapDims{3, 3, 64});
  const int c = 512;
  CHECK(map_dims({{3, 3, c}, {8, 8, 8}, {2, 2, c / 8}}) == MapDims{16, 16, c});
}

TEST_CASE("filter_origin is row-major with k3 fastest") {
  const FilterGrid g{4, 4, 4};
  CHECK(filter_origin(0, g) == GridPosition{0, 0, 0});
  CHECK(filter_origin(63, g) == GridPosition{3, 3, 3});
  CHECK(filter_origin(21, g) == GridPosition{1, 1, 1});
  CHECK(filter_origin(1, g) == GridPosition{0, 0, 1});
  CHECK(filter_origin(4, g) == GridPosition{0, 1, 0});
  CHECK(thrown([&] { filter_origin(64, g); }) == Errc::IndexOutOfRange);
  CHECK(thrown([&] { filter_origin(-1, g); }) == Errc::IndexOutOfRange);
}

TEST_CASE("index_map wraps cyclically") {
  CHECK(index_map(48, {2, 0, 0}, kExample).a == 0);   // k1_idx 3
  CHECK(index_map(3, {0, 0, 20}, kExample).d == 4);   // k3_idx 3
  CHECK(index_map(21, {1, 2, 5}, kExample) == MapIndex{3, 4, 21});
  CHECK(thrown([] { index_map(0, {3, 0, 0}, kExample); }) == Errc::IndexOutOfRange);
}

TEST_CASE("index_map agrees with the oracle extraction") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const FilterMapSpec s = oracle::random_spec(rng);
    const auto map = random_map(s, rng);
    const auto bank = oracle::extract(map.data, s);
    for (std::int64_t k = 0; k < s.grid.count(); ++k)
      for (int i = 0; i < s.shape.s1; ++i)
        for (int j = 0; j < s.shape.s2; ++j)
          for (int ch = 0; ch < s.shape.c; ++ch) {
            const MapIndex m = index_map(k, {i, j, ch}, s);
            REQUIRE(map.data.at(m.a, m.b, m.d) == bank.at(k, i, j, ch));
          }
  }
}

TEST_CASE("param_ratio") {
  CHECK(param_ratio(kExample) == Ratio(9));
  CHECK(param_ratio({{3, 3, 64}, {8, 8, 8}, {2, 2, 8}}) == Ratio(18));
  CHECK(param_ratio({{3, 3, 64}, {4, 4, 2}, {2, 2, 32}}) == Ratio(9, 2));
  CHECK(to_string(param_ratio(kExample)) == "9/1");
}

TEST_CASE("coverage counts match brute force") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const FilterMapSpec s = oracle::random_spec(rng);
    CHECK(coverage_counts(s).counts == oracle::brute_counts(s));
  }
}

TEST_CASE("coverage counts of the 64-filter example") {
  CHECK(cyclic_coverage(8, 2, 3, 4) == std::vector<std::int64_t>{2, 1, 2, 1, 2, 1, 2, 1});
  const auto c = coverage_counts(kExample).counts;
  std::int64_t total = 0;
  for (auto v : c.data()) total += v;
  CHECK(total == 36864);
  for (int d : {0, 17, 63}) {
    CHECK(c.at(0, 0, d) == 16);
    CHECK(c.at(1, 1, d) == 4);
    CHECK(c.at(0, 1, d) == 8);
  }
}

TEST_CASE("extract_filters matches the oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const FilterMapSpec s = oracle::random_spec(rng);
    const auto map = random_map(s, rng);
    CHECK(extract_filters(map).filters == oracle::extract(map.data, s));
  }
}

TEST_CASE("extraction and sum aggregation are adjoint") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const FilterMapSpec s = oracle::random_spec(rng);
    const auto map = random_map(s, rng);
    const auto g = oracle::random_tensor<double>(bank_shape(s), rng);
    const auto bank = extract_filters(map).filters;
    const auto back = aggregate_gradients(g, s, GradMode::Sum);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < g.size(); ++i) lhs += bank[i] * g[i];
    for (std::size_t i = 0; i < back.size(); ++i) rhs += map.data[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(oracle::max_abs_diff(back, oracle::scatter_sum(g, s)) <= 1e-12);
  }
}

TEST_CASE("average aggregation divides the sum by the coverage count") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const FilterMapSpec s = oracle::random_spec(rng);
    const auto g = oracle::random_tensor<double>(bank_shape(s), rng);
    const auto sum = aggregate_gradients(g, s, GradMode::Sum);
    const auto avg = aggregate_gradients(g, s, GradMode::Average);
    const auto counts = oracle::brute_counts(s);
    for (std::size_t i = 0; i < sum.size(); ++i) CHECK(avg[i] == sum[i] / double(counts[i]));
    const auto ones = aggregate_gradients(Tensor<double>(bank_shape(s), 1.0), s);
    for (double v : ones.data()) CHECK(v == 1.0);
  }
}

TEST_CASE("cyclic shift of the map by one stride permutes the filters") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const FilterMapSpec s = oracle::random_spec(rng);
    const auto map = random_map(s, rng);
    const auto orig = extract_filters(map);
    const MapDims m = map_dims(s);
    for (int axis = 0; axis < 3; ++axis) {
      const int shift[3] = {axis == 0 ? s.strides.x : 0, axis == 1 ? s.strides.y : 0, axis == 2 ? s.strides.z : 0};
      FilterMap<double> rolled{s, Tensor<double>(m.shape())};
      for (int a = 0; a < m.m1; ++a)
        for (int b = 0; b < m.m2; ++b)
          for (int d = 0; d < m.mc; ++d)
            rolled.data.at(a, b, d) = map.data.at((a + shift[0]) % m.m1, (b + shift[1]) % m.m2, (d + shift[2]) % m.mc);
      const auto perm = extract_filters(rolled);
      for (std::int64_t k = 0; k < s.grid.count(); ++k) {
        GridPosition g = filter_origin(k, s.grid);
        if (axis == 0) g.k1_idx = (g.k1_idx + 1) % s.grid.k1;
        if (axis == 1) g.k2_idx = (g.k2_idx + 1) % s.grid.k2;
        if (axis == 2) g.k3_idx = (g.k3_idx + 1) % s.grid.k3;
        const std::size_t src = std::size_t((std::int64_t(g.k1_idx) * s.grid.k2 + g.k2_idx) * s.grid.k3 + g.k3_idx);
        const auto a = perm.filter(std::size_t(k));
        const auto b = orig.filter(src);
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
      }
    }
  }
}

TEST_CASE("grad mode names") {
  CHECK(parse_grad_mode("sum") == GradMode::Sum);
  CHECK(parse_grad_mode("average") == GradMode::Average);
  CHECK(thrown([] { parse_grad_mode("mean"); }) == Errc::BadValue);
}
