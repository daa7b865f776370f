#include <set>

#include "doctest.h"
#include "fm3d/config.hpp"
#include "fm3d/dataset.hpp"
#include "fm3d/ini.hpp"
#include "test_util.hpp"

using namespace fm3d;

namespace {

int config_error_line(const char* text) {
  try {
    parse_config_text(text, "run.cfg");
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

std::vector<std::uint8_t> idx_images(std::uint32_t n, std::uint32_t h, std::uint32_t w,
                                     std::vector<std::uint8_t> pixels) {
  std::vector<std::uint8_t> out;
  for (auto v : {0x803u, n, h, w}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(std::vector<std::uint8_t> labels) {
  std::vector<std::uint8_t> out = be32(0x801);
  const auto n = be32(std::uint32_t(labels.size()));
  out.insert(out.end(), n.begin(), n.end());
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const RunConfig c = parse_config_text("[run]\nseed = 1\n", "run.cfg");
  CHECK(c.seed == 1);
  CHECK(c.momentum == 0.9);
  CHECK(c.grad_mode == GradMode::Average);
  CHECK(c.precision == Precision::Double);
  CHECK(c.net_description == "builtin:toy");
  CHECK(c.data.source == DataSource::Synthetic);
}

TEST_CASE("full config") {
  const RunConfig c = parse_config_text(R"(# comment
[run]
seed = 7
epochs = 3
batch_size = 8
learning_rate = 0.01
momentum = 0
grad_mode = sum
precision = single

[data]
source = synthetic
n = 30
classes = 5

[net]
variant = both
)",
                                        "run.cfg");
  CHECK(c.epochs == 3);
  CHECK(c.batch_size == 8);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.momentum == 0.0);
  CHECK(c.grad_mode == GradMode::Sum);
  CHECK(c.precision == Precision::Single);
  CHECK(c.data.classes == 5);
  CHECK(c.variant == VariantSelection::Both);
}

TEST_CASE("config errors") {
  CHECK(thrown([] { parse_config_text("[run]\nseed = 1\nmomentum = 1.5\n", "run.cfg"); }) == Errc::BadValue);
  CHECK(config_error_line("[run]\nseed = 1\nmomentum = 1.5\n") == 3);
  CHECK(thrown([] { parse_config_text("[run]\nseed = 1\nseed = 2\n", "run.cfg"); }) == Errc::DuplicateKey);
  CHECK(config_error_line("[run]\nseed = 1\n\nseed = 2\n") == 4);
  CHECK(thrown([] { parse_config_text("[run]\nepochs = 2\n", "run.cfg"); }) == Errc::MissingKey);
  CHECK(thrown([] { parse_config_text("[data]\nn = 5\n", "run.cfg"); }) == Errc::MissingKey);
  CHECK(thrown([] { parse_config_text("[run]\nseed = 1\nspeed = 2\n", "run.cfg"); }) == Errc::UnknownKey);
  CHECK(thrown([] { parse_config_text("[run]\nseed = 1\n[extra]\n", "run.cfg"); }) == Errc::UnknownKey);
  CHECK(thrown([] { parse_config_text("[run]\nseed = x\n", "run.cfg"); }) == Errc::BadValue);
  CHECK(thrown([] { parse_config_text("[run]\nseed = 1\ngrad_mode = mean\n", "run.cfg"); }) == Errc::BadValue);
  CHECK(thrown([] { parse_config_text("[run]\nseed = 1\n[data]\nsource = idx\n", "run.cfg"); }) ==
        Errc::MissingKey);
  CHECK(thrown_message([] { parse_config_text("[run]\nseed = 1\nmomentum = 2\n", "run.cfg"); })
            .find("run.cfg:3") != std::string::npos);
}

TEST_CASE("ini parsing") {
  const IniDocument d = parse_ini("top = 1\n[a]\nx = 1 # trailing\n  y=two words \n[b]\n", "t");
  REQUIRE(d.sections.size() == 3);
  CHECK(d.preamble().entries.front().key == "top");
  CHECK(d.sections[1].entries[0].value == "1");
  CHECK(d.sections[1].entries[1].value == "two words");
  CHECK(d.sections[1].entries[1].line == 4);
  CHECK(thrown([] { parse_ini("[a]\n[a]\n", "t"); }) == Errc::DuplicateKey);
  CHECK(thrown([] { parse_ini("[a]\nnovalue\n", "t"); }) == Errc::BadValue);
  CHECK(parse_dims("4x4x2") == std::vector<std::int64_t>{4, 4, 2});
}

TEST_CASE("idx loading") {
  const auto imgs = idx_images(1, 2, 2, {0, 85, 170, 255});
  const Dataset d = parse_idx(imgs, idx_labels({2}));
  CHECK(d.images.shape() == Shape{1, 1, 2, 2});
  CHECK(d.images.values() == std::vector<double>{0.0, 85.0 / 255, 170.0 / 255, 1.0});
  CHECK(d.images[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(d.labels == std::vector<int>{2});

  auto bad = imgs;
  bad[3] = 0x01;
  CHECK(thrown([&] { parse_idx(bad, idx_labels({2})); }) == Errc::BadMagic);
  CHECK(thrown([&] { parse_idx(imgs, imgs); }) == Errc::BadMagic);
  const auto ten = idx_images(10, 1, 1, std::vector<std::uint8_t>(10, 7));
  CHECK(thrown([&] { parse_idx(ten, idx_labels(std::vector<std::uint8_t>(9, 0))); }) == Errc::CountMismatch);
  const auto short_imgs = idx_images(2, 2, 2, {1, 2, 3});
  CHECK(thrown([&] { parse_idx(short_imgs, idx_labels({0, 1})); }) == Errc::TruncatedFile);
}

TEST_CASE("csv loading") {
  const Dataset d = parse_csv("label,p0,p1,p2,p3\n1,0,255,0,255\n0,51,51,51,51\n", 1, 2, 2);
  CHECK(d.size() == 2);
  CHECK(d.labels == std::vector<int>{1, 0});
  CHECK(d.images[1] == 1.0);
  CHECK(d.images[4] == 0.2);
  CHECK(thrown([] { parse_csv("h\n1,0,255,0\n", 1, 2, 2); }) == Errc::CountMismatch);
  CHECK(thrown([] { parse_csv("h\n1,0,x,0,1\n", 1, 2, 2); }) == Errc::BadValue);
}

TEST_CASE("synthetic data") {
  const Dataset a = synth_dataset(7, 50, 3, 12, 12, 2);
  const Dataset b = synth_dataset(7, 50, 3, 12, 12, 2);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(synth_dataset(2, 50, 3, 12, 12, 2).images == a.images);
  CHECK(a.sample_shape() == Shape{2, 12, 12});
  for (double v : a.images.data()) CHECK((v >= 0.0 && v <= 1.0));

  const Dataset k = synth_dataset(3, 4, 4, 8, 8, 1);
  CHECK(k.labels == std::vector<int>{0, 1, 2, 3});
  CHECK(thrown([] { synth_dataset(1, 10, 3, 0, 8, 1); }) == Errc::BadDims);
}

TEST_CASE("gather keeps order") {
  const Dataset a = synth_dataset(1, 6, 3, 4, 4, 1);
  const std::vector<std::size_t> idx{4, 0};
  const Dataset g = a.gather(idx);
  CHECK(g.labels == std::vector<int>{1, 0});
  CHECK(std::equal(g.images.data().begin(), g.images.data().begin() + 16, a.images.data().begin() + 64));
}
