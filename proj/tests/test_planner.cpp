#include <algorithm>
#include <type_traits>

#include "doctest.h"
#include "fm3d/network.hpp"
#include "fm3d/planner.hpp"
#include "fm3d/records.hpp"
#include "test_util.hpp"

using namespace fm3d;

static_assert(!std::is_convertible_v<LayerPlan, LayerDesc>);
static_assert(!std::is_convertible_v<NetPlan, std::vector<LayerDesc>>);

TEST_CASE("grid table") {
  CHECK(grid_for_filter_count(12) == FilterGrid{2, 3, 2});
  CHECK(grid_for_filter_count(32) == FilterGrid{4, 4, 2});
  CHECK(grid_for_filter_count(64) == FilterGrid{4, 4, 4});
  CHECK(grid_for_filter_count(128) == FilterGrid{8, 4, 4});
  CHECK(grid_for_filter_count(256) == FilterGrid{8, 8, 4});
  CHECK(grid_for_filter_count(512) == FilterGrid{8, 8, 8});
  CHECK(thrown([] { grid_for_filter_count(96); }) == Errc::UnknownFilterCount);
  CHECK(grid_for_filter_count(96, FilterGrid{4, 4, 6}) == FilterGrid{4, 4, 6});
  CHECK(thrown([] { grid_for_filter_count(96, FilterGrid{4, 4, 4}); }) == Errc::BadOverride);
}

TEST_CASE("plan_layer decisions") {
  const LayerPlan p = plan_layer(conv_layer_desc("c", 64, 3, 3, 64));
  REQUIRE(p.filter_mapped());
  CHECK(p.ratio == Ratio(9));
  CHECK(p.param_count_planned == 4096);
  CHECK(p.spec() == FilterMapSpec{{3, 3, 64}, {4, 4, 4}, {2, 2, 16}});

  const LayerPlan one = plan_layer(conv_layer_desc("p", 256, 1, 1, 64));
  CHECK_FALSE(one.filter_mapped());
  CHECK(one.ratio == Ratio(1));
  CHECK(one.param_count_planned == 256 * 64);

  const LayerPlan big = plan_layer(conv_layer_desc("b", 512, 3, 3, 512));
  CHECK(big.spec().strides.z == 64);
  CHECK(big.param_count_planned == 131072);
  CHECK(big.layer.param_count_baseline == 2359296);
  CHECK(big.ratio == Ratio(18));

  CHECK_FALSE(plan_layer(conv_layer_desc("f", 64, 5, 5, 64)).filter_mapped());
  CHECK_FALSE(plan_layer(dense_layer_desc("d", 10, 20)).filter_mapped());
  CHECK(thrown([] { plan_layer(conv_layer_desc("x", 64, 3, 3, 6)); }) == Errc::ChannelNotDivisible);
}

TEST_CASE("ratio is (9/4)k3 for every table grid") {
  for (int k : {12, 32, 64, 128, 256, 512}) {
    const FilterGrid g = grid_for_filter_count(k);
    for (int c : {g.k3, 2 * g.k3, 64}) {
      if (c % g.k3) continue;
      CHECK(plan_layer(conv_layer_desc("c", k, 3, 3, c)).ratio == Ratio(9 * g.k3, 4));
    }
  }
}

TEST_CASE("plan_network totals and errors") {
  const std::vector<LayerDesc> layers{conv_layer_desc("conv", 64, 3, 3, 64), dense_layer_desc("fc", 36, 1023)};
  REQUIRE(layers[1].param_count_baseline == 36864);
  const NetPlan plan = plan_network(layers);
  CHECK(plan.model_ratio == Ratio(9, 5));
  CHECK(plan.total_baseline == 2 * 36864);
  CHECK(plan.total_planned == 4096 + 36864);

  std::vector<LayerDesc> reversed(layers.rbegin(), layers.rend());
  CHECK(plan_network(reversed).model_ratio == plan.model_ratio);

  CHECK(thrown([] { plan_network({}); }) == Errc::EmptyNetwork);
  const std::string msg = thrown_message([] { plan_network({conv_layer_desc("stem", 96, 3, 3, 3)}); });
  CHECK(msg.find("stem") != std::string::npos);
}

TEST_CASE("overrides") {
  PlanOverrides o;
  o["stem"].grid = FilterGrid{8, 8, 1};
  const NetPlan p = plan_network({conv_layer_desc("stem", 64, 3, 3, 3)}, o);
  CHECK(p.layers[0].spec().grid == FilterGrid{8, 8, 1});
  CHECK(p.layers[0].spec().strides.z == 3);
}

TEST_CASE("text report") {
  const NetPlan plan = plan_network({conv_layer_desc("conv", 64, 3, 3, 64), dense_layer_desc("fc", 10, 64)});
  const std::string text = render_plan_report(plan, ReportFormat::Text);
  CHECK(text.find("ratio 9/1") != std::string::npos);
  CHECK(text == render_plan_report(plan, ReportFormat::Text));

  const NetPlan kept = plan_network({dense_layer_desc("fc", 10, 64), other_layer_desc("bn", 128)});
  CHECK(render_plan_report(kept, ReportFormat::Text).find("model ratio 1/1") != std::string::npos);
}

TEST_CASE("structured report is one JSON record per line") {
  const NetPlan plan = plan_network({conv_layer_desc("conv", 64, 3, 3, 64), dense_layer_desc("fc", 10, 64)});
  const std::string s = render_plan_report(plan, ReportFormat::Structured);
  const auto records = read_records(s);
  REQUIRE(records.size() == 3);
  CHECK(records[0]["name"] == "conv");
  CHECK(records[0]["ratio"] == "9/1");
  CHECK(records[0]["planned"] == 4096);
  CHECK(records[1]["decision"] != records[0]["decision"]);
  CHECK(records[2]["record"] == "total");
  CHECK(records[2]["planned"] == plan.total_planned);
}

TEST_CASE("network descriptions") {
  const NetDescription toy = load_net_description("builtin:toy");
  CHECK(toy.trainable());
  CHECK(output_classes(toy) == 3);
  const NetPlan plan = plan_description(toy);
  CHECK(plan.total_planned == 1011);
  CHECK(plan.total_baseline == 7323);
  CHECK(plan.find("conv1")->spec().grid == FilterGrid{2, 3, 2});

  const char* inventory = R"(
[stem]
kind = conv
filters = 64
kernel = 3
in_channels = 3
grid = 8x8x1
[block]
kind = residual
filters = 64
in_channels = 64
[fc]
kind = dense
units = 10
in_features = 64
)";
  const NetDescription inv = parse_net_description(inventory, "inv");
  CHECK_FALSE(inv.trainable());
  const NetPlan ip = plan_description(inv);
  CHECK(ip.layers.size() == 4);
  CHECK(ip.find("block.conv2")->ratio == Ratio(9));

  const auto err = [](const char* text) {
    return thrown([&] { plan_description(parse_net_description(text, "bad")); });
  };
  CHECK(err("[c]\nkind = conv\nfilters = 64\nkernel = 3\n") == Errc::MissingKey);
  CHECK(err("[c]\nkind = pool\n") == Errc::BadValue);
  CHECK(err("[c]\nkind = conv\nfilters = 64\nkernel = 3\nin_channels = 64\ncolour = red\n") == Errc::UnknownKey);
}
