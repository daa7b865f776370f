#pragma once

// Turns a list of baseline layers into a filter-map network plan: every 3x3
// convolution gets a filter map sized from the filter-count table, everything
// else keeps its baseline parametrization.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fm3d/filter_map.hpp"
#include "fm3d/rational.hpp"

namespace fm3d {

enum class LayerKind { Conv, Dense, Other };

std::string_view to_string(LayerKind kind) noexcept;

struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::Other;
  int filter_count = 0;  // K for conv, output units for dense
  int s1 = 1;
  int s2 = 1;
  int in_channels = 0;  // c for conv, input features for dense
  std::int64_t param_count_baseline = 0;
};

// Bias-free convolution: K*s1*s2*c parameters.
LayerDesc conv_layer_desc(std::string name, int filters, int s1, int s2, int in_channels);
// Fully connected with bias: units*in_features + units parameters.
LayerDesc dense_layer_desc(std::string name, int units, int in_features);
LayerDesc other_layer_desc(std::string name, std::int64_t params);

struct FilterMapped {
  FilterMapSpec spec;
};

struct KeptBaseline {
  std::string reason;
};

struct LayerPlan {
  LayerDesc layer;
  std::variant<FilterMapped, KeptBaseline> decision;
  std::int64_t param_count_planned = 0;
  Ratio ratio{1};

  bool filter_mapped() const noexcept { return std::holds_alternative<FilterMapped>(decision); }
  const FilterMapSpec& spec() const { return std::get<FilterMapped>(decision).spec; }
};

struct NetPlan {
  std::vector<LayerPlan> layers;
  std::int64_t total_baseline = 0;
  std::int64_t total_planned = 0;
  Ratio model_ratio{1};

  const LayerPlan* find(std::string_view name) const;
};

struct SpatialStrides {
  int x = 2;
  int y = 2;
};

struct LayerOverride {
  std::optional<FilterGrid> grid;
  std::optional<SpatialStrides> strides;
};

using PlanOverrides = std::map<std::string, LayerOverride, std::less<>>;

// Filter-count table: 12, 32, 64, 128, 256, 512. Other counts need an explicit
// grid whose product is K.
FilterGrid grid_for_filter_count(std::int64_t filters, std::optional<FilterGrid> override = std::nullopt);

LayerPlan plan_layer(const LayerDesc& layer, SpatialStrides strides = {},
                     std::optional<FilterGrid> grid = std::nullopt);

NetPlan plan_network(const std::vector<LayerDesc>& layers, const PlanOverrides& overrides = {});

enum class ReportFormat { Text, Structured };

ReportFormat parse_report_format(std::string_view text);

// Text: aligned table plus a totals line. Structured: one JSON object per
// line, layers first, then a "total" record.
std::string render_plan_report(const NetPlan& plan, ReportFormat format);

}  // namespace fm3d
