#include "fm3d/planner.hpp"

#include <array>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace fm3d {
namespace {

struct TableRow {
  std::int64_t filters;
  FilterGrid grid;
};

constexpr std::array<TableRow, 6> kFilterTable{{
    {12, {2, 3, 2}},
    {32, {4, 4, 2}},
    {64, {4, 4, 4}},
    {128, {8, 4, 4}},
    {256, {8, 8, 4}},
    {512, {8, 8, 8}},
}};

std::string grid_string(const FilterGrid& g) {
  return std::to_string(g.k1) + "x" + std::to_string(g.k2) + "x" + std::to_string(g.k3);
}

std::string decision_string(const LayerPlan& p) {
  if (!p.filter_mapped()) return "kept (" + std::get<KeptBaseline>(p.decision).reason + ")";
  const auto& s = p.spec();
  const MapDims m = map_dims(s);
  return "filtermap grid " + grid_string(s.grid) + " strides " + std::to_string(s.strides.x) + "x" +
         std::to_string(s.strides.y) + "x" + std::to_string(s.strides.z) + " map " +
         std::to_string(m.m1) + "x" + std::to_string(m.m2) + "x" + std::to_string(m.mc);
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::Other: return "other";
  }
  return "other";
}

LayerDesc conv_layer_desc(std::string name, int filters, int s1, int s2, int in_channels) {
  if (filters < 1 || s1 < 1 || s2 < 1 || in_channels < 1) {
    throw Error(Errc::NonPositiveDimension, "conv layer '" + name + "' needs positive sizes");
  }
  return {std::move(name), LayerKind::Conv, filters, s1, s2, in_channels,
          std::int64_t(filters) * s1 * s2 * in_channels};
}

LayerDesc dense_layer_desc(std::string name, int units, int in_features) {
  if (units < 1 || in_features < 1) {
    throw Error(Errc::NonPositiveDimension, "dense layer '" + name + "' needs positive sizes");
  }
  return {std::move(name), LayerKind::Dense, units, 1, 1, in_features,
          std::int64_t(units) * in_features + units};
}

LayerDesc other_layer_desc(std::string name, std::int64_t params) {
  if (params < 0) throw Error(Errc::BadValue, "layer '" + name + "' has negative parameter count");
  return {std::move(name), LayerKind::Other, 0, 1, 1, 0, params};
}

const LayerPlan* NetPlan::find(std::string_view name) const {
  for (const auto& p : layers) {
    if (p.layer.name == name) return &p;
  }
  return nullptr;
}

FilterGrid grid_for_filter_count(std::int64_t filters, std::optional<FilterGrid> override) {
  if (override) {
    if (override->k1 < 1 || override->k2 < 1 || override->k3 < 1 || override->count() != filters) {
      throw Error(Errc::BadOverride, "grid " + grid_string(*override) + " does not factor " +
                                         std::to_string(filters) + " filters");
    }
    return *override;
  }
  for (const auto& row : kFilterTable) {
    if (row.filters == filters) return row.grid;
  }
  throw Error(Errc::UnknownFilterCount,
              std::to_string(filters) + " filters is not in the grid table; supply an explicit grid");
}

LayerPlan plan_layer(const LayerDesc& layer, SpatialStrides strides, std::optional<FilterGrid> grid) {
  if (layer.kind == LayerKind::Conv && layer.param_count_baseline !=
                                           std::int64_t(layer.filter_count) * layer.s1 * layer.s2 * layer.in_channels) {
    throw Error(Errc::BadValue, "conv layer '" + layer.name + "' parameter count is not K*s1*s2*c");
  }
  auto keep = [&](std::string reason) {
    return LayerPlan{layer, KeptBaseline{std::move(reason)}, layer.param_count_baseline, Ratio(1)};
  };
  if (layer.kind == LayerKind::Dense) return keep("dense layer");
  if (layer.kind == LayerKind::Other) return keep("not a convolution");
  if (layer.s1 == 1 && layer.s2 == 1) return keep("1x1 excluded");
  if (layer.s1 != 3 || layer.s2 != 3) return keep("not 3x3");

  const FilterGrid g = grid_for_filter_count(layer.filter_count, grid);
  if (layer.in_channels % g.k3 != 0) {
    throw Error(Errc::ChannelNotDivisible, std::to_string(layer.in_channels) +
                                               " channels not divisible by k3 = " + std::to_string(g.k3));
  }
  const FilterMapSpec spec{{layer.s1, layer.s2, layer.in_channels}, g,
                           {strides.x, strides.y, layer.in_channels / g.k3}};
  validate_spec(spec);
  const auto planned = std::int64_t(map_dims(spec).size());
  return LayerPlan{layer, FilterMapped{spec}, planned, Ratio(layer.param_count_baseline, planned)};
}

NetPlan plan_network(const std::vector<LayerDesc>& layers, const PlanOverrides& overrides) {
  if (layers.empty()) throw Error(Errc::EmptyNetwork, "no layers to plan");
  NetPlan plan;
  for (const auto& layer : layers) {
    SpatialStrides strides;
    std::optional<FilterGrid> grid;
    if (auto it = overrides.find(layer.name); it != overrides.end()) {
      if (it->second.strides) strides = *it->second.strides;
      grid = it->second.grid;
    }
    try {
      plan.layers.push_back(plan_layer(layer, strides, grid));
    } catch (const Error& e) {
      throw Error(e.code(), "layer '" + layer.name + "': " + e.message());
    }
    plan.total_baseline += plan.layers.back().layer.param_count_baseline;
    plan.total_planned += plan.layers.back().param_count_planned;
  }
  if (plan.total_planned == 0) throw Error(Errc::EmptyNetwork, "network has no parameters");
  plan.model_ratio = Ratio(plan.total_baseline, plan.total_planned);
  return plan;
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "text") return ReportFormat::Text;
  if (text == "structured") return ReportFormat::Structured;
  throw Error(Errc::BadValue, "report format must be 'text' or 'structured', got '" + std::string(text) + "'");
}

std::string render_plan_report(const NetPlan& plan, ReportFormat format) {
  std::ostringstream os;
  if (format == ReportFormat::Structured) {
    for (const auto& p : plan.layers) {
      nlohmann::ordered_json rec;
      rec["record"] = "layer";
      rec["name"] = p.layer.name;
      rec["kind"] = to_string(p.layer.kind);
      rec["decision"] = p.filter_mapped() ? "filtermap" : "kept";
      if (p.filter_mapped()) {
        const auto& s = p.spec();
        const MapDims m = map_dims(s);
        rec["grid"] = {s.grid.k1, s.grid.k2, s.grid.k3};
        rec["strides"] = {s.strides.x, s.strides.y, s.strides.z};
        rec["map_dims"] = {m.m1, m.m2, m.mc};
      } else {
        rec["reason"] = std::get<KeptBaseline>(p.decision).reason;
      }
      rec["baseline"] = p.layer.param_count_baseline;
      rec["planned"] = p.param_count_planned;
      rec["ratio"] = to_string(p.ratio);
      os << rec.dump() << "\n";
    }
    nlohmann::ordered_json total;
    total["record"] = "total";
    total["baseline"] = plan.total_baseline;
    total["planned"] = plan.total_planned;
    total["ratio"] = to_string(plan.model_ratio);
    os << total.dump() << "\n";
    return os.str();
  }

  std::size_t name_w = 5, decision_w = 8;
  for (const auto& p : plan.layers) {
    name_w = std::max(name_w, p.layer.name.size());
    decision_w = std::max(decision_w, decision_string(p).size());
  }
  os << std::left << std::setw(int(name_w)) << "layer" << "  " << std::setw(int(decision_w)) << "decision"
     << std::right << "  " << std::setw(12) << "baseline" << "  " << std::setw(12) << "planned"
     << "  ratio\n";
  for (const auto& p : plan.layers) {
    os << std::left << std::setw(int(name_w)) << p.layer.name << "  " << std::setw(int(decision_w))
       << decision_string(p) << std::right << "  " << std::setw(12) << p.layer.param_count_baseline << "  "
       << std::setw(12) << p.param_count_planned << "  ratio " << to_string(p.ratio) << "\n";
  }
  os << "total: baseline " << plan.total_baseline << "  planned " << plan.total_planned << "  model ratio "
     << to_string(plan.model_ratio) << "\n";
  return os.str();
}

}  // namespace fm3d
