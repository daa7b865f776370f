#pragma once

// Network description files.
//
//   # comment
//   input = 2x12x12            # channels x height x width (optional)
//
//   [conv1]                    # one section per layer, in order
//   kind = conv                # conv | dense | relu | maxpool | avgpool | residual | other
//   filters = 12
//   kernel = 3                 # or 3x3
//   padding = 1
//   stride = 1
//   grid = 2x3x2               # optional filter-map grid override
//   fm_strides = 2x2           # optional spatial extraction strides
//
// Without an `input` line the file is a plan-only inventory: conv and
// residual layers must give `in_channels`, dense layers `in_features`, and
// `other` layers a raw `params` count.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fm3d/model.hpp"
#include "fm3d/planner.hpp"
#include "fm3d/rng.hpp"

namespace fm3d {

enum class NetLayerKind { Conv, Dense, Relu, MaxPool, AvgPool, Residual, Other };

struct NetLayer {
  std::string name;
  NetLayerKind kind = NetLayerKind::Other;
  int line = 0;
  int filters = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int padding = 0;
  std::optional<int> in_channels;
  int units = 0;
  std::optional<int> in_features;
  std::int64_t params = 0;
  LayerOverride fm;
};

struct InputShape {
  int c = 0;
  int h = 0;
  int w = 0;
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

struct NetDescription {
  std::string source;
  std::string text;  // verbatim, embedded into checkpoints
  std::optional<InputShape> input;
  std::vector<NetLayer> layers;

  bool trainable() const noexcept { return input.has_value(); }
};

NetDescription parse_net_description(std::string_view text, std::string source);

// `spec` is a file path (relative paths resolve against base_dir) or one of
// the built-in names: "builtin:toy".
NetDescription load_net_description(const std::string& spec, const std::filesystem::path& base_dir = {});

std::string_view builtin_net_text(std::string_view name);

// Parametrized layers in order, with residual blocks expanded to
// "<block>.conv1" and "<block>.conv2".
std::vector<LayerDesc> layer_descs(const NetDescription& net);
PlanOverrides plan_overrides(const NetDescription& net);
NetPlan plan_description(const NetDescription& net);

// Number of classes the final layer produces; requires an input shape.
int output_classes(const NetDescription& net);

enum class Variant { FilterMap, Baseline };

std::string_view to_string(Variant v) noexcept;

// Filter-mapped variant: every layer the plan maps gets a filter map, the rest
// stay baseline. Baseline variant: every convolution is a plain filter bank.
// Filter maps and conv filters are drawn uniform in +-sqrt(6 / (s1*s2*c));
// dense weights in +-sqrt(6 / (in + out)); biases start at zero.
template <typename T>
Model<T> build_model(const NetDescription& net, const NetPlan& plan, Variant variant, GradMode mode, Rng& rng);

}  // namespace fm3d
