#include "fm3d/network.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "fm3d/ini.hpp"

namespace fm3d {
namespace {

constexpr std::string_view kToyNet = R"(# Toy network: two filter-mapped 3x3 convolutions with 12 and 64 filters.
input = 2x12x12

[conv1]
kind = conv
filters = 12
kernel = 3
padding = 1

[relu1]
kind = relu

[pool1]
kind = maxpool

[conv2]
kind = conv
filters = 64
kernel = 3
padding = 1

[relu2]
kind = relu

[pool2]
kind = avgpool

[fc]
kind = dense
units = 3
)";

NetLayerKind parse_kind(SectionReader& r) {
  const IniEntry e = r.require("kind");
  if (e.value == "conv") return NetLayerKind::Conv;
  if (e.value == "dense") return NetLayerKind::Dense;
  if (e.value == "relu") return NetLayerKind::Relu;
  if (e.value == "maxpool") return NetLayerKind::MaxPool;
  if (e.value == "avgpool") return NetLayerKind::AvgPool;
  if (e.value == "residual") return NetLayerKind::Residual;
  if (e.value == "other") return NetLayerKind::Other;
  r.fail(Errc::BadValue, e, "unknown layer kind '" + e.value + "'");
}

// Reads an integer key and range-checks it against its own line.
std::optional<int> read_int(SectionReader& r, std::string_view key, std::int64_t min) {
  auto e = r.take(key);
  if (!e) return std::nullopt;
  std::int64_t v = 0;
  try {
    v = parse_int(e->value);
  } catch (const Error& err) {
    r.fail(Errc::BadValue, *e, err.message());
  }
  if (v < min || v > (std::int64_t(1) << 30)) r.fail(Errc::BadValue, *e, "value out of range");
  return int(v);
}

std::vector<std::int64_t> read_dims(SectionReader& r, const IniEntry& e, std::size_t n_min, std::size_t n_max) {
  std::vector<std::int64_t> dims;
  try {
    dims = parse_dims(e.value);
  } catch (const Error& err) {
    r.fail(Errc::BadValue, e, err.message());
  }
  if (dims.size() < n_min || dims.size() > n_max) r.fail(Errc::BadValue, e, "wrong number of dimensions");
  for (auto d : dims) {
    if (d < 1 || d > (std::int64_t(1) << 30)) r.fail(Errc::BadValue, e, "dimensions must be >= 1");
  }
  return dims;
}

NetLayer parse_layer(const IniSection& section, const std::string& source) {
  SectionReader r(section, source);
  NetLayer layer;
  layer.name = section.name;
  layer.line = section.line;
  layer.kind = parse_kind(r);
  switch (layer.kind) {
    case NetLayerKind::Conv:
    case NetLayerKind::Residual: {
      if (layer.kind == NetLayerKind::Conv) {
        layer.filters = read_int(r, "filters", 1).value_or(0);
        if (!layer.filters) r.require("filters");
        const IniEntry k = r.require("kernel");
        const auto dims = read_dims(r, k, 1, 2);
        layer.kernel_h = int(dims[0]);
        layer.kernel_w = int(dims.size() == 2 ? dims[1] : dims[0]);
        layer.stride = read_int(r, "stride", 1).value_or(1);
        layer.padding = read_int(r, "padding", 0).value_or(0);
      } else {
        layer.filters = read_int(r, "filters", 1).value_or(0);
        layer.kernel_h = layer.kernel_w = 3;
        layer.stride = 1;
        layer.padding = 1;
      }
      layer.in_channels = read_int(r, "in_channels", 1);
      if (auto g = r.take("grid")) {
        const auto dims = read_dims(r, *g, 3, 3);
        layer.fm.grid = FilterGrid{int(dims[0]), int(dims[1]), int(dims[2])};
      }
      if (auto s = r.take("fm_strides")) {
        const auto dims = read_dims(r, *s, 2, 2);
        layer.fm.strides = SpatialStrides{int(dims[0]), int(dims[1])};
      }
      break;
    }
    case NetLayerKind::Dense:
      layer.units = read_int(r, "units", 1).value_or(0);
      if (!layer.units) r.require("units");
      layer.in_features = read_int(r, "in_features", 1);
      break;
    case NetLayerKind::Other: {
      const IniEntry e = r.require("params");
      try {
        layer.params = parse_int(e.value);
      } catch (const Error& err) {
        r.fail(Errc::BadValue, e, err.message());
      }
      if (layer.params < 0) r.fail(Errc::BadValue, e, "negative parameter count");
      break;
    }
    case NetLayerKind::Relu:
    case NetLayerKind::MaxPool:
    case NetLayerKind::AvgPool:
      break;
  }
  r.finish();
  return layer;
}

// Shape-propagating walk over the layers. Calls visit(layer, in_shape) with
// the inferred input shape (nullopt for plan-only descriptions).
template <typename Visit>
void walk(const NetDescription& net, Visit&& visit) {
  std::optional<InputShape> shape = net.input;
  auto fail = [&](const NetLayer& l, Errc code, const std::string& msg) -> void {
    throw ConfigError(code, net.source, l.line, "layer '" + l.name + "': " + msg);
  };
  for (const auto& l : net.layers) {
    visit(l, shape);
    if (!shape) continue;
    InputShape& s = *shape;
    switch (l.kind) {
      case NetLayerKind::Conv: {
        const int oh = (s.h + 2 * l.padding - l.kernel_h);
        const int ow = (s.w + 2 * l.padding - l.kernel_w);
        if (oh < 0 || ow < 0) fail(l, Errc::BadDims, "kernel larger than padded input");
        s = {l.filters, oh / l.stride + 1, ow / l.stride + 1};
        break;
      }
      case NetLayerKind::Residual:
        break;
      case NetLayerKind::MaxPool:
        if (s.h < 2 || s.w < 2) fail(l, Errc::BadDims, "maxpool needs spatial size >= 2");
        s = {s.c, s.h / 2, s.w / 2};
        break;
      case NetLayerKind::AvgPool:
        s = {s.c, 1, 1};
        break;
      case NetLayerKind::Dense:
        s = {l.units, 1, 1};
        break;
      case NetLayerKind::Relu:
        break;
      case NetLayerKind::Other:
        fail(l, Errc::BadValue, "kind 'other' is only allowed in plan-only descriptions");
    }
  }
}

int conv_in_channels(const NetDescription& net, const NetLayer& l, const std::optional<InputShape>& in) {
  if (in) {
    if (l.in_channels && *l.in_channels != in->c) {
      throw ConfigError(Errc::BadDims, net.source, l.line,
                        "layer '" + l.name + "': in_channels " + std::to_string(*l.in_channels) +
                            " but input has " + std::to_string(in->c));
    }
    return in->c;
  }
  if (!l.in_channels) {
    throw ConfigError(Errc::MissingKey, net.source, l.line,
                      "layer '" + l.name + "': in_channels required without an input shape");
  }
  return *l.in_channels;
}

int residual_channels(const NetDescription& net, const NetLayer& l, const std::optional<InputShape>& in) {
  const int c = conv_in_channels(net, l, in);
  if (l.filters && l.filters != c) {
    throw ConfigError(Errc::BadDims, net.source, l.line,
                      "layer '" + l.name + "': residual filters must equal input channels " + std::to_string(c));
  }
  return c;
}

int dense_in_features(const NetDescription& net, const NetLayer& l, const std::optional<InputShape>& in) {
  if (in) {
    const int f = in->c * in->h * in->w;
    if (l.in_features && *l.in_features != f) {
      throw ConfigError(Errc::BadDims, net.source, l.line,
                        "layer '" + l.name + "': in_features " + std::to_string(*l.in_features) +
                            " but input has " + std::to_string(f));
    }
    return f;
  }
  if (!l.in_features) {
    throw ConfigError(Errc::MissingKey, net.source, l.line,
                      "layer '" + l.name + "': in_features required without an input shape");
  }
  return *l.in_features;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (T& v : t.data()) v = static_cast<T>(uniform(rng, -bound, bound));
  return t;
}

template <typename T>
std::unique_ptr<ConvLayer<T>> make_conv(const std::string& name, const NetPlan& plan, Variant variant,
                                        int filters, int kh, int kw, int c, int stride, int padding,
                                        GradMode mode, Rng& rng) {
  const double bound = std::sqrt(6.0 / (double(kh) * kw * c));
  ConvLayerParams<T> params{BaselineWeights<T>{}, stride, padding};
  const LayerPlan* lp = plan.find(name);
  if (!lp) throw Error(Errc::DimMismatch, "plan has no entry for layer '" + name + "'");
  if (variant == Variant::FilterMap && lp->filter_mapped()) {
    const FilterMapSpec& spec = lp->spec();
    params.weights = FilterMap<T>{spec, uniform_tensor<T>(map_dims(spec).shape(), bound, rng)};
  } else {
    params.weights = BaselineWeights<T>{
        uniform_tensor<T>({std::size_t(filters), std::size_t(kh), std::size_t(kw), std::size_t(c)}, bound, rng)};
  }
  return std::make_unique<ConvLayer<T>>(name, std::move(params), mode);
}

}  // namespace

NetDescription parse_net_description(std::string_view text, std::string source) {
  const IniDocument doc = parse_ini(text, source);
  NetDescription net{source, std::string(text), std::nullopt, {}};
  {
    SectionReader top(doc.preamble(), source);
    if (auto e = top.take("input")) {
      const auto dims = read_dims(top, *e, 3, 3);
      net.input = InputShape{int(dims[0]), int(dims[1]), int(dims[2])};
    }
    top.finish();
  }
  for (std::size_t i = 1; i < doc.sections.size(); ++i) net.layers.push_back(parse_layer(doc.sections[i], source));
  if (net.layers.empty()) throw Error(Errc::EmptyNetwork, source + ": no layers");
  return net;
}

std::string_view builtin_net_text(std::string_view name) {
  if (name == "builtin:toy") return kToyNet;
  throw Error(Errc::BadValue, "unknown built-in network '" + std::string(name) + "'");
}

NetDescription load_net_description(const std::string& spec, const std::filesystem::path& base_dir) {
  if (spec.rfind("builtin:", 0) == 0) return parse_net_description(builtin_net_text(spec), spec);
  std::filesystem::path path(spec);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read network description " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_net_description(buf.str(), path.string());
}

std::vector<LayerDesc> layer_descs(const NetDescription& net) {
  std::vector<LayerDesc> out;
  walk(net, [&](const NetLayer& l, const std::optional<InputShape>& in) {
    switch (l.kind) {
      case NetLayerKind::Conv:
        out.push_back(conv_layer_desc(l.name, l.filters, l.kernel_h, l.kernel_w, conv_in_channels(net, l, in)));
        break;
      case NetLayerKind::Residual: {
        const int c = residual_channels(net, l, in);
        out.push_back(conv_layer_desc(l.name + ".conv1", c, 3, 3, c));
        out.push_back(conv_layer_desc(l.name + ".conv2", c, 3, 3, c));
        break;
      }
      case NetLayerKind::Dense:
        out.push_back(dense_layer_desc(l.name, l.units, dense_in_features(net, l, in)));
        break;
      case NetLayerKind::Other:
        out.push_back(other_layer_desc(l.name, l.params));
        break;
      default:
        break;
    }
  });
  return out;
}

PlanOverrides plan_overrides(const NetDescription& net) {
  PlanOverrides out;
  for (const auto& l : net.layers) {
    if (!l.fm.grid && !l.fm.strides) continue;
    if (l.kind == NetLayerKind::Residual) {
      out[l.name + ".conv1"] = l.fm;
      out[l.name + ".conv2"] = l.fm;
    } else {
      out[l.name] = l.fm;
    }
  }
  return out;
}

NetPlan plan_description(const NetDescription& net) {
  return plan_network(layer_descs(net), plan_overrides(net));
}

int output_classes(const NetDescription& net) {
  if (!net.input) throw Error(Errc::BadDims, net.source + ": no input shape; description is plan-only");
  walk(net, [](const NetLayer&, const std::optional<InputShape>&) {});
  const NetLayer& tail = net.layers.back();
  if (tail.kind != NetLayerKind::Dense) {
    throw Error(Errc::BadDims, net.source + ": last layer must be dense to produce class scores");
  }
  return tail.units;
}

std::string_view to_string(Variant v) noexcept { return v == Variant::FilterMap ? "fm" : "baseline"; }

template <typename T>
Model<T> build_model(const NetDescription& net, const NetPlan& plan, Variant variant, GradMode mode, Rng& rng) {
  if (!net.trainable()) throw Error(Errc::BadDims, net.source + ": no input shape; description is plan-only");
  Model<T> model;
  walk(net, [&](const NetLayer& l, const std::optional<InputShape>& in) {
    switch (l.kind) {
      case NetLayerKind::Conv:
        model.add(make_conv<T>(l.name, plan, variant, l.filters, l.kernel_h, l.kernel_w,
                               conv_in_channels(net, l, in), l.stride, l.padding, mode, rng));
        break;
      case NetLayerKind::Residual: {
        const int c = residual_channels(net, l, in);
        auto c1 = make_conv<T>(l.name + ".conv1", plan, variant, c, 3, 3, c, 1, 1, mode, rng);
        auto c2 = make_conv<T>(l.name + ".conv2", plan, variant, c, 3, 3, c, 1, 1, mode, rng);
        model.add(std::make_unique<ResidualBlock<T>>(l.name, std::move(c1), std::move(c2)));
        break;
      }
      case NetLayerKind::Dense: {
        const int f = dense_in_features(net, l, in);
        const double bound = std::sqrt(6.0 / (double(f) + l.units));
        auto w = uniform_tensor<T>({std::size_t(l.units), std::size_t(f)}, bound, rng);
        model.add(std::make_unique<DenseLayer<T>>(l.name, std::move(w), Tensor<T>({std::size_t(l.units)})));
        break;
      }
      case NetLayerKind::Relu:
        model.add(std::make_unique<ReluLayer<T>>(l.name));
        break;
      case NetLayerKind::MaxPool:
        model.add(std::make_unique<MaxPool2Layer<T>>(l.name));
        break;
      case NetLayerKind::AvgPool:
        model.add(std::make_unique<GlobalAvgPoolLayer<T>>(l.name));
        break;
      case NetLayerKind::Other:
        break;  // rejected by walk()
    }
  });
  return model;
}

template Model<float> build_model(const NetDescription&, const NetPlan&, Variant, GradMode, Rng&);
template Model<double> build_model(const NetDescription&, const NetPlan&, Variant, GradMode, Rng&);

}  // namespace fm3d
