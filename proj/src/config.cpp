#include "fm3d/config.hpp"

#include <fstream>
#include <sstream>

#include "fm3d/ini.hpp"

namespace fm3d {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

int small_int(SectionReader& r, std::string_view key, int fallback, std::int64_t min) {
  auto e = r.take(key);
  if (!e) return fallback;
  std::int64_t v = 0;
  try {
    v = parse_int(e->value);
  } catch (const Error& err) {
    r.fail(Errc::BadValue, *e, err.message());
  }
  if (v < min || v > (std::int64_t(1) << 30)) r.fail(Errc::BadValue, *e, "value out of range");
  return int(v);
}

template <typename Parse>
auto enum_value(SectionReader& r, std::string_view key, Parse parse, decltype(parse("")) fallback) {
  auto e = r.take(key);
  if (!e) return fallback;
  try {
    return parse(e->value);
  } catch (const Error& err) {
    r.fail(Errc::BadValue, *e, err.message());
  }
}

void read_run(SectionReader& r, RunConfig& c) {
  const IniEntry seed = r.require("seed");
  try {
    c.seed = parse_uint(seed.value);
  } catch (const Error& err) {
    r.fail(Errc::BadValue, seed, err.message());
  }
  c.epochs = small_int(r, "epochs", c.epochs, 0);
  c.batch_size = small_int(r, "batch_size", c.batch_size, 1);
  if (auto e = r.take("learning_rate")) {
    try {
      c.learning_rate = parse_real(e->value);
    } catch (const Error& err) {
      r.fail(Errc::BadValue, *e, err.message());
    }
    if (c.learning_rate < 0) r.fail(Errc::BadValue, *e, "learning_rate must be >= 0");
  }
  if (auto e = r.take("momentum")) {
    try {
      c.momentum = parse_real(e->value);
    } catch (const Error& err) {
      r.fail(Errc::BadValue, *e, err.message());
    }
    if (c.momentum < 0 || c.momentum >= 1) r.fail(Errc::BadValue, *e, "momentum must lie in [0, 1)");
  }
  c.grad_mode = enum_value(r, "grad_mode", parse_grad_mode, c.grad_mode);
  c.precision = enum_value(r, "precision", parse_precision, c.precision);
  if (auto out = r.text("out")) c.out_dir = resolve(c.base_dir, *out);
  if (auto resume = r.text("resume")) c.resume = resolve(c.base_dir, *resume);
}

DataSource parse_source(std::string_view text) {
  if (text == "synthetic") return DataSource::Synthetic;
  if (text == "idx") return DataSource::Idx;
  if (text == "csv") return DataSource::Csv;
  throw Error(Errc::BadValue, "data source must be synthetic, idx or csv");
}

void read_data(SectionReader& r, RunConfig& c) {
  DataConfig& d = c.data;
  d.source = enum_value(r, "source", parse_source, d.source);
  if (auto e = r.take("seed")) {
    try {
      d.seed = parse_uint(e->value);
    } catch (const Error& err) {
      r.fail(Errc::BadValue, *e, err.message());
    }
  }
  d.n = small_int(r, "n", d.n, 1);
  d.classes = small_int(r, "classes", d.classes, 1);
  d.height = small_int(r, "height", d.height, 1);
  d.width = small_int(r, "width", d.width, 1);
  d.channels = small_int(r, "channels", d.channels, 1);
  d.eval_n = small_int(r, "eval_n", d.eval_n, 0);
  auto path = [&](std::string_view key, std::filesystem::path& dst, bool required) {
    if (auto v = required ? std::optional<std::string>(r.require(key).value) : r.text(key)) {
      dst = resolve(c.base_dir, *v);
    }
  };
  const bool idx = d.source == DataSource::Idx;
  const bool csv = d.source == DataSource::Csv;
  path("train_images", d.train_images, idx);
  path("train_labels", d.train_labels, idx);
  path("eval_images", d.eval_images, false);
  path("eval_labels", d.eval_labels, false);
  path("train_csv", d.train_csv, csv);
  path("eval_csv", d.eval_csv, false);
}

void read_net(SectionReader& r, RunConfig& c) {
  if (auto desc = r.text("description")) {
    c.net_description = desc->rfind("builtin:", 0) == 0 ? *desc : resolve(c.base_dir, *desc).string();
  }
  c.variant = enum_value(r, "variant", parse_variant, c.variant);
}

}  // namespace

VariantSelection parse_variant(std::string_view text) {
  if (text == "fm") return VariantSelection::FilterMap;
  if (text == "baseline") return VariantSelection::Baseline;
  if (text == "both") return VariantSelection::Both;
  throw Error(Errc::BadValue, "variant must be fm, baseline or both");
}

RunConfig parse_config_text(std::string_view text, const std::string& source, const std::filesystem::path& base_dir) {
  const IniDocument doc = parse_ini(text, source);
  RunConfig c;
  c.base_dir = base_dir;
  c.out_dir = resolve(base_dir, "out");
  if (!doc.preamble().entries.empty()) {
    const auto& e = doc.preamble().entries.front();
    throw ConfigError(Errc::UnknownKey, source, e.line, "key '" + e.key + "' outside any section");
  }
  const IniSection* run = nullptr;
  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    const IniSection& s = doc.sections[i];
    SectionReader r(s, source);
    if (s.name == "run") {
      run = &s;
      read_run(r, c);
    } else if (s.name == "data") {
      read_data(r, c);
    } else if (s.name == "net") {
      read_net(r, c);
    } else {
      throw ConfigError(Errc::UnknownKey, source, s.line, "unknown section [" + s.name + "]");
    }
    r.finish();
  }
  if (!run) throw ConfigError(Errc::MissingKey, source, 1, "missing [run] section with 'seed'");
  if (c.data.source == DataSource::Synthetic && c.data.n < c.data.classes) {
    throw Error(Errc::BadValue, source + ": data.n must be >= data.classes");
  }
  validate_config(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string(), path.parent_path());
}

void validate_config(const RunConfig& c) {
  if (c.batch_size < 1) throw Error(Errc::BadValue, "batch_size must be >= 1");
  if (!(c.learning_rate >= 0)) throw Error(Errc::BadValue, "learning_rate must be >= 0");
  if (!(c.momentum >= 0 && c.momentum < 1)) throw Error(Errc::BadValue, "momentum must lie in [0, 1)");
  if (c.epochs < 0) throw Error(Errc::BadValue, "epochs must be >= 0");
}

}  // namespace fm3d
