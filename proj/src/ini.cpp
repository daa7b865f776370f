#include "fm3d/ini.hpp"

#include <charconv>
#include <cmath>

namespace fm3d {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string located(const std::string& source, int line, const std::string& message) {
  return source + ":" + std::to_string(line) + ": " + message;
}

}  // namespace

ConfigError::ConfigError(Errc code, const std::string& source, int line, const std::string& message)
    : Error(code, located(source, line, message)), line_(line) {}

IniDocument parse_ini(std::string_view text, std::string source) {
  IniDocument doc{source, {IniSection{"", 0, {}}}};
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view raw = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(Errc::BadValue, source, line_no, "unterminated section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.empty()) throw ConfigError(Errc::BadValue, source, line_no, "empty section name");
      for (const auto& s : doc.sections) {
        if (s.name == name) {
          throw ConfigError(Errc::DuplicateKey, source, line_no,
                            "duplicate section [" + name + "] (first at line " + std::to_string(s.line) + ")");
        }
      }
      doc.sections.push_back({name, line_no, {}});
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(Errc::BadValue, source, line_no, "expected 'key = value'");
    }
    IniEntry entry{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (entry.key.empty()) throw ConfigError(Errc::BadValue, source, line_no, "empty key");
    auto& section = doc.sections.back();
    for (const auto& e : section.entries) {
      if (e.key == entry.key) {
        throw ConfigError(Errc::DuplicateKey, source, line_no,
                          "duplicate key '" + entry.key + "' (first at line " + std::to_string(e.line) + ")");
      }
    }
    section.entries.push_back(std::move(entry));
  }
  return doc;
}

SectionReader::SectionReader(const IniSection& section, std::string source)
    : section_(section), source_(std::move(source)), used_(section.entries.size(), false) {}

std::optional<IniEntry> SectionReader::take(std::string_view key) {
  for (std::size_t i = 0; i < section_.entries.size(); ++i) {
    if (section_.entries[i].key == key) {
      used_[i] = true;
      return section_.entries[i];
    }
  }
  return std::nullopt;
}

IniEntry SectionReader::require(std::string_view key) {
  if (auto e = take(key)) return *e;
  const std::string where = section_.name.empty() ? "top level" : "section [" + section_.name + "]";
  throw ConfigError(Errc::MissingKey, source_, section_.line, "missing key '" + std::string(key) + "' in " + where);
}

void SectionReader::finish() const {
  for (std::size_t i = 0; i < section_.entries.size(); ++i) {
    if (!used_[i]) {
      const auto& e = section_.entries[i];
      const std::string where = section_.name.empty() ? "top level" : "section [" + section_.name + "]";
      throw ConfigError(Errc::UnknownKey, source_, e.line, "unknown key '" + e.key + "' in " + where);
    }
  }
}

void SectionReader::fail(Errc code, const IniEntry& entry, const std::string& message) const {
  throw ConfigError(code, source_, entry.line, "'" + entry.key + "': " + message);
}

std::optional<std::string> SectionReader::text(std::string_view key) {
  if (auto e = take(key)) {
    if (e->value.empty()) fail(Errc::BadValue, *e, "empty value");
    return e->value;
  }
  return std::nullopt;
}

std::optional<std::int64_t> SectionReader::integer(std::string_view key) {
  auto e = take(key);
  if (!e) return std::nullopt;
  try {
    return parse_int(e->value);
  } catch (const Error& err) {
    fail(Errc::BadValue, *e, err.message());
  }
}

std::optional<std::uint64_t> SectionReader::unsigned_integer(std::string_view key) {
  auto e = take(key);
  if (!e) return std::nullopt;
  try {
    return parse_uint(e->value);
  } catch (const Error& err) {
    fail(Errc::BadValue, *e, err.message());
  }
}

std::optional<double> SectionReader::real(std::string_view key) {
  auto e = take(key);
  if (!e) return std::nullopt;
  try {
    return parse_real(e->value);
  } catch (const Error& err) {
    fail(Errc::BadValue, *e, err.message());
  }
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(Errc::BadValue, "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(Errc::BadValue, "not an unsigned integer: '" + std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view text) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    throw Error(Errc::BadValue, "not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::int64_t> parse_dims(std::string_view text) {
  std::vector<std::int64_t> dims;
  std::size_t pos = 0;
  while (true) {
    const auto x = text.find('x', pos);
    dims.push_back(parse_int(trim(text.substr(pos, x == std::string_view::npos ? std::string_view::npos : x - pos))));
    if (x == std::string_view::npos) break;
    pos = x + 1;
  }
  return dims;
}

}  // namespace fm3d
