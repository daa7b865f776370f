#pragma once

// Line-based "[section]" + "key = value" files with '#' comments. Used for
// both run configurations and network descriptions.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fm3d/error.hpp"

namespace fm3d {

class ConfigError : public Error {
 public:
  ConfigError(Errc code, const std::string& source, int line, const std::string& message);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct IniEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct IniSection {
  std::string name;  // empty for the entries before the first header
  int line = 0;
  std::vector<IniEntry> entries;
};

struct IniDocument {
  std::string source;
  std::vector<IniSection> sections;  // sections[0] is the unnamed preamble

  const IniSection& preamble() const { return sections.front(); }
};

// Duplicate keys within a section and duplicate section names are rejected,
// citing the line of the second occurrence.
IniDocument parse_ini(std::string_view text, std::string source);

// Consumes keys from one section; finish() rejects whatever was not taken.
class SectionReader {
 public:
  SectionReader(const IniSection& section, std::string source);

  std::optional<IniEntry> take(std::string_view key);
  IniEntry require(std::string_view key);
  void finish() const;

  std::optional<std::string> text(std::string_view key);
  std::optional<std::int64_t> integer(std::string_view key);
  std::optional<std::uint64_t> unsigned_integer(std::string_view key);
  std::optional<double> real(std::string_view key);

  [[noreturn]] void fail(Errc code, const IniEntry& entry, const std::string& message) const;
  const std::string& source() const noexcept { return source_; }
  const IniSection& section() const noexcept { return section_; }

 private:
  const IniSection& section_;
  std::string source_;
  std::vector<bool> used_;
};

std::int64_t parse_int(std::string_view text);
std::uint64_t parse_uint(std::string_view text);
double parse_real(std::string_view text);
// "4x4x2" -> {4, 4, 2}; also accepts a single number.
std::vector<std::int64_t> parse_dims(std::string_view text);

}  // namespace fm3d
