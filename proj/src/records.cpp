#include "fm3d/records.hpp"

#include "fm3d/error.hpp"

namespace fm3d {

std::vector<nlohmann::ordered_json> read_records(std::string_view text) {
  std::vector<nlohmann::ordered_json> out;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto rec = nlohmann::ordered_json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw Error(Errc::BadValue, "line " + std::to_string(line_no) + " is not a JSON object");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace fm3d
