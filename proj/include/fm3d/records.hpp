#pragma once

// Reader for line-delimited structured records (plan reports, metrics).

#include <string_view>
#include <vector>

#include "json.hpp"

namespace fm3d {

// One JSON object per non-empty line. Throws BadValue naming the line for
// anything else.
std::vector<nlohmann::ordered_json> read_records(std::string_view text);

}  // namespace fm3d
