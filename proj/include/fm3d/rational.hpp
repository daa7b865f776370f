#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

namespace fm3d {

using Ratio = boost::rational<std::int64_t>;

// "num/den" in lowest terms, e.g. "9/1".
inline std::string to_string(const Ratio& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace fm3d
