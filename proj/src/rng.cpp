#include "fm3d/rng.hpp"

#include <sstream>

#include "fm3d/error.hpp"

namespace fm3d {

std::string save_rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void load_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  Rng restored;
  is >> restored;
  if (!is) throw Error(Errc::BadValue, "corrupt RNG state");
  rng = restored;
}

}  // namespace fm3d
