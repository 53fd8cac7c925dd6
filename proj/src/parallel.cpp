#include "mixfield/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace mixfield {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MIXFIELD_THREADS")) {
    int v = 0;
    auto [p, ec] = std::from_chars(env, env + std::strlen(env), v);
    if (ec == std::errc() && p == env + std::strlen(env) && v > 0) return v;
  }
  return 1;
}

}  // namespace mixfield
