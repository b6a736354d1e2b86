#include "anscale/parallel.hpp"

#include <cstdlib>
#include <string>

namespace anscale {

std::size_t default_thread_count() {
  if (const char* env = std::getenv("ANSCALE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return 1;
}

}  // namespace anscale
