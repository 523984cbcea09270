#include "retouch/common.hpp"

#include <cstdio>
#include <cstdlib>

#include "retouch/parallel.hpp"

namespace retouch {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("RETOUCH_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

}  // namespace retouch
