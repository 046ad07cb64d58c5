#include "orderspn/threads.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace orderspn {

int configure_threads_from_env() {
  if (const char* raw = std::getenv("ORDERSPN_THREADS")) {
    try {
      const int n = std::stoi(raw);
      if (n > 0) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Unparseable values leave the OpenMP default in place.
    }
  }
  return omp_get_max_threads();
}

void set_thread_count(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace orderspn
