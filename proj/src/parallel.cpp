#include "gianet/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string_view>

namespace gianet::parallel {

bool deterministic_env() {
  const char* v = std::getenv("GIA_DETERMINISTIC");
  return v != nullptr && std::string_view(v) == "1";
}

void set_workers(int workers) {
  if (deterministic_env()) {
    omp_set_num_threads(1);
    return;
  }
  if (workers > 0) omp_set_num_threads(workers);
}

int workers() { return omp_get_max_threads(); }

}  // namespace gianet::parallel
