#include "ohtes/parallel.hpp"

#include <cstdlib>
#include <string>

namespace ohtes {

int worker_threads() {
  const int hw = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const char* env = std::getenv("OHT_ES_THREADS");
  if (env == nullptr) return hw;
  try {
    const int n = std::stoi(env);
    return n >= 1 ? n : hw;
  } catch (const std::exception&) {
    return hw;
  }
}

}  // namespace ohtes
