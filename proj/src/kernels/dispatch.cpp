#include <atomic>
#include <cstdlib>
#include <cstring>

#include "lanes.hpp"
#include "simcache/model.hpp"

namespace simcache::kern {

namespace {

bool cpu_supports(Lane lane) {
  switch (lane) {
    case Lane::Scalar:
      return true;
    case Lane::Avx2:
#if defined(SIMCACHE_BUILD_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Lane::Avx512:
#if defined(SIMCACHE_BUILD_AVX512)
      return __builtin_cpu_supports("avx512f");
#else
      return false;
#endif
  }
  return false;
}

Lane detect_default() {
  if (const char* env = std::getenv("SIMCACHE_LANE")) {
    if (!std::strcmp(env, "scalar")) return Lane::Scalar;
    if (!std::strcmp(env, "avx2") && cpu_supports(Lane::Avx2)) return Lane::Avx2;
    if (!std::strcmp(env, "avx512") && cpu_supports(Lane::Avx512)) return Lane::Avx512;
  }
  if (cpu_supports(Lane::Avx512)) return Lane::Avx512;
  if (cpu_supports(Lane::Avx2)) return Lane::Avx2;
  return Lane::Scalar;
}

std::atomic<Lane>& current() {
  static std::atomic<Lane> lane{detect_default()};
  return lane;
}

}  // namespace

bool lane_supported(Lane lane) { return cpu_supports(lane); }

Lane active_lane() { return current().load(std::memory_order_relaxed); }

void set_lane(Lane lane) {
  if (!cpu_supports(lane)) throw InvalidInputError("requested kernel lane is not supported here");
  current().store(lane, std::memory_order_relaxed);
}

const Ops& ops_for(Lane lane) {
  switch (lane) {
    case Lane::Scalar:
      return detail::scalar_ops();
    case Lane::Avx2:
#if defined(SIMCACHE_BUILD_AVX2)
      if (cpu_supports(Lane::Avx2)) return detail::avx2_ops();
#endif
      break;
    case Lane::Avx512:
#if defined(SIMCACHE_BUILD_AVX512)
      if (cpu_supports(Lane::Avx512)) return detail::avx512_ops();
#endif
      break;
  }
  throw InvalidInputError("requested kernel lane is not supported here");
}

const Ops& ops() { return ops_for(active_lane()); }

}  // namespace simcache::kern
