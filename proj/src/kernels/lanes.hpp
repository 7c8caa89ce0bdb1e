#pragma once

#include "simcache/kernels.hpp"

namespace simcache::kern::detail {

const Ops& scalar_ops();
#ifdef SIMCACHE_BUILD_AVX2
const Ops& avx2_ops();
#endif
#ifdef SIMCACHE_BUILD_AVX512
const Ops& avx512_ops();
#endif

}  // namespace simcache::kern::detail
