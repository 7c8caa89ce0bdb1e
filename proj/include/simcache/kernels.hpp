#pragma once

#include <cstddef>

namespace simcache::kern {

// Inner-loop kernels used by the placement evaluators. Every operation has a
// scalar reference implementation plus SIMD variants selected at runtime; the
// per-element operations (and their order) are identical across lanes, so the
// elementwise kernels produce bit-identical results and only the reductions
// differ by summation order.
//
// Contracts:
//  - l1_cost_2d: out[i] = f(|xs[i]-qx| + |ys[i]-qy|) + add, where f raises to
//    `gamma`; a positive `period` wraps each axis difference around a torus.
//  - l2_cost_soa: out[i] = f(sqrt(sum_d (dims[d*stride+i] - q[d])^2)) + add,
//    with coordinates laid out dimension-major.
//  - positive_gain: sum_i rate[i] * max(0, best[i] - cand[i]); best[] must be
//    finite, cand[] may contain +infinity.
//  - dot: plain inner product.
struct Ops {
  const char* name;
  void (*l1_cost_2d)(const double* xs, const double* ys, std::size_t n, double qx, double qy,
                     double period, double gamma, double add, double* out);
  void (*l2_cost_soa)(const double* dims, std::size_t stride, std::size_t dim, std::size_t n,
                      const double* q, double gamma, double add, double* out);
  double (*positive_gain)(const double* rate, const double* best, const double* cand,
                          std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
};

enum class Lane { Scalar = 0, Avx2 = 1, Avx512 = 2 };

// Lane availability combines compile support and the running CPU.
bool lane_supported(Lane lane);
Lane active_lane();
// Force a lane (overridable by the SIMCACHE_LANE environment variable at
// startup: scalar|avx2|avx512). Throws InvalidInputError when unsupported.
void set_lane(Lane lane);
const Ops& ops();
const Ops& ops_for(Lane lane);

}  // namespace simcache::kern
