// AVX-512F lane; same elementwise contract as the scalar reference (bitwise
// identical), masked remainders instead of scalar tails.

#include <cmath>
#include <immintrin.h>

#include "lanes.hpp"

namespace simcache::kern::detail {

namespace {

inline __m512d abs_pd(__m512d x) { return _mm512_abs_pd(x); }

inline __mmask8 tail_mask(std::size_t rem) { return static_cast<__mmask8>((1u << rem) - 1u); }

void l1_cost_2d(const double* xs, const double* ys, std::size_t n, double qx, double qy,
                double period, double gamma, double add, double* out) {
  const __m512d vqx = _mm512_set1_pd(qx);
  const __m512d vqy = _mm512_set1_pd(qy);
  const __m512d vper = _mm512_set1_pd(period);
  const __m512d vadd = _mm512_set1_pd(add);
  const bool fast = gamma == 1.0 || gamma == 2.0 || gamma == 0.5;
  for (std::size_t i = 0; i < n; i += 8) {
    const std::size_t rem = n - i;
    const __mmask8 m = rem >= 8 ? 0xff : tail_mask(rem);
    __m512d dx = abs_pd(_mm512_sub_pd(_mm512_maskz_loadu_pd(m, xs + i), vqx));
    __m512d dy = abs_pd(_mm512_sub_pd(_mm512_maskz_loadu_pd(m, ys + i), vqy));
    if (period > 0.0) {
      dx = _mm512_min_pd(dx, _mm512_sub_pd(vper, dx));
      dy = _mm512_min_pd(dy, _mm512_sub_pd(vper, dy));
    }
    const __m512d d = _mm512_add_pd(dx, dy);
    if (fast) {
      __m512d r;
      if (gamma == 1.0)
        r = _mm512_add_pd(d, vadd);
      else if (gamma == 2.0)
        r = _mm512_add_pd(_mm512_mul_pd(d, d), vadd);
      else
        r = _mm512_add_pd(_mm512_sqrt_pd(d), vadd);
      _mm512_mask_storeu_pd(out + i, m, r);
    } else {
      alignas(64) double tmp[8];
      _mm512_store_pd(tmp, d);
      const std::size_t lim = rem >= 8 ? 8 : rem;
      for (std::size_t t = 0; t < lim; ++t) out[i + t] = std::pow(tmp[t], gamma) + add;
    }
  }
}

void l2_cost_soa(const double* dims, std::size_t stride, std::size_t dim, std::size_t n,
                 const double* q, double gamma, double add, double* out) {
  const __m512d vadd = _mm512_set1_pd(add);
  for (std::size_t i = 0; i < n; i += 8) {
    const std::size_t rem = n - i;
    const __mmask8 m = rem >= 8 ? 0xff : tail_mask(rem);
    __m512d acc = _mm512_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m512d diff =
          _mm512_sub_pd(_mm512_maskz_loadu_pd(m, dims + d * stride + i), _mm512_set1_pd(q[d]));
      acc = _mm512_add_pd(acc, _mm512_mul_pd(diff, diff));
    }
    if (gamma == 2.0) {
      _mm512_mask_storeu_pd(out + i, m, _mm512_add_pd(acc, vadd));
    } else if (gamma == 1.0) {
      _mm512_mask_storeu_pd(out + i, m, _mm512_add_pd(_mm512_sqrt_pd(acc), vadd));
    } else if (gamma == 0.5) {
      _mm512_mask_storeu_pd(out + i, m,
                            _mm512_add_pd(_mm512_sqrt_pd(_mm512_sqrt_pd(acc)), vadd));
    } else {
      alignas(64) double tmp[8];
      _mm512_store_pd(tmp, acc);
      const std::size_t lim = rem >= 8 ? 8 : rem;
      for (std::size_t t = 0; t < lim; ++t) out[i + t] = std::pow(tmp[t], gamma * 0.5) + add;
    }
  }
}

double positive_gain(const double* rate, const double* best, const double* cand, std::size_t n) {
  const __m512d zero = _mm512_setzero_pd();
  __m512d acc = zero;
  for (std::size_t i = 0; i < n; i += 8) {
    const std::size_t rem = n - i;
    const __mmask8 m = rem >= 8 ? 0xff : tail_mask(rem);
    // masked-off lanes of best-cand are 0-0=0, clamped to 0: no contribution
    const __m512d g = _mm512_max_pd(
        zero, _mm512_sub_pd(_mm512_maskz_loadu_pd(m, best + i), _mm512_maskz_loadu_pd(m, cand + i)));
    acc = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(m, rate + i), g, acc);
  }
  return _mm512_reduce_add_pd(acc);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m512d acc = _mm512_setzero_pd();
  for (std::size_t i = 0; i < n; i += 8) {
    const std::size_t rem = n - i;
    const __mmask8 m = rem >= 8 ? 0xff : tail_mask(rem);
    acc = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(m, a + i), _mm512_maskz_loadu_pd(m, b + i), acc);
  }
  return _mm512_reduce_add_pd(acc);
}

}  // namespace

const Ops& avx512_ops() {
  static const Ops k{"avx512", &l1_cost_2d, &l2_cost_soa, &positive_gain, &dot};
  return k;
}

}  // namespace simcache::kern::detail
