// AVX2 lane. Elementwise kernels use mul+add (never FMA) in the same
// per-element order as the scalar reference, so results match it bit for bit;
// the reductions use FMA with vector partial sums and are only required to
// agree within summation-order error.

#include <cmath>
#include <immintrin.h>

#include "lanes.hpp"

namespace simcache::kern::detail {

namespace {

inline __m256d abs_pd(__m256d x) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(x, mask);
}

inline double finish1(double d, double gamma, double add) {
  if (gamma == 1.0) return d + add;
  if (gamma == 2.0) return d * d + add;
  if (gamma == 0.5) return std::sqrt(d) + add;
  return std::pow(d, gamma) + add;
}

// raise a vector of distances to gamma and add; generic gamma handled by the
// caller with a scalar loop
inline __m256d finish4(__m256d d, double gamma, __m256d add) {
  if (gamma == 1.0) return _mm256_add_pd(d, add);
  if (gamma == 2.0) return _mm256_add_pd(_mm256_mul_pd(d, d), add);
  return _mm256_add_pd(_mm256_sqrt_pd(d), add);  // gamma == 0.5
}

inline bool fast_gamma(double gamma) { return gamma == 1.0 || gamma == 2.0 || gamma == 0.5; }

void l1_cost_2d(const double* xs, const double* ys, std::size_t n, double qx, double qy,
                double period, double gamma, double add, double* out) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  const __m256d vper = _mm256_set1_pd(period);
  const __m256d vadd = _mm256_set1_pd(add);
  const bool fast = fast_gamma(gamma);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d dx = abs_pd(_mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx));
    __m256d dy = abs_pd(_mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy));
    if (period > 0.0) {
      dx = _mm256_min_pd(dx, _mm256_sub_pd(vper, dx));
      dy = _mm256_min_pd(dy, _mm256_sub_pd(vper, dy));
    }
    const __m256d d = _mm256_add_pd(dx, dy);
    if (fast) {
      _mm256_storeu_pd(out + i, finish4(d, gamma, vadd));
    } else {
      alignas(32) double tmp[4];
      _mm256_store_pd(tmp, d);
      for (int t = 0; t < 4; ++t) out[i + t] = std::pow(tmp[t], gamma) + add;
    }
  }
  for (; i < n; ++i) {
    double dx = std::fabs(xs[i] - qx);
    double dy = std::fabs(ys[i] - qy);
    if (period > 0.0) {
      dx = dx < period - dx ? dx : period - dx;
      dy = dy < period - dy ? dy : period - dy;
    }
    out[i] = finish1(dx + dy, gamma, add);
  }
}

void l2_cost_soa(const double* dims, std::size_t stride, std::size_t dim, std::size_t n,
                 const double* q, double gamma, double add, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(dims + d * stride + i),
                                         _mm256_set1_pd(q[d]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    if (gamma == 2.0) {
      _mm256_storeu_pd(out + i, _mm256_add_pd(acc, _mm256_set1_pd(add)));
    } else if (gamma == 1.0) {
      _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_sqrt_pd(acc), _mm256_set1_pd(add)));
    } else if (gamma == 0.5) {
      _mm256_storeu_pd(out + i,
                       _mm256_add_pd(_mm256_sqrt_pd(_mm256_sqrt_pd(acc)), _mm256_set1_pd(add)));
    } else {
      alignas(32) double tmp[4];
      _mm256_store_pd(tmp, acc);
      for (int t = 0; t < 4; ++t) out[i + t] = std::pow(tmp[t], gamma * 0.5) + add;
    }
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = dims[d * stride + i] - q[d];
      acc = acc + diff * diff;
    }
    if (gamma == 2.0)
      out[i] = acc + add;
    else if (gamma == 1.0)
      out[i] = std::sqrt(acc) + add;
    else if (gamma == 0.5)
      out[i] = std::sqrt(std::sqrt(acc)) + add;
    else
      out[i] = std::pow(acc, gamma * 0.5) + add;
  }
}

double positive_gain(const double* rate, const double* best, const double* cand, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = zero;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g =
        _mm256_max_pd(zero, _mm256_sub_pd(_mm256_loadu_pd(best + i), _mm256_loadu_pd(cand + i)));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(rate + i), g, acc);
  }
  alignas(32) double tmp[4];
  _mm256_store_pd(tmp, acc);
  double s = (tmp[0] + tmp[1]) + (tmp[2] + tmp[3]);
  for (; i < n; ++i) {
    const double g = best[i] - cand[i];
    if (g > 0.0) s += rate[i] * g;
  }
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  alignas(32) double tmp[4];
  _mm256_store_pd(tmp, acc);
  double s = (tmp[0] + tmp[1]) + (tmp[2] + tmp[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops k{"avx2", &l1_cost_2d, &l2_cost_soa, &positive_gain, &dot};
  return k;
}

}  // namespace simcache::kern::detail
