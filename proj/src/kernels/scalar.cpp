// Reference kernels. Compiled with -ffp-contract=off so the SIMD lanes can be
// required to match the elementwise results bit for bit.

#include <algorithm>
#include <cmath>

#include "lanes.hpp"

namespace simcache::kern::detail {

namespace {

inline double finish(double d, double gamma, double add) {
  if (gamma == 1.0) return d + add;
  if (gamma == 2.0) return d * d + add;
  if (gamma == 0.5) return std::sqrt(d) + add;
  return std::pow(d, gamma) + add;
}

void l1_cost_2d(const double* xs, const double* ys, std::size_t n, double qx, double qy,
                double period, double gamma, double add, double* out) {
  if (period > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double dx = std::fabs(xs[i] - qx);
      double dy = std::fabs(ys[i] - qy);
      dx = std::min(dx, period - dx);
      dy = std::min(dy, period - dy);
      out[i] = finish(dx + dy, gamma, add);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = finish(std::fabs(xs[i] - qx) + std::fabs(ys[i] - qy), gamma, add);
    }
  }
}

void l2_cost_soa(const double* dims, std::size_t stride, std::size_t dim, std::size_t n,
                 const double* q, double gamma, double add, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double* row = dims + d * stride;
    const double qd = q[d];
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = row[i] - qd;
      out[i] = out[i] + diff * diff;
    }
  }
  // out currently holds squared distances: raise to gamma/2
  if (gamma == 2.0) {
    for (std::size_t i = 0; i < n; ++i) out[i] = out[i] + add;
  } else if (gamma == 1.0) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(out[i]) + add;
  } else if (gamma == 0.5) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(std::sqrt(out[i])) + add;
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(out[i], gamma * 0.5) + add;
  }
}

double positive_gain(const double* rate, const double* best, const double* cand, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += rate[i] * std::max(0.0, best[i] - cand[i]);
  }
  return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops k{"scalar", &l1_cost_2d, &l2_cost_soa, &positive_gain, &dot};
  return k;
}

}  // namespace simcache::kern::detail
