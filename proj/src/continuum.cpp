#include "simcache/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace simcache {
namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();

std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw InvalidInputError("gamma must be finite and nonnegative");
}

void check_profile(const RegionProfile& profile) {
  if (profile.rate.empty()) throw InvalidInputError("demand profile has no regions");
  for (double r : profile.rate)
    if (!std::isfinite(r) || r < 0.0)
      throw InvalidInputError("region rates must be finite and nonnegative");
}

void check_chain(const ChainSpec& spec) {
  const std::size_t n = spec.size.size();
  if (n < 2) throw InvalidInputError("a chain needs at least two nodes");
  if (spec.hop.size() != n)
    throw InvalidInputError("chain size and hop vectors must have equal length");
  check_gamma(spec.gamma);
  if (!std::isfinite(spec.hop.front()) || spec.hop.front() < 0.0)
    throw InvalidInputError("hop costs must be finite and nonnegative");
  for (std::size_t j = 0; j + 1 < n; ++j)
    if (!std::isfinite(spec.hop[j + 1]) || spec.hop[j + 1] < spec.hop[j])
      throw InvalidInputError("hop costs must be non-decreasing along the chain");
  for (std::size_t j = 0; j < n; ++j) {
    const bool repo = spec.repository_last && j + 1 == n;
    if (!repo && (!std::isfinite(spec.size[j]) || spec.size[j] <= 0.0))
      throw InvalidInputError("cache sizes must be positive");
  }
}

struct ChainWork {
  std::int64_t m = 0;
  std::int64_t n = 0;
  double gamma = 0.0;
  double beta = 0.0;  // 2/(2+gamma)
  double p = 0.0;     // (2+gamma)/2
  std::vector<double> lam;
  std::vector<double> lam_b;  // lam^beta
  std::vector<double> coeff;  // zeta * k_j^{-gamma/2}; zero for the repository
  std::vector<double> hop;
};

ChainWork make_chain_work(const RegionProfile& profile, const ChainSpec& spec) {
  ChainWork w;
  w.m = static_cast<std::int64_t>(profile.rate.size());
  w.n = static_cast<std::int64_t>(spec.size.size());
  w.gamma = spec.gamma;
  w.beta = 2.0 / (2.0 + spec.gamma);
  w.p = (2.0 + spec.gamma) / 2.0;
  w.lam = profile.rate;
  w.lam_b.resize(w.m);
  for (std::int64_t i = 0; i < w.m; ++i) w.lam_b[i] = std::pow(w.lam[i], w.beta);
  const double zeta = zeta_coeff(spec.gamma);
  w.coeff.resize(w.n);
  for (std::int64_t j = 0; j < w.n; ++j) {
    const bool repo = spec.repository_last && j + 1 == w.n;
    w.coeff[j] = repo ? 0.0 : zeta * std::pow(spec.size[j], -spec.gamma / 2.0);
  }
  w.hop = spec.hop;
  return w;
}

double full_value(const ChainWork& wk, const std::vector<double>& weights) {
  std::vector<double> load(wk.n, 0.0), rate(wk.n, 0.0);
  for (std::int64_t i = 0; i < wk.m; ++i)
    for (std::int64_t j = 0; j < wk.n; ++j) {
      const double w = weights[i * wk.n + j];
      load[j] += w * wk.lam_b[i];
      rate[j] += w * wk.lam[i];
    }
  double f = 0.0;
  for (std::int64_t j = 0; j < wk.n; ++j)
    f += wk.coeff[j] * std::pow(load[j], wk.p) + wk.hop[j] * rate[j];
  return f;
}

// Reduced coordinates: x holds columns 1..n-1, the leaf share is the slack.
// Coordinates are clamped to [0, 1] so that extrapolated points outside the
// feasible set still evaluate to something finite (the clamped extension).
void reduced_loads(const ChainWork& wk, const std::vector<double>& x, std::vector<double>& load,
                   std::vector<double>& rate) {
  load.assign(wk.n, 0.0);
  rate.assign(wk.n, 0.0);
  const std::int64_t cols = wk.n - 1;
  for (std::int64_t i = 0; i < wk.m; ++i) {
    double sx = 0.0;
    for (std::int64_t t = 0; t < cols; ++t) {
      const double v = std::clamp(x[i * cols + t], 0.0, 1.0);
      sx += v;
      load[t + 1] += v * wk.lam_b[i];
      rate[t + 1] += v * wk.lam[i];
    }
    const double w0 = std::max(0.0, 1.0 - sx);
    load[0] += w0 * wk.lam_b[i];
    rate[0] += w0 * wk.lam[i];
  }
}

double reduced_value(const ChainWork& wk, const std::vector<double>& x) {
  std::vector<double> load, rate;
  reduced_loads(wk, x, load, rate);
  double f = 0.0;
  for (std::int64_t j = 0; j < wk.n; ++j)
    f += wk.coeff[j] * std::pow(load[j], wk.p) + wk.hop[j] * rate[j];
  return f;
}

void reduced_grad(const ChainWork& wk, const std::vector<double>& x, std::vector<double>& g) {
  std::vector<double> load, rate;
  reduced_loads(wk, x, load, rate);
  std::vector<double> sg(wk.n);
  for (std::int64_t j = 0; j < wk.n; ++j)
    sg[j] = wk.coeff[j] * wk.p * std::pow(load[j], wk.p - 1.0);
  const std::int64_t cols = wk.n - 1;
  for (std::int64_t i = 0; i < wk.m; ++i) {
    double sx = 0.0;
    for (std::int64_t t = 0; t < cols; ++t) sx += std::clamp(x[i * cols + t], 0.0, 1.0);
    // Past the cap the leaf share is clamped at zero, so its terms go flat;
    // on the feasible side (including the boundary) they are active.
    const bool leaf_active = sx <= 1.0 + 1e-12;
    const double base_s = leaf_active ? sg[0] : 0.0;
    const double base_h = leaf_active ? wk.hop[0] : 0.0;
    for (std::int64_t t = 0; t < cols; ++t) {
      const double v = x[i * cols + t];
      if (v < 0.0 || v > 1.0) {
        g[i * cols + t] = 0.0;
        continue;
      }
      g[i * cols + t] =
          (sg[t + 1] - base_s) * wk.lam_b[i] + (wk.hop[t + 1] - base_h) * wk.lam[i];
    }
  }
}

void project_cap_simplex(double* x, int len) {
  double pos_sum = 0.0;
  for (int i = 0; i < len; ++i) pos_sum += std::max(x[i], 0.0);
  if (pos_sum <= 1.0) {
    for (int i = 0; i < len; ++i) x[i] = std::max(x[i], 0.0);
    return;
  }
  double stack_buf[16];
  std::vector<double> heap_buf;
  double* u = stack_buf;
  if (len > 16) {
    heap_buf.assign(x, x + len);
    u = heap_buf.data();
  } else {
    std::copy(x, x + len, stack_buf);
  }
  std::sort(u, u + len, std::greater<>());
  double csum = 0.0, tau = 0.0;
  for (int j = 0; j < len; ++j) {
    csum += u[j];
    const double t = (csum - 1.0) / (j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  for (int i = 0; i < len; ++i) x[i] = std::max(x[i] - tau, 0.0);
}

struct FistaOutcome {
  std::int64_t iterations = 0;
  double residual = kInfD;
  double value = 0.0;
  bool converged = false;
};

using ValueFn = std::function<double(const std::vector<double>&)>;
using GradFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;
using ProjFn = std::function<void(std::vector<double>&)>;

FistaOutcome fista_minimize(std::vector<double>& x, const ValueFn& value, const GradFn& grad,
                            const ProjFn& project, std::int64_t budget, double tol) {
  const std::size_t dim = x.size();
  project(x);
  std::vector<double> y = x, g(dim), z(dim), xold(dim), probe(dim);
  double fx = value(x);
  double step_l = 1.0, t = 1.0;
  FistaOutcome out;
  double grad_scale = 0.0;
  auto residual_at = [&](const std::vector<double>& pt) {
    grad(pt, g);
    grad_scale = 0.0;
    for (std::size_t i = 0; i < dim; ++i) grad_scale = std::max(grad_scale, std::abs(g[i]));
    for (std::size_t i = 0; i < dim; ++i) probe[i] = pt[i] - g[i];
    project(probe);
    double r = 0.0;
    for (std::size_t i = 0; i < dim; ++i) r = std::max(r, std::abs(probe[i] - pt[i]));
    return r;
  };
  // Value-stagnation marker: on badly conditioned problems the iterate keeps
  // a small drift along near-flat directions and the prox residual bottoms
  // out well above `tol`, so a run that is relatively stationary and no
  // longer improving is also accepted as converged.
  double f_mark = kInfD;
  std::int64_t mark_it = 0;
  for (std::int64_t it = 0; it < budget; ++it) {
    out.iterations = it + 1;
    grad(y, g);
    const double fy = value(y);
    double fz = 0.0;
    for (int bt = 0;; ++bt) {
      for (std::size_t i = 0; i < dim; ++i) z[i] = y[i] - g[i] / step_l;
      project(z);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = z[i] - y[i];
        lin += g[i] * d;
        sq += d * d;
      }
      fz = value(z);
      if (fz <= fy + lin + 0.5 * step_l * sq + 1e-12 * (std::abs(fy) + 1.0) || bt >= 120) break;
      step_l *= 2.0;
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double a1 = t / tn;
    const double a2 = (t - 1.0) / tn;
    xold = x;
    if (fz <= fx) {
      x = z;
      fx = fz;
      for (std::size_t i = 0; i < dim; ++i)
        y[i] = x[i] + a1 * (z[i] - x[i]) + a2 * (x[i] - xold[i]);
      // Extrapolation can leave the feasible set, where the clamped extension
      // is only piecewise smooth; the line search then mistakes the kink for
      // unbounded curvature. Pulling y back keeps every evaluation smooth.
      project(y);
      t = tn;
    } else {
      // Momentum overshoot: drop back to the best point and re-open the
      // extrapolation from rest, or the iterates can orbit it indefinitely.
      y = x;
      t = 1.0;
    }
    step_l = std::max(step_l * 0.9, 1e-12);
    if (it % 16 == 0) {
      out.residual = residual_at(x);
      if (out.residual <= tol) {
        out.converged = true;
        break;
      }
    }
  }
  if (!out.converged) {
    out.residual = residual_at(x);
    out.converged = out.residual <= tol;
  }
  out.value = value(x);
  return out;
}

double rate_at_position(const std::vector<double>& sorted_rates, double pos) {
  const std::int64_t m = static_cast<std::int64_t>(sorted_rates.size());
  if (pos <= 0.0) return sorted_rates.front();
  if (pos >= static_cast<double>(m)) return sorted_rates.back();
  const double rounded = std::round(pos);
  if (std::abs(pos - rounded) <= 1e-9) {
    const std::int64_t b = static_cast<std::int64_t>(rounded);
    if (b <= 0) return sorted_rates.front();
    if (b >= m) return sorted_rates.back();
    return 0.5 * (sorted_rates[b - 1] + sorted_rates[b]);
  }
  const std::int64_t idx = std::clamp<std::int64_t>(
      static_cast<std::int64_t>(std::floor(pos)), 0, m - 1);
  return sorted_rates[idx];
}

ContinuousSolution assemble_solution(const ChainWork& wk, const ChainSpec& spec,
                                     std::vector<double> weights, std::int64_t iterations,
                                     double residual) {
  const std::int64_t m = wk.m, n = wk.n;
  for (std::int64_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      double& w = weights[i * n + j];
      w = std::clamp(w, 0.0, 1.0);
      sum += w;
    }
    if (sum > 0.0)
      for (std::int64_t j = 0; j < n; ++j) weights[i * n + j] /= sum;
    else
      weights[i * n + n - 1] = 1.0;
  }

  ContinuousSolution sol;
  sol.regions = m;
  sol.nodes = n;
  sol.iterations = iterations;
  sol.residual = residual;

  std::vector<double> load(n, 0.0), rate(n, 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const double w = weights[i * n + j];
      load[j] += w * wk.lam_b[i];
      rate[j] += w * wk.lam[i];
    }
  for (std::int64_t j = 0; j < n; ++j) {
    sol.approximation += wk.coeff[j] * std::pow(load[j], wk.p);
    sol.retrieval += wk.hop[j] * rate[j];
  }
  sol.cost = sol.approximation + sol.retrieval;

  sol.slots.assign(static_cast<std::size_t>(m * n), 0.0);
  sol.radii.assign(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t j = 0; j < n; ++j) {
    const bool repo = spec.repository_last && j + 1 == n;
    for (std::int64_t i = 0; i < m; ++i) {
      const std::size_t at = static_cast<std::size_t>(i * n + j);
      if (repo) {
        sol.slots[at] = 0.0;
        sol.radii[at] = 0.0;
        continue;
      }
      const double share = load[j] > 0.0 ? weights[at] * wk.lam_b[i] / load[j] : 0.0;
      sol.slots[at] = spec.size[j] * share;
      sol.radii[at] = sol.slots[at] > 0.0 ? std::sqrt(1.0 / (2.0 * sol.slots[at])) : kInfD;
    }
  }

  std::vector<double> masses(n, 0.0);
  for (std::int64_t j = 0; j < n; ++j)
    for (std::int64_t i = 0; i < m; ++i) masses[j] += weights[i * n + j];
  std::vector<double> sorted_rates = wk.lam;
  std::sort(sorted_rates.begin(), sorted_rates.end());
  double pos = 0.0;
  for (std::int64_t j = n - 1; j >= 1; --j) {
    pos += masses[j];
    sol.thresholds.push_back(rate_at_position(sorted_rates, pos));
  }
  sol.weights = std::move(weights);
  return sol;
}

double reduced_residual(const ChainWork& wk, const std::vector<double>& weights) {
  const std::int64_t m = wk.m, cols = wk.n - 1;
  std::vector<double> x(static_cast<std::size_t>(m * cols));
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t t = 0; t < cols; ++t) x[i * cols + t] = weights[i * wk.n + t + 1];
  std::vector<double> g(x.size());
  reduced_grad(wk, x, g);
  std::vector<double> probe(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] - g[i];
  for (std::int64_t i = 0; i < m; ++i)
    project_cap_simplex(probe.data() + i * cols, static_cast<int>(cols));
  double r = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r = std::max(r, std::abs(probe[i] - x[i]));
  return r;
}

double golden_min(double lo, double hi, const std::function<double(double)>& f, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double invphi2 = (3.0 - std::sqrt(5.0)) / 2.0;
  double a = lo, b = hi;
  double span = b - a;
  if (span <= tol) return 0.5 * (a + b);
  double c = a + invphi2 * span, d = a + invphi * span;
  double fc = f(c), fd = f(d);
  while (span > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      span = b - a;
      c = a + invphi2 * span;
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      span = b - a;
      d = a + invphi * span;
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

template <class F>
double simpson(const F& f, double a, double b, int n) {
  if (!(b > a)) return 0.0;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

void dc_layer(const std::function<double(int, int)>& trans, const std::vector<double>& prev,
              std::vector<double>& cur, std::vector<int>& arg, int lo, int hi, int optlo,
              int opthi) {
  if (lo > hi) return;
  const int mid = lo + (hi - lo) / 2;
  double best = kInfD;
  int ba = optlo;
  const int cap = std::min(opthi, mid);
  for (int c = optlo; c <= cap; ++c) {
    const double v = prev[c] + trans(c, mid);
    if (v < best) {
      best = v;
      ba = c;
    }
  }
  cur[mid] = best;
  arg[mid] = ba;
  dc_layer(trans, prev, cur, arg, lo, mid - 1, optlo, ba);
  dc_layer(trans, prev, cur, arg, mid + 1, hi, ba, opthi);
}

struct TandemWork {
  std::int64_t m = 0;
  double gamma = 0.0, beta = 0.0, p = 0.0;
  double a1 = 0.0, a2 = 0.0, h = 0.0, bp = 0.0;
  std::vector<double> lam, lam_b;
};

TandemWork make_tandem_work(const RegionProfile& profile, const TandemSpec& spec) {
  TandemWork w;
  w.m = static_cast<std::int64_t>(profile.rate.size());
  w.gamma = spec.gamma;
  w.beta = 2.0 / (2.0 + spec.gamma);
  w.p = (2.0 + spec.gamma) / 2.0;
  const double zeta = zeta_coeff(spec.gamma);
  w.a1 = zeta * std::pow(spec.k1, -spec.gamma / 2.0);
  w.a2 = zeta * std::pow(spec.k2, -spec.gamma / 2.0);
  w.h = spec.h;
  w.bp = spec.beta_parent;
  w.lam = profile.rate;
  w.lam_b.resize(w.m);
  for (std::int64_t i = 0; i < w.m; ++i) w.lam_b[i] = std::pow(w.lam[i], w.beta);
  return w;
}

void check_tandem(const TandemSpec& spec) {
  if (!std::isfinite(spec.k1) || spec.k1 <= 0.0 || !std::isfinite(spec.k2) || spec.k2 <= 0.0)
    throw InvalidInputError("tandem cache sizes must be positive");
  if (!std::isfinite(spec.h) || spec.h < 0.0)
    throw InvalidInputError("forwarding cost must be finite and nonnegative");
  if (!std::isfinite(spec.beta_parent) || spec.beta_parent < 0.0)
    throw InvalidInputError("parent arrival scale must be finite and nonnegative");
  check_gamma(spec.gamma);
}

std::vector<double> checked_tandem_weights(const TandemWork& wk, const std::vector<double>& w) {
  if (static_cast<std::int64_t>(w.size()) != wk.m)
    throw InvalidInputError("weight vector length must match the region count");
  std::vector<double> c(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] < -1e-9 || w[i] > 1.0 + 1e-9)
      throw InvalidInputError("tandem weights must lie in [0,1]");
    c[i] = std::clamp(w[i], 0.0, 1.0);
  }
  return c;
}

// Both evaluate the clamped extension of the objective so that extrapolated
// points outside the box stay finite; outside a coordinate's range the
// extension is flat, so its gradient component is zero there.
double tandem_value(const TandemWork& wk, const std::vector<double>& w) {
  double s1 = 0.0, s2 = 0.0, fwd = 0.0;
  for (std::int64_t i = 0; i < wk.m; ++i) {
    const double cw = std::clamp(w[i], 0.0, 1.0);
    s1 += wk.lam_b[i] * cw;
    s2 += wk.lam_b[i] * std::pow(wk.bp + std::pow(1.0 - cw, wk.p), wk.beta);
    fwd += wk.lam[i] * (1.0 - cw);
  }
  return wk.a1 * std::pow(s1, wk.p) + wk.a2 * std::pow(s2, wk.p) + wk.h * fwd;
}

void tandem_gradient(const TandemWork& wk, const std::vector<double>& w, std::vector<double>& g) {
  double s1 = 0.0, s2 = 0.0;
  for (std::int64_t i = 0; i < wk.m; ++i) {
    const double cw = std::clamp(w[i], 0.0, 1.0);
    s1 += wk.lam_b[i] * cw;
    s2 += wk.lam_b[i] * std::pow(wk.bp + std::pow(1.0 - cw, wk.p), wk.beta);
  }
  const double c1 = wk.a1 * wk.p * std::pow(s1, wk.p - 1.0);
  const double c2 = wk.a2 * wk.p * std::pow(s2, wk.p - 1.0);
  g.resize(w.size());
  for (std::int64_t i = 0; i < wk.m; ++i) {
    if (w[i] < 0.0 || w[i] > 1.0) {
      g[i] = 0.0;
      continue;
    }
    const double den = wk.bp + std::pow(1.0 - w[i], wk.p);
    const double ratio =
        den > 0.0 ? std::pow(1.0 - w[i], wk.gamma / 2.0) / std::pow(den, 1.0 - wk.beta) : 1.0;
    g[i] = c1 * wk.lam_b[i] - c2 * wk.lam_b[i] * ratio - wk.h * wk.lam[i];
  }
}

}  // namespace

double zeta_coeff(double gamma) {
  check_gamma(gamma);
  return std::exp2((2.0 - gamma) / 2.0) / (gamma + 2.0);
}

double ball_cost(double rate, double radius, double gamma) {
  check_gamma(gamma);
  if (!std::isfinite(rate) || rate < 0.0)
    throw InvalidInputError("rate density must be finite and nonnegative");
  if (!std::isfinite(radius) || radius < 0.0)
    throw InvalidInputError("ball radius must be finite and nonnegative");
  return 4.0 * rate * std::pow(radius, gamma + 2.0) / (gamma + 2.0);
}

SingleCacheResult single_cache_opt(const RegionProfile& profile, double k, double gamma) {
  check_profile(profile);
  check_gamma(gamma);
  if (!std::isfinite(k) || k <= 0.0) throw InvalidInputError("cache size must be positive");
  const std::size_t m = profile.rate.size();
  const double beta = 2.0 / (2.0 + gamma);
  SingleCacheResult res;
  res.slots.resize(m);
  double total = 0.0;
  std::vector<double> lb(m);
  for (std::size_t i = 0; i < m; ++i) {
    lb[i] = std::pow(profile.rate[i], beta);
    total += lb[i];
  }
  if (total == 0.0) {
    std::fill(res.slots.begin(), res.slots.end(), k / static_cast<double>(m));
    res.cost = 0.0;
    return res;
  }
  for (std::size_t i = 0; i < m; ++i) res.slots[i] = k * lb[i] / total;
  res.cost = zeta_coeff(gamma) * std::pow(k, -gamma / 2.0) * std::pow(total, 1.0 / beta);
  return res;
}

double chain_objective(const RegionProfile& profile, const ChainSpec& spec,
                       const std::vector<double>& weights) {
  check_profile(profile);
  check_chain(spec);
  const ChainWork wk = make_chain_work(profile, spec);
  if (static_cast<std::int64_t>(weights.size()) != wk.m * wk.n)
    throw InvalidInputError("weight matrix must be regions x nodes");
  std::vector<double> w = weights;
  for (std::int64_t i = 0; i < wk.m; ++i) {
    double sum = 0.0;
    for (std::int64_t j = 0; j < wk.n; ++j) {
      if (!std::isfinite(w[i * wk.n + j]) || w[i * wk.n + j] < -1e-9)
        throw InvalidInputError("weights must be nonnegative");
      w[i * wk.n + j] = std::max(w[i * wk.n + j], 0.0);
      sum += w[i * wk.n + j];
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InvalidInputError("weight rows must sum to one");
  }
  return full_value(wk, w);
}

ContinuousSolution chain_solve(const RegionProfile& profile, const ChainSpec& spec) {
  check_profile(profile);
  check_chain(spec);
  const ChainWork wk = make_chain_work(profile, spec);
  const std::int64_t m = wk.m, n = wk.n, cols = n - 1;
  std::vector<double> x(static_cast<std::size_t>(m * cols), 1.0 / static_cast<double>(n));
  auto val = [&](const std::vector<double>& v) { return reduced_value(wk, v); };
  auto grd = [&](const std::vector<double>& v, std::vector<double>& g) { reduced_grad(wk, v, g); };
  auto prj = [&](std::vector<double>& v) {
    for (std::int64_t i = 0; i < m; ++i)
      project_cap_simplex(v.data() + i * cols, static_cast<int>(cols));
  };
  std::vector<double> g0(x.size());
  grd(x, g0);
  double scale = 1.0;
  for (double v : g0) scale = std::max(scale, std::abs(v));
  const FistaOutcome fo = fista_minimize(x, val, grd, prj, 300000, 1e-11 * scale);
  const double accept = std::max(1e-8, 1e-11 * scale);
  if (fo.residual > accept)
    throw ConvergenceError("chain solver stalled at kkt residual " + fmt_sci(fo.residual) +
                           " after " + std::to_string(fo.iterations) + " iterations");
  std::vector<double> wfull(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t i = 0; i < m; ++i) {
    double sx = 0.0;
    for (std::int64_t t = 0; t < cols; ++t) {
      wfull[i * n + t + 1] = x[i * cols + t];
      sx += x[i * cols + t];
    }
    wfull[i * n] = std::max(0.0, 1.0 - sx);
  }
  return assemble_solution(wk, spec, std::move(wfull), fo.iterations, fo.residual);
}

ContinuousSolution chain_threshold_solve(const RegionProfile& profile, const ChainSpec& spec) {
  check_profile(profile);
  check_chain(spec);
  const ChainWork wk = make_chain_work(profile, spec);
  const std::int64_t m = wk.m, n = wk.n;
  const int mi = static_cast<int>(m);

  std::vector<int> ord(m);
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](int a, int b) { return wk.lam[a] < wk.lam[b]; });
  std::vector<double> pb(m + 1, 0.0), pl(m + 1, 0.0);
  for (std::int64_t t = 0; t < m; ++t) {
    pb[t + 1] = pb[t] + wk.lam_b[ord[t]];
    pl[t + 1] = pl[t] + wk.lam[ord[t]];
  }
  auto pbf = [&](double c) {
    const std::int64_t i = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(c)), 0, m);
    const double frac = c - static_cast<double>(i);
    return pb[i] + (i < m ? frac * wk.lam_b[ord[i]] : 0.0);
  };
  auto plf = [&](double c) {
    const std::int64_t i = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(c)), 0, m);
    const double frac = c - static_cast<double>(i);
    return pl[i] + (i < m ? frac * wk.lam[ord[i]] : 0.0);
  };
  auto band = [&](std::int64_t node, double lo, double hi) {
    const double nb = std::max(0.0, pbf(hi) - pbf(lo));
    const double nl = std::max(0.0, plf(hi) - plf(lo));
    return wk.coeff[node] * std::pow(nb, wk.p) + wk.hop[node] * nl;
  };
  auto band_i = [&](std::int64_t node, int lo, int hi) {
    const double nb = std::max(0.0, pb[hi] - pb[lo]);
    const double nl = std::max(0.0, pl[hi] - pl[lo]);
    return wk.coeff[node] * std::pow(nb, wk.p) + wk.hop[node] * nl;
  };

  // Integer cuts first: band b covers sorted positions [cuts[b], cuts[b+1])
  // and is served by node n-1-b, so the least popular regions sit at the top
  // of the chain.
  std::vector<double> prev(mi + 1), cur(mi + 1);
  std::vector<std::vector<int>> arg(n, std::vector<int>(mi + 1, 0));
  for (int c = 0; c <= mi; ++c) prev[c] = band_i(n - 1, 0, c);
  for (std::int64_t b = 1; b + 1 < n; ++b) {
    const std::int64_t node = n - 1 - b;
    auto trans = [&](int from, int to) { return band_i(node, from, to); };
    dc_layer(trans, prev, cur, arg[b], 0, mi, 0, mi);
    prev.swap(cur);
  }
  double best = kInfD;
  int barg = 0;
  for (int c = 0; c <= mi; ++c) {
    const double v = prev[c] + band_i(0, c, mi);
    if (v < best) {
      best = v;
      barg = c;
    }
  }
  std::vector<double> cuts(n + 1, 0.0);
  cuts[n] = static_cast<double>(m);
  cuts[n - 1] = barg;
  for (std::int64_t b = n - 2; b >= 1; --b)
    cuts[b] = arg[b][static_cast<int>(cuts[b + 1])];

  // Fractional refinement: sweep each cut, minimizing over every unit piece
  // inside its bracket (the objective is convex on each piece).
  std::int64_t sweeps = 0;
  for (; sweeps < 200; ) {
    ++sweeps;
    double moved = 0.0;
    for (std::int64_t t = 1; t < n; ++t) {
      const double lo = cuts[t - 1], hi = cuts[t + 1];
      if (hi - lo <= 1e-12) {
        moved = std::max(moved, std::abs(cuts[t] - lo));
        cuts[t] = lo;
        continue;
      }
      const std::int64_t below = n - t, above = n - 1 - t;
      auto fcut = [&](double c) {
        return band(below, cuts[t - 1], c) + band(above, c, cuts[t + 1]);
      };
      double bc = cuts[t], bv = fcut(cuts[t]);
      for (double piece = std::floor(lo); piece < hi; piece += 1.0) {
        const double a = std::max(lo, piece);
        const double b2 = std::min(hi, piece + 1.0);
        if (b2 - a <= 1e-15) continue;
        const double c = golden_min(a, b2, fcut, 1e-10);
        const double v = fcut(c);
        if (v < bv - 1e-15) {
          bv = v;
          bc = c;
        }
      }
      moved = std::max(moved, std::abs(bc - cuts[t]));
      cuts[t] = bc;
    }
    if (moved < 1e-12) break;
  }

  std::vector<double> wfull(static_cast<std::size_t>(m * n), 0.0);
  for (std::int64_t b = 0; b < n; ++b) {
    const std::int64_t node = n - 1 - b;
    const double lo = cuts[b], hi = cuts[b + 1];
    for (std::int64_t i = static_cast<std::int64_t>(std::floor(lo)); i < m; ++i) {
      if (static_cast<double>(i) >= hi) break;
      const double ov = std::min(hi, static_cast<double>(i + 1)) -
                        std::max(lo, static_cast<double>(i));
      if (ov > 1e-15) wfull[static_cast<std::size_t>(ord[i]) * n + node] += ov;
    }
  }
  const double res = reduced_residual(wk, wfull);
  return assemble_solution(wk, spec, std::move(wfull), sweeps, res);
}

TreeResult equidepth_tree_solve(const RegionProfile& profile, const TreeSpec& tree) {
  if (tree.leaf_depth.empty()) throw InvalidInputError("tree has no leaves");
  if (tree.beta.size() != tree.leaf_depth.size())
    throw InvalidInputError("per-leaf scale vector must match the leaf count");
  for (double b : tree.beta)
    if (!std::isfinite(b) || b < 0.0)
      throw InvalidInputError("leaf arrival scales must be finite and nonnegative");
  const std::int64_t depth = tree.leaf_depth.front();
  for (std::int64_t d : tree.leaf_depth)
    if (d != depth)
      throw UnsupportedTopologyError("tree levels are only solvable when all leaves share a depth");
  if (depth < 1) throw InvalidInputError("leaves must sit at depth one or more");
  if (static_cast<std::size_t>(depth + 1) != tree.chain.size.size())
    throw InvalidInputError("chain spec must have one node per tree level");
  TreeResult out;
  out.level = chain_threshold_solve(profile, tree.chain);
  double total_scale = 0.0;
  for (double b : tree.beta) total_scale += b;
  out.total_cost = total_scale * out.level.cost;
  return out;
}

double tandem_both_cost(const RegionProfile& profile, const TandemSpec& spec,
                        const std::vector<double>& w) {
  check_profile(profile);
  check_tandem(spec);
  const TandemWork wk = make_tandem_work(profile, spec);
  return tandem_value(wk, checked_tandem_weights(wk, w));
}

TandemGradient tandem_both_grad(const RegionProfile& profile, const TandemSpec& spec,
                                const std::vector<double>& w) {
  check_profile(profile);
  check_tandem(spec);
  const TandemWork wk = make_tandem_work(profile, spec);
  const std::vector<double> cw = checked_tandem_weights(wk, w);
  TandemGradient out;
  tandem_gradient(wk, cw, out.d);
  for (double v : cw)
    if (v <= 0.0 || v >= 1.0) out.one_sided = true;
  return out;
}

TandemSolveResult tandem_both_solve(const RegionProfile& profile, const TandemSpec& spec) {
  check_profile(profile);
  check_tandem(spec);
  const TandemWork wk = make_tandem_work(profile, spec);
  std::vector<double> x(wk.m, 0.5);
  auto val = [&](const std::vector<double>& v) { return tandem_value(wk, v); };
  auto grd = [&](const std::vector<double>& v, std::vector<double>& g) {
    tandem_gradient(wk, v, g);
  };
  auto prj = [&](std::vector<double>& v) {
    for (double& e : v) e = std::clamp(e, 0.0, 1.0);
  };
  std::vector<double> g0(x.size());
  grd(x, g0);
  double scale = 1.0;
  for (double v : g0) scale = std::max(scale, std::abs(v));
  const FistaOutcome fo = fista_minimize(x, val, grd, prj, 400000, 1e-11 * scale);
  TandemSolveResult out;
  out.weights = std::move(x);
  out.cost = fo.value;
  out.residual = fo.residual;
  out.iterations = fo.iterations;
  out.converged = fo.residual <= std::max(1e-8, 1e-11 * scale);
  return out;
}

TandemUniformResult tandem_uniform_analytic(double k, double h, double gamma, double area,
                                            double rate_density) {
  check_gamma(gamma);
  if (!std::isfinite(k) || k <= 0.0) throw InvalidInputError("cache size must be positive");
  if (!std::isfinite(h) || h < 0.0)
    throw InvalidInputError("forwarding cost must be finite and nonnegative");
  if (!std::isfinite(area) || area <= 0.0)
    throw InvalidInputError("domain area must be positive");
  if (!std::isfinite(rate_density) || rate_density < 0.0)
    throw InvalidInputError("rate density must be finite and nonnegative");

  TandemUniformResult out;
  const double r = std::sqrt(area / (2.0 * k));
  out.radius = r;

  // Depth along the corner diagonal where forwarding stops paying:
  // (r-z)^gamma - z^gamma = h, zero when even the corner itself is too far.
  auto onset = [&](double a) { return std::pow(r - a, gamma) - std::pow(a, gamma) - h; };
  double z = 0.0;
  if (onset(0.0) > 0.0) {
    double lo = 0.0, hi = r / 2.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (onset(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    z = 0.5 * (lo + hi);
  }
  out.z = z;

  double saving = 0.0;
  if (z > 0.0 && rate_density > 0.0) {
    auto psi = [&](double a, double u) {
      return std::pow(r - a + u, gamma) - std::pow(a + u, gamma) - h;
    };
    // For gamma above one the profitable wedge widens with |y|, so it can
    // extend past z; bound it by where even the widest offset loses.
    double upper = z;
    if (gamma > 1.0) {
      const double lim = std::pow(r, gamma) - h;
      if (lim > 0.0)
        upper = std::min(r / 2.0, std::max(z, 0.5 * std::pow(lim, 1.0 / gamma)));
    }
    auto inner = [&](double a) {
      const double cap = std::min(a, r - a);
      if (cap <= 0.0) return 0.0;
      const double s0 = psi(a, 0.0), s1 = psi(a, cap);
      double ulo = 0.0, uhi = cap;
      if (s0 <= 0.0 && s1 <= 0.0) return 0.0;
      if (s0 <= 0.0 || s1 <= 0.0) {
        double neg = s0 <= 0.0 ? 0.0 : cap;
        double pos = s0 <= 0.0 ? cap : 0.0;
        for (int i = 0; i < 100; ++i) {
          const double mid = 0.5 * (neg + pos);
          if (psi(a, mid) > 0.0)
            pos = mid;
          else
            neg = mid;
        }
        const double ustar = 0.5 * (neg + pos);
        if (s0 <= 0.0)
          ulo = ustar;
        else
          uhi = ustar;
      }
      auto seg = [&](double u) { return std::max(0.0, psi(a, u)); };
      return simpson(seg, ulo, uhi, 64);
    };
    saving = 8.0 * rate_density * simpson(inner, 0.0, upper, 4096);
  }
  out.saving_per_slot = saving;
  out.cost = 2.0 * k * ball_cost(rate_density, r, gamma) - k * saving;
  return out;
}

}  // namespace simcache
