#include "simcache/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

namespace simcache {

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

}  // namespace

ObjectSpace ObjectSpace::matrix(std::int64_t count) {
  ObjectSpace s;
  s.kind = Kind::Matrix;
  s.object_count = count;
  s.cost.assign(static_cast<std::size_t>(count) * count, kInf);
  for (std::int64_t i = 0; i < count; ++i) s.cost[i * count + i] = 0.0;
  return s;
}

ObjectSpace ObjectSpace::points(std::int64_t dim, Metric metric, double gamma, double period) {
  ObjectSpace s;
  s.kind = Kind::Points;
  s.metric = metric;
  s.gamma = gamma;
  s.dim = dim;
  s.period = period;
  return s;
}

double ObjectSpace::distance(std::int64_t x, std::int64_t y) const {
  if (kind == Kind::Matrix) throw InvalidInputError("distance() requires a points space");
  const double* a = point(x);
  const double* b = point(y);
  if (metric == Metric::Norm1) {
    double d = 0.0;
    for (std::int64_t t = 0; t < dim; ++t) {
      double v = std::fabs(a[t] - b[t]);
      if (period > 0.0) v = std::min(v, period - v);
      d += v;
    }
    return d;
  }
  double d = 0.0;
  for (std::int64_t t = 0; t < dim; ++t) {
    double v = a[t] - b[t];
    d += v * v;
  }
  return std::sqrt(d);
}

double ObjectSpace::approximation_cost(std::int64_t x, std::int64_t y) const {
  if (kind == Kind::Matrix) return cost[x * object_count + y];
  double d = distance(x, y);
  if (gamma == 1.0) return d;
  if (gamma == 2.0) return d * d;
  return std::pow(d, gamma);
}

Topology Topology::make(std::int64_t n) {
  Topology t;
  t.node_count = n;
  t.capacity.assign(n, 0);
  t.is_repository.assign(n, 0);
  t.hop.assign(static_cast<std::size_t>(n) * n, kInf);
  for (std::int64_t i = 0; i < n; ++i) t.hop[i * n + i] = 0.0;
  t.path.resize(n);
  return t;
}

double Demand::total_rate() const {
  double s = 0.0;
  if (kind == Kind::Discrete)
    for (const auto& e : entries) s += e.rate;
  else
    for (const auto& r : regions) s += r.rate;
  return s;
}

Allocation Allocation::of(std::initializer_list<Approximizer> list) {
  Allocation a;
  for (auto x : list) a.insert(x);
  return a;
}

bool Allocation::contains(Approximizer a) const {
  return std::binary_search(items.begin(), items.end(), a);
}

void Allocation::insert(Approximizer a) {
  auto it = std::lower_bound(items.begin(), items.end(), a);
  if (it != items.end() && *it == a) return;
  items.insert(it, a);
}

void Allocation::erase(Approximizer a) {
  auto it = std::lower_bound(items.begin(), items.end(), a);
  if (it != items.end() && *it == a) items.erase(it);
}

void validate_instance(const Instance& inst) {
  const auto& sp = inst.space;
  const auto& topo = inst.topology;

  if (sp.object_count <= 0) throw InvalidInputError("object space is empty");
  if (sp.kind == ObjectSpace::Kind::Matrix) {
    if (std::ssize(sp.cost) != sp.object_count * sp.object_count)
      throw InvalidInputError("cost matrix shape does not match object count");
    for (std::int64_t i = 0; i < sp.object_count; ++i) {
      if (sp.cost[i * sp.object_count + i] != 0.0)
        throw InvalidInstanceError(fmt("cost matrix diagonal must be zero (object %lld)", (long long)i));
      for (std::int64_t j = 0; j < sp.object_count; ++j) {
        double v = sp.cost[i * sp.object_count + j];
        if (std::isnan(v) || v < 0.0)
          throw InvalidInstanceError(fmt("negative or NaN dissimilarity at (%lld,%lld)", (long long)i, (long long)j));
      }
    }
  } else {
    if (sp.dim <= 0) throw InvalidInputError("points space needs dim > 0");
    if (std::ssize(sp.coords) != sp.object_count * sp.dim)
      throw InvalidInputError("coordinate array shape does not match object count");
    if (!(sp.gamma > 0.0)) throw InvalidInputError("gamma must be positive");
    if (sp.period > 0.0 && sp.metric != Metric::Norm1)
      throw UnsupportedTopologyError("periodic wrap is only defined for norm-1 spaces");
  }

  const std::int64_t n = topo.node_count;
  if (n <= 0) throw InvalidInputError("topology has no nodes");
  if (std::ssize(topo.capacity) != n || std::ssize(topo.is_repository) != n ||
      std::ssize(topo.hop) != n * n || std::ssize(topo.path) != n)
    throw InvalidInputError("topology array shapes do not match node count");
  for (std::int64_t i = 0; i < n; ++i) {
    if (topo.hop[i * n + i] != 0.0)
      throw InvalidInstanceError(fmt("hop cost h(%lld,%lld) must be zero", (long long)i, (long long)i));
    for (std::int64_t j = 0; j < n; ++j) {
      double v = topo.hop[i * n + j];
      if (std::isnan(v) || v < 0.0)
        throw InvalidInstanceError(fmt("negative or NaN hop cost at (%lld,%lld)", (long long)i, (long long)j));
    }
    if (!topo.is_repository[i] && topo.capacity[i] < 0)
      throw InvalidInputError(fmt("negative capacity at node %lld", (long long)i));
  }
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& p = topo.path[i];
    if (p.empty()) continue;
    if (p.front() != i)
      throw InvalidInstanceError(fmt("path of ingress %lld must start at the ingress", (long long)i));
    double prev = -1.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t] < 0 || p[t] >= n) throw InvalidInputError("path references an unknown node");
      double hv = topo.hop_cost(i, p[t]);
      if (!(hv > prev))
        throw InvalidInstanceError(
            fmt("hop costs along the path of ingress %lld must strictly increase", (long long)i));
      prev = hv;
    }
    if (!topo.is_repository[p.back()])
      throw InvalidInstanceError(fmt("path of ingress %lld must end at a repository", (long long)i));
  }

  for (const auto& s : inst.repository_seeds) {
    if (s.object < 0 || s.object >= sp.object_count) throw InvalidInputError("seed object out of range");
    if (s.node < 0 || s.node >= n) throw InvalidInputError("seed node out of range");
    if (!topo.is_repository[s.node])
      throw InvalidInstanceError(fmt("seed (%d,%d) is not placed at a repository", s.object, s.node));
  }

  if (inst.demand.kind == Demand::Kind::Discrete) {
    std::set<std::pair<std::int32_t, std::int32_t>> seen;
    for (const auto& e : inst.demand.entries) {
      if (e.object < 0 || e.object >= sp.object_count) throw InvalidInputError("demand object out of range");
      if (e.ingress < 0 || e.ingress >= n) throw InvalidInputError("demand ingress out of range");
      if (std::isnan(e.rate) || e.rate < 0.0) throw InvalidInputError("demand rate must be >= 0");
      if (topo.path[e.ingress].empty())
        throw InvalidInstanceError(fmt("ingress %d has no forwarding path", e.ingress));
      if (!seen.emplace(e.object, e.ingress).second)
        throw InvalidInputError(fmt("duplicate demand entry (%d,%d)", e.object, e.ingress));
      // Serving from a repository must always be possible, otherwise the
      // empty-allocation cost is infinite.
      bool servable = false;
      for (const auto& s : inst.repository_seeds) {
        if (s.object != e.object) continue;
        for (auto nd : topo.path[e.ingress])
          if (nd == s.node && topo.hop_cost(e.ingress, nd) < kInf) servable = true;
      }
      if (!servable)
        throw InvalidInstanceError(
            fmt("object %d has no repository on the path of ingress %d", e.object, e.ingress));
    }
  }
}

void validate_allocation(const Instance& inst, const Allocation& a) {
  std::vector<std::int64_t> used(inst.topology.node_count, 0);
  for (const auto& x : a.items) {
    if (x.object < 0 || x.object >= inst.space.object_count)
      throw InvalidInputError("allocation object out of range");
    if (x.node < 0 || x.node >= inst.topology.node_count)
      throw InvalidInputError("allocation node out of range");
    ++used[x.node];
  }
  for (std::int64_t j = 0; j < inst.topology.node_count; ++j) {
    if (!inst.topology.is_repository[j] && used[j] > inst.topology.capacity[j])
      throw InvalidInputError(fmt("allocation exceeds capacity at node %lld", (long long)j));
  }
}

ServeChoice serve_cost(const Instance& inst, std::int32_t object, std::int32_t ingress,
                       const Allocation& a) {
  const auto& topo = inst.topology;
  if (ingress < 0 || ingress >= topo.node_count) throw InvalidInputError("unknown ingress node");
  const auto& path = topo.path[ingress];
  if (path.empty()) throw InvalidInputError("node is not an ingress (no forwarding path)");

  ServeChoice best;
  auto consider = [&](double c, Approximizer by, bool repo, std::int32_t pos) {
    if (std::isnan(c)) return;
    if (c < best.cost ||
        (c == best.cost && (pos < best.path_pos ||
                            (pos == best.path_pos && by.object < best.by.object)))) {
      best = ServeChoice{c, by, repo, pos};
    }
  };

  for (std::int32_t pos = 0; pos < std::ssize(path); ++pos) {
    const std::int32_t nd = path[pos];
    const double h = topo.hop_cost(ingress, nd);
    if (!(h < kInf)) continue;
    for (const auto& x : a.items) {
      if (x.node != nd) continue;
      consider(inst.space.approximation_cost(object, x.object) + h, x, false, pos);
    }
    for (const auto& s : inst.repository_seeds) {
      if (s.node != nd || s.object != object) continue;
      consider(h, s, true, pos);
    }
  }
  if (!(best.cost < kInf))
    throw UnservableRequestError(
        fmt("request (%d,%d) cannot be served by any on-path approximizer or repository", object, ingress));
  return best;
}

CostBreakdown expected_cost(const Instance& inst, const Allocation& a) {
  if (inst.demand.kind != Demand::Kind::Discrete)
    throw InvalidInputError("expected_cost requires discrete demand");
  CostBreakdown out;
  out.node_served_rate.assign(inst.topology.node_count, 0.0);
  out.per_request.reserve(inst.demand.entries.size());
  for (const auto& e : inst.demand.entries) {
    ServeChoice c = serve_cost(inst, e.object, e.ingress, a);
    const double h = inst.topology.hop_cost(e.ingress, c.by.node);
    out.total += e.rate * c.cost;
    out.retrieval += e.rate * h;
    out.approximation += e.rate * (c.cost - h);
    out.node_served_rate[c.by.node] += e.rate;
    out.per_request.push_back(c);
  }
  return out;
}

double caching_gain(const Instance& inst, const Allocation& a) {
  const double empty = expected_cost(inst, Allocation{}).total;
  if (!(empty < kInf)) throw InvalidInstanceError("empty-allocation cost is infinite");
  return empty - expected_cost(inst, a).total;
}

}  // namespace simcache
