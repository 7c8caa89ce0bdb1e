#pragma once

// Shared fixtures for the test suite: a small hand-checkable catalog, brute
// force enumeration oracles, and random instance generators.
//
// The five-object fixture is a substitution chain: objects 0..4 where
// adjacent pairs (1,2), (2,3) are perfect substitutes (cost 0), pairs (0,1),
// (3,4) are substitutable at cost eps, and everything else is unservable.
// Requests arrive with rates lam[0..4]. All instances are expressible with
// exact integer costs/rates through the explicit-parameter constructors, so
// double arithmetic on them is exact.

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "simcache/model.hpp"

namespace simtest {

using namespace simcache;

inline ObjectSpace chain_catalog(double eps) {
  auto s = ObjectSpace::matrix(5);
  auto set = [&](int a, int b, double v) {
    s.cost[a * 5 + b] = v;
    s.cost[b * 5 + a] = v;
  };
  set(1, 2, 0.0);
  set(2, 3, 0.0);
  set(0, 1, eps);
  set(3, 4, eps);
  return s;
}

// Single cache of capacity k at node 0 (the ingress), repository at node 1
// reachable at cost hs.
inline Instance toy_single(double eps, double hs, std::array<double, 5> lam, std::int64_t k = 2) {
  Instance inst;
  inst.space = chain_catalog(eps);
  inst.topology = Topology::make(2);
  inst.topology.capacity = {k, 0};
  inst.topology.is_repository = {0, 1};
  inst.topology.set_hop(0, 1, hs);
  inst.topology.path[0] = {0, 1};
  for (std::int32_t o = 0; o < 5; ++o) {
    inst.demand.entries.push_back({o, 0, lam[o]});
    inst.repository_seeds.push_back({o, 1});
  }
  return inst;
}

// Two caches of capacity 1: node 0 (ingress), node 1 (parent, hop h12),
// repository at node 2 (hop h12 + hs).
inline Instance toy_tandem(double eps, double h12, double hs, std::array<double, 5> lam) {
  Instance inst;
  inst.space = chain_catalog(eps);
  inst.topology = Topology::make(3);
  inst.topology.capacity = {1, 1, 0};
  inst.topology.is_repository = {0, 0, 1};
  inst.topology.set_hop(0, 1, h12);
  inst.topology.set_hop(0, 2, h12 + hs);
  inst.topology.set_hop(1, 2, hs);
  inst.topology.path[0] = {0, 1, 2};
  inst.topology.path[1] = {1, 2};
  for (std::int32_t o = 0; o < 5; ++o) {
    inst.demand.entries.push_back({o, 0, lam[o]});
    inst.repository_seeds.push_back({o, 2});
  }
  return inst;
}

// Exhaustive enumeration over all allocations that fill every cache exactly
// to capacity. Returns the minimum cost and every allocation achieving it.
struct EnumResult {
  double best = kInf;
  std::vector<Allocation> argmin;
};

inline void enum_rec(const Instance& inst, std::vector<std::int32_t>& caches, std::size_t ci,
                     std::int32_t next_obj, Allocation& acc, EnumResult& out) {
  if (ci == caches.size()) {
    double c = expected_cost(inst, acc).total;
    if (c < out.best) {
      out.best = c;
      out.argmin.clear();
    }
    if (c == out.best) out.argmin.push_back(acc);
    return;
  }
  const std::int32_t node = caches[ci];
  std::int64_t placed = 0;
  for (const auto& x : acc.items)
    if (x.node == node) ++placed;
  if (placed == inst.topology.capacity[node]) {
    enum_rec(inst, caches, ci + 1, 0, acc, out);
    return;
  }
  for (std::int32_t o = next_obj; o < inst.space.object_count; ++o) {
    acc.insert({o, node});
    enum_rec(inst, caches, ci, o + 1, acc, out);
    acc.erase({o, node});
  }
}

inline EnumResult enumerate_optimal(const Instance& inst) {
  std::vector<std::int32_t> caches;
  for (std::int32_t j = 0; j < inst.topology.node_count; ++j)
    if (!inst.topology.is_repository[j] && inst.topology.capacity[j] > 0) caches.push_back(j);
  EnumResult out;
  Allocation acc;
  enum_rec(inst, caches, 0, 0, acc, out);
  return out;
}

// Every single-replacement neighbor of `a` (one stored object replaced by a
// different catalog object at the same node).
inline std::vector<Allocation> neighbors(const Instance& inst, const Allocation& a) {
  std::vector<Allocation> out;
  for (const auto& x : a.items) {
    for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
      Approximizer cand{o, x.node};
      if (a.contains(cand)) continue;
      Allocation b = a;
      b.erase(x);
      b.insert(cand);
      out.push_back(b);
    }
  }
  return out;
}

struct RandomInstanceOptions {
  std::int64_t min_objects = 3, max_objects = 12;
  int max_caches = 3;
  std::int64_t max_capacity = 2;
  double p_unservable = 0.25;
  bool second_ingress = true;
};

// Random chain topology (caches in a row, repository last) with integer
// dissimilarities and rates so that expected costs are exact in doubles.
inline Instance random_matrix_instance(std::mt19937_64& rng, RandomInstanceOptions opt = {}) {
  auto u = [&rng](std::int64_t lo, std::int64_t hi) {
    return static_cast<std::int64_t>(lo + rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  Instance inst;
  const std::int64_t O = u(opt.min_objects, opt.max_objects);
  inst.space = ObjectSpace::matrix(O);
  for (std::int64_t i = 0; i < O; ++i)
    for (std::int64_t j = 0; j < O; ++j) {
      if (i == j) continue;
      const bool servable = (rng() % 1000) >= static_cast<std::uint64_t>(opt.p_unservable * 1000);
      inst.space.cost[i * O + j] = servable ? static_cast<double>(u(0, 9)) : kInf;
    }

  const int caches = static_cast<int>(u(1, opt.max_caches));
  const std::int64_t n = caches + 1;
  inst.topology = Topology::make(n);
  for (int j = 0; j < caches; ++j) inst.topology.capacity[j] = u(1, opt.max_capacity);
  inst.topology.is_repository[n - 1] = 1;
  // Strictly increasing hop costs along the chain, from every node.
  std::vector<double> depth(n, 0.0);
  for (std::int64_t j = 1; j < n; ++j) depth[j] = depth[j - 1] + static_cast<double>(u(1, 5));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      inst.topology.set_hop(i, j, j >= i ? depth[j] - depth[i] : kInf);
  inst.topology.path[0].clear();
  for (std::int32_t j = 0; j < n; ++j) inst.topology.path[0].push_back(j);
  bool two_ingresses = opt.second_ingress && caches >= 2 && (rng() & 1);
  if (two_ingresses)
    for (std::int32_t j = 1; j < n; ++j) inst.topology.path[1].push_back(j);

  for (std::int32_t o = 0; o < O; ++o) inst.repository_seeds.push_back({o, static_cast<std::int32_t>(n - 1)});
  for (std::int32_t o = 0; o < O; ++o) {
    inst.demand.entries.push_back({o, 0, static_cast<double>(u(1, 9))});
    if (two_ingresses && (rng() & 1))
      inst.demand.entries.push_back({o, 1, static_cast<double>(u(1, 9))});
  }
  return inst;
}

// Uniformly random allocation filling every cache to capacity.
inline Allocation random_full_allocation(const Instance& inst, std::mt19937_64& rng) {
  Allocation a;
  for (std::int32_t j = 0; j < inst.topology.node_count; ++j) {
    if (inst.topology.is_repository[j]) continue;
    std::vector<std::int32_t> objs(inst.space.object_count);
    for (std::int32_t o = 0; o < std::ssize(objs); ++o) objs[o] = o;
    std::shuffle(objs.begin(), objs.end(), rng);
    for (std::int64_t t = 0; t < inst.topology.capacity[j]; ++t) a.insert({objs[t], j});
  }
  return a;
}

}  // namespace simtest
