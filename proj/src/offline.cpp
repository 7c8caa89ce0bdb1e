#include "simcache/offline.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <random>
#include <string>

#include "simcache/evaluator.hpp"

namespace simcache {

namespace {

constexpr std::int64_t kSweepCap = 1'000'000;

std::vector<std::int32_t> slot_nodes(const Instance& inst) {
  std::vector<std::int32_t> out;
  for (std::int32_t j = 0; j < inst.topology.node_count; ++j) {
    if (!inst.topology.is_repository[j] && inst.topology.capacity[j] > 0) out.push_back(j);
  }
  return out;
}

std::vector<std::int64_t> free_budgets(const PlacementEvaluator& ev) {
  std::vector<std::int64_t> out(ev.instance().topology.node_count, 0);
  for (std::size_t s = 0; s < ev.slot_count(); ++s) {
    if (ev.slot_object(s) == PlacementEvaluator::kEmptySlot) ++out[ev.slot_node(s)];
  }
  return out;
}

struct BestMove {
  double delta = 0.0;
  std::int32_t node = -1;
  std::size_t slot = 0;
  bool found = false;
};

// Cheapest way to store `object` at `node` (ties keep the lowest slot).
BestMove best_move_at(PlacementEvaluator& ev, std::int32_t object, std::int32_t node) {
  BestMove best;
  if (!ev.covers(node)) return best;
  const auto scan = ev.scan_swaps(object, node);
  const std::size_t base = ev.node_slot_begin(node);
  for (std::size_t i = 0; i < scan.evict_delta.size(); ++i) {
    if (!best.found || scan.evict_delta[i] < best.delta) {
      best = {scan.evict_delta[i], node, base + i, true};
    }
  }
  return best;
}

LocalSwapResult run_local_swap(const Instance& inst, const Allocation& init,
                               const RequestTrace& requests, StopRule stop, std::uint64_t seed,
                               const AdmissionPredicate& admit) {
  PlacementEvaluator ev(inst, init);
  LocalSwapResult out;

  auto apply = [&](std::int32_t object, std::int32_t ingress, const BestMove& mv) {
    SwapTraceEntry e;
    e.iteration = static_cast<std::int64_t>(out.trace.size());
    e.request_object = object;
    e.request_ingress = ingress;
    e.placed = {object, mv.node};
    const std::int32_t old = ev.slot_object(mv.slot);
    if (old != PlacementEvaluator::kEmptySlot) e.replaced = Approximizer{old, mv.node};
    e.delta = mv.delta;
    ev.commit_replace(object, mv.slot);
    e.running_cost = ev.total_cost();
    out.trace.push_back(e);
  };

  std::vector<std::vector<std::int32_t>> path_caches(inst.topology.node_count);
  for (std::int32_t i = 0; i < inst.topology.node_count; ++i) {
    for (std::int32_t nd : inst.topology.path[i]) {
      if (!inst.topology.is_repository[nd] && inst.topology.capacity[nd] > 0) {
        path_caches[i].push_back(nd);
      }
    }
  }

  auto handle_request = [&](std::int32_t object, std::int32_t ingress) {
    BestMove best;
    for (std::int32_t j : path_caches[ingress]) {
      if (admit && !admit(object, j)) continue;
      BestMove mv = best_move_at(ev, object, j);
      if (mv.found && (!best.found || mv.delta < best.delta)) best = mv;
    }
    if (best.found && best.delta < -kSwapTol) apply(object, ingress, best);
  };

  if (!requests.empty()) {
    const std::int64_t budget = stop.kind == StopRule::Kind::Iters
                                    ? std::min<std::int64_t>(stop.limit, std::ssize(requests))
                                    : std::ssize(requests);
    for (std::int64_t t = 0; t < budget; ++t) {
      const auto& e = requests[t];
      if (e.object < 0 || e.object >= inst.space.object_count || e.ingress < 0 ||
          e.ingress >= inst.topology.node_count || inst.topology.path[e.ingress].empty()) {
        throw InvalidInputError("trace event " + std::to_string(t) +
                                " does not match the instance");
      }
      handle_request(e.object, e.ingress);
    }
  } else if (stop.kind == StopRule::Kind::Iters) {
    const auto& entries = inst.demand.entries;
    std::vector<double> cum(entries.size());
    double total = 0.0;
    for (std::size_t r = 0; r < entries.size(); ++r) cum[r] = (total += entries[r].rate);
    if (!(total > 0.0)) throw NoProgressError("demand has zero total rate; nothing to sample");
    std::mt19937_64 rng(seed);
    for (std::int64_t t = 0; t < stop.limit; ++t) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
      std::size_t r = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
      r = std::min(r, entries.size() - 1);
      handle_request(entries[r].object, entries[r].ingress);
    }
  }

  if (stop.kind != StopRule::Kind::Iters) {
    const std::int64_t sweep_budget = stop.kind == StopRule::Kind::Sweeps ? stop.limit : kSweepCap;
    while (out.sweeps < sweep_budget) {
      bool improved = false;
      for (std::int32_t j : ev.covered_nodes()) {
        for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
          if (admit && !admit(o, j)) continue;
          BestMove mv = best_move_at(ev, o, j);
          if (mv.found && mv.delta < -kSwapTol) {
            apply(o, -1, mv);
            improved = true;
          }
        }
      }
      ++out.sweeps;
      if (!improved) {
        out.converged = true;
        break;
      }
    }
    if (stop.kind == StopRule::Kind::Converged && !out.converged) {
      throw ConvergenceError("local swap did not converge within the sweep cap");
    }
  }

  out.allocation = ev.allocation();
  out.cost = ev.total_cost();
  return out;
}

}  // namespace

GreedyResult greedy_place(const Instance& inst) {
  PlacementEvaluator ev(inst);
  GreedyResult out;

  struct Cand {
    double gain = 0.0;
    std::int32_t node = -1;
    std::int32_t object = -1;
    std::uint64_t version = 0;
  };
  auto worse = [](const Cand& a, const Cand& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    if (a.node != b.node) return a.node > b.node;
    return a.object > b.object;
  };
  std::priority_queue<Cand, std::vector<Cand>, decltype(worse)> heap(worse);
  for (std::int32_t j : slot_nodes(inst)) {
    for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
      heap.push({ev.insertion_gain(o, j), j, o, 0});
    }
  }

  std::uint64_t version = 0;
  std::int64_t free_total = static_cast<std::int64_t>(ev.slot_count());
  double prev_gain = kInf;
  while (free_total > 0 && !heap.empty()) {
    Cand c = heap.top();
    heap.pop();
    if (!ev.free_slot(c.node)) continue;
    if (ev.node_contains(c.node, c.object)) continue;
    if (c.version != version) {
      c.gain = ev.insertion_gain(c.object, c.node);
      c.version = version;
      heap.push(c);
      continue;
    }
    ev.commit_insert(c.object, c.node);
    ++version;
    --free_total;
    if (c.gain > prev_gain + 1e-9) {
      throw Error("greedy marginal gain increased between steps");
    }
    prev_gain = c.gain;
    out.steps.push_back({static_cast<std::int64_t>(out.steps.size()),
                         {c.object, c.node},
                         c.gain,
                         free_budgets(ev)});
  }
  out.complete = free_total == 0;
  out.allocation = ev.allocation();
  out.cost = ev.total_cost();
  return out;
}

LocalSwapResult local_swap(const Instance& inst, const Allocation& init,
                           const RequestTrace& requests, StopRule stop, std::uint64_t seed) {
  return run_local_swap(inst, init, requests, stop, seed, nullptr);
}

LocalSwapResult constrained_local_swap(const Instance& inst, const AdmissionPredicate& admit,
                                       const Allocation& init, const RequestTrace& requests,
                                       StopRule stop, std::uint64_t seed) {
  if (!admit) throw InvalidInputError("constrained_local_swap needs an admission predicate");
  for (std::int32_t j : slot_nodes(inst)) {
    std::int64_t admissible = 0;
    for (std::int32_t o = 0; o < inst.space.object_count && admissible < inst.topology.capacity[j];
         ++o) {
      if (admit(o, j)) ++admissible;
    }
    if (admissible < inst.topology.capacity[j]) {
      throw InvalidConstraintError("cache node " + std::to_string(j) + " admits only " +
                                   std::to_string(admissible) + " objects for capacity " +
                                   std::to_string(inst.topology.capacity[j]));
    }
  }
  return run_local_swap(inst, init, requests, stop, seed, admit);
}

LocalOptimality is_locally_optimal(const Instance& inst, const Allocation& a) {
  PlacementEvaluator ev(inst, a);
  for (std::int32_t j : ev.covered_nodes()) {
    for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
      BestMove mv = best_move_at(ev, o, j);
      if (mv.found && mv.delta < -kSwapTol) {
        SwapWitness w;
        w.place = {o, j};
        const std::int32_t old = ev.slot_object(mv.slot);
        if (old != PlacementEvaluator::kEmptySlot) w.evicted = Approximizer{old, j};
        w.delta = mv.delta;
        return {false, w};
      }
    }
  }
  return {true, std::nullopt};
}

CascadeResult cascade_place(const Instance& inst) {
  CascadeResult out;
  out.greedy = greedy_place(inst);
  auto polished = local_swap(inst, out.greedy.allocation, {}, StopRule::converged());
  out.allocation = std::move(polished.allocation);
  out.swaps = std::move(polished.trace);
  out.cost = polished.cost;
  return out;
}

BruteForceResult brute_force_optimal(const Instance& inst, BruteForceLimits limits) {
  PlacementEvaluator ev(inst);
  const std::vector<std::int32_t>& nodes = ev.covered_nodes();
  const std::int64_t O = inst.space.object_count;

  double combos = 1.0;
  std::vector<std::int64_t> take(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    take[i] = std::min<std::int64_t>(inst.topology.capacity[nodes[i]], O);
    double c = 1.0;
    for (std::int64_t t = 1; t <= take[i]; ++t) {
      c = c * static_cast<double>(O - take[i] + t) / static_cast<double>(t);
    }
    combos *= c;
    if (combos > 1e18) break;
  }
  if (combos > static_cast<double>(limits.max_combinations)) {
    throw CombinatorialSizeError("exhaustive search needs about " +
                                 std::to_string(static_cast<std::uint64_t>(
                                     std::min(combos, 1e18))) +
                                 " allocations; cap is " +
                                 std::to_string(limits.max_combinations));
  }

  BruteForceResult out;
  out.cost = kInf;

  std::function<void(std::size_t)> per_node = [&](std::size_t ni) {
    if (ni == nodes.size()) {
      ++out.combinations;
      const double c = ev.total_cost();
      if (c < out.cost) {
        out.cost = c;
        out.allocation = ev.allocation();
      }
      return;
    }
    const std::int32_t node = nodes[ni];
    std::function<void(std::int32_t, std::int64_t)> choose = [&](std::int32_t from,
                                                                 std::int64_t left) {
      if (left == 0) {
        per_node(ni + 1);
        return;
      }
      for (std::int32_t o = from; o <= static_cast<std::int32_t>(O - left); ++o) {
        const std::size_t s = ev.commit_insert(o, node);
        choose(o + 1, left - 1);
        ev.remove(s);
      }
    };
    choose(0, take[ni]);
  };
  per_node(0);
  return out;
}

}  // namespace simcache
