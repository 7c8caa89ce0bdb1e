#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "simcache/model.hpp"

namespace simcache {

// Swaps smaller than this are treated as ties so float noise cannot cycle.
inline constexpr double kSwapTol = 1e-12;

struct GreedyStep {
  std::int64_t step = 0;
  Approximizer chosen{-1, -1};
  double marginal_gain = 0.0;
  std::vector<std::int64_t> remaining_budget;  // free slots per node after the step
};

struct GreedyResult {
  Allocation allocation;
  std::vector<GreedyStep> steps;
  bool complete = true;  // false when candidates ran out before capacity
  double cost = 0.0;
};

// Submodular greedy under per-node capacities, accelerated with a lazy
// priority queue of stale marginal gains. Equal gains break toward the
// lowest (node id, object id), which makes runs permutation-invariant.
GreedyResult greedy_place(const Instance& inst);

struct SwapTraceEntry {
  std::int64_t iteration = 0;
  std::int32_t request_object = -1;
  std::int32_t request_ingress = -1;  // -1 when a convergence sweep triggered it
  Approximizer placed{-1, -1};
  std::optional<Approximizer> replaced;  // empty when a free slot was used
  double delta = 0.0;
  double running_cost = 0.0;
};

struct StopRule {
  enum class Kind { Converged, Sweeps, Iters };
  Kind kind = Kind::Converged;
  std::int64_t limit = 0;

  static StopRule converged() { return {Kind::Converged, 0}; }
  static StopRule sweeps(std::int64_t n) { return {Kind::Sweeps, n}; }
  static StopRule iters(std::int64_t n) { return {Kind::Iters, n}; }
};

struct LocalSwapResult {
  Allocation allocation;
  std::vector<SwapTraceEntry> trace;
  bool converged = false;  // a full sweep found no improving move
  std::int64_t sweeps = 0;
  double cost = 0.0;
};

// Iterative improvement by single-object swaps.
//
// With a non-empty `requests` trace, each event may swap the requested object
// against the cheapest eviction along its forwarding path (the online-style
// dynamics); an empty trace with StopRule::iters(n) emulates n such requests
// sampled proportionally to the demand rates under `seed`. Convergence mode
// (and the tail of trace mode) runs deterministic sweeps over every
// (cache, candidate object) pair until none improves, so the result is
// certified locally optimal.
LocalSwapResult local_swap(const Instance& inst, const Allocation& init,
                           const RequestTrace& requests, StopRule stop, std::uint64_t seed = 0);

using AdmissionPredicate = std::function<bool(std::int32_t object, std::int32_t node)>;

// local_swap with candidate insertions filtered per cache; throws
// InvalidConstraintError when some cache admits fewer objects than its
// capacity. Optimality is certified within the admissible neighborhood.
LocalSwapResult constrained_local_swap(const Instance& inst, const AdmissionPredicate& admit,
                                       const Allocation& init, const RequestTrace& requests,
                                       StopRule stop, std::uint64_t seed = 0);

struct SwapWitness {
  Approximizer place{-1, -1};
  std::optional<Approximizer> evicted;
  double delta = 0.0;
};

struct LocalOptimality {
  bool optimal = true;
  std::optional<SwapWitness> witness;
};

// True iff no single-object replacement (or free-slot insertion) at a single
// cache strictly decreases the expected cost; otherwise returns an improving
// move as witness.
LocalOptimality is_locally_optimal(const Instance& inst, const Allocation& a);

struct CascadeResult {
  Allocation allocation;
  GreedyResult greedy;
  std::vector<SwapTraceEntry> swaps;
  double cost = 0.0;
};

// greedy_place followed by local_swap to convergence: locally optimal while
// keeping greedy's approximation guarantee.
CascadeResult cascade_place(const Instance& inst);

struct BruteForceLimits {
  std::uint64_t max_combinations = 10'000'000;
};

struct BruteForceResult {
  Allocation allocation;
  double cost = 0.0;
  std::uint64_t combinations = 0;
};

// Exhaustive optimum over all allocations filling every demand-visible cache
// to capacity; refuses with CombinatorialSizeError beyond the configured cap.
// Equal costs keep the lexicographically smallest allocation.
BruteForceResult brute_force_optimal(const Instance& inst, BruteForceLimits limits = {});

}  // namespace simcache
