#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "simcache/evaluator.hpp"
#include "simcache/model.hpp"

namespace simcache {

// Online slot management by shadow duels. Each cache slot may run at most one
// duel: the resident object against a virtual challenger that exists as
// metadata only and never serves traffic. Every request credits both sides
// with the saving they provide (or would provide) over the next-best serving
// option; once the duel has observed a full window of requests the challenger
// takes the slot iff its accumulated saving beats the resident's by the
// configured margin, otherwise it is dropped. Challengers are recruited from
// the request stream itself, so the policy needs no rate estimates and no
// randomness.

enum class CandidateRule {
  Arrival,  // challenge with the object of the triggering request
  None,     // never recruit challengers; the allocation never changes
};

struct NetDuelConfig {
  std::int64_t window = 500;  // requests a duel observes before it is decided
  double margin = 0.05;       // challenger must win by this factor; kInf freezes the allocation
  CandidateRule rule = CandidateRule::Arrival;
  bool per_node = true;       // duels are scoped to their slot's node (the only supported mode)
};

struct DuelSlot {
  std::int32_t virtual_object = -1;  // challenger, -1 when the slot is idle
  double real_saving = 0.0;          // resident's saving since the duel started
  double virtual_saving = 0.0;       // challenger's counterfactual saving
  std::uint64_t window_start = 0;    // request index at which the duel was paired
  double lifetime_saving = 0.0;      // resident's saving since it entered the slot
};

struct SwapEvent {
  std::uint64_t request_index = 0;
  std::int32_t node = -1;
  std::int32_t evicted = -1;
  std::int32_t inserted = -1;
  double real_saving = 0.0;
  double virtual_saving = 0.0;
};

// Policy state: incremental cost bookkeeping for the live allocation plus one
// duel record per slot (parallel to the evaluator's slot table).
struct DuelState {
  PlacementEvaluator eval;
  std::vector<DuelSlot> duels;
  std::vector<std::vector<std::int32_t>> repo_objects;  // per node, sorted seed objects
  std::uint64_t requests_seen = 0;

  Allocation allocation() const { return eval.allocation(); }
};

struct StepResult {
  ServeChoice served;
  std::optional<SwapEvent> swap;  // at most one duel can close per request
};

DuelState netduel_init(const Instance& inst, const Allocation& initial = {});

// Serves one request against the live allocation, credits every active duel
// on the ingress path, closes the duel whose window just filled (applying or
// discarding the challenger), and finally recruits a new challenger for the
// requested object if it is not already resident or challenging on the path.
StepResult netduel_on_request(const NetDuelConfig& config, DuelState& state,
                              const RequestEvent& event);

struct NetDuelRunResult {
  Allocation allocation;            // final placement
  std::vector<double> window_cost;  // mean serve cost per window of requests (tail may be shorter)
  std::vector<SwapEvent> swaps;
  double final_cost = 0.0;  // expected cost of the final placement under the instance demand
};

NetDuelRunResult netduel_run(const Instance& inst, const RequestTrace& trace,
                             const NetDuelConfig& config, const Allocation& initial = {});

}  // namespace simcache
