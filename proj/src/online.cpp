#include "simcache/online.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace simcache {

namespace {

constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);

void check_config(const NetDuelConfig& config) {
  if (config.window < 1) throw InvalidInputError("netduel window must be at least 1");
  if (std::isnan(config.margin) || config.margin < 0.0)
    throw InvalidInputError("netduel margin must be >= 0");
  if (!config.per_node) throw InvalidInputError("netduel supports per-node duels only");
}

// Best and second-best serving option for one request under the live
// allocation, mirroring the evaluator's tie handling (repositories first,
// then path slots in order, strict improvement wins).
struct RequestView {
  double best = kInf;
  double second = kInf;
  std::size_t owner = PlacementEvaluator::kRepoOwner;  // slot index, or kRepoOwner
  bool indexed = false;  // true when backed by a demand entry
  std::size_t req = 0;   // demand row when indexed
};

bool repo_has(const DuelState& state, std::int32_t node, std::int32_t object) {
  const auto& objs = state.repo_objects[node];
  return std::binary_search(objs.begin(), objs.end(), object);
}

RequestView make_view(const DuelState& state, const RequestEvent& event) {
  const PlacementEvaluator& ev = state.eval;
  RequestView v;
  if (auto r = ev.find_request(event.object, event.ingress)) {
    v.indexed = true;
    v.req = *r;
    v.best = ev.best_cost(*r);
    v.second = ev.second_cost(*r);
    v.owner = ev.owner(*r);
    return v;
  }
  const Instance& inst = ev.instance();
  const auto& path = inst.topology.path[event.ingress];
  for (std::int32_t node : path) {
    if (!inst.topology.is_repository[node]) continue;
    if (!repo_has(state, node, event.object)) continue;
    const double c = inst.topology.hop_cost(event.ingress, node);
    if (c < v.best) v.best = c;
  }
  for (std::int32_t node : path) {
    const std::size_t end = ev.node_slot_end(node);
    for (std::size_t s = ev.node_slot_begin(node); s < end; ++s) {
      const std::int32_t stored = ev.slot_object(s);
      if (stored < 0) continue;
      const double c = inst.space.approximation_cost(event.object, stored) +
                       inst.topology.hop_cost(event.ingress, node);
      if (c < v.best) {
        v.second = v.best;
        v.best = c;
        v.owner = s;
      } else if (c < v.second) {
        v.second = c;
      }
    }
  }
  return v;
}

// Cost of serving the request with `object` stored at `node` (on-path only).
double challenger_cost(const PlacementEvaluator& ev, const RequestView& view,
                       const RequestEvent& event, std::int32_t object, std::int32_t node) {
  if (view.indexed) return ev.option_cost(view.req, object, node);
  const Instance& inst = ev.instance();
  return inst.space.approximation_cost(event.object, object) +
         inst.topology.hop_cost(event.ingress, node);
}

void cancel_challengers(DuelState& state, std::int32_t node, std::int32_t object) {
  const std::size_t end = state.eval.node_slot_end(node);
  for (std::size_t s = state.eval.node_slot_begin(node); s < end; ++s) {
    DuelSlot& d = state.duels[s];
    if (d.virtual_object == object) {
      d.virtual_object = -1;
      d.real_saving = 0.0;
      d.virtual_saving = 0.0;
    }
  }
}

// Recruits the requested object as a challenger: a free slot on the path is
// filled outright; otherwise the idle slot whose resident has saved the least
// so far takes the duel. No-op when the object already appears on the path.
void pair_challenger(DuelState& state, const RequestEvent& event, std::uint64_t idx) {
  PlacementEvaluator& ev = state.eval;
  const Instance& inst = ev.instance();
  const auto& path = inst.topology.path[event.ingress];

  for (std::int32_t node : path) {
    if (ev.node_contains(node, event.object)) return;
    const std::size_t end = ev.node_slot_end(node);
    for (std::size_t s = ev.node_slot_begin(node); s < end; ++s)
      if (state.duels[s].virtual_object == event.object) return;
  }

  for (std::int32_t node : path) {
    if (inst.topology.is_repository[node]) continue;
    if (!ev.free_slot(node)) continue;
    const std::size_t s = ev.commit_insert(event.object, node);
    state.duels[s] = DuelSlot{};
    cancel_challengers(state, node, event.object);
    return;
  }

  std::size_t pick = kNoSlot;
  for (std::int32_t node : path) {
    const std::size_t end = ev.node_slot_end(node);
    for (std::size_t s = ev.node_slot_begin(node); s < end; ++s) {
      if (state.duels[s].virtual_object >= 0) continue;
      if (pick == kNoSlot) {
        pick = s;
        continue;
      }
      const double ls = state.duels[s].lifetime_saving;
      const double pls = state.duels[pick].lifetime_saving;
      if (ls < pls) {
        pick = s;
      } else if (ls == pls) {
        const auto key = std::make_pair(ev.slot_node(s), ev.slot_object(s));
        const auto pkey = std::make_pair(ev.slot_node(pick), ev.slot_object(pick));
        if (key < pkey) pick = s;
      }
    }
  }
  if (pick == kNoSlot) return;
  DuelSlot& d = state.duels[pick];
  d.virtual_object = event.object;
  d.real_saving = 0.0;
  d.virtual_saving = 0.0;
  d.window_start = idx;
}

}  // namespace

DuelState netduel_init(const Instance& inst, const Allocation& initial) {
  DuelState state{PlacementEvaluator(inst, initial), {}, {}, 0};
  state.duels.assign(state.eval.slot_count(), DuelSlot{});
  state.repo_objects.resize(inst.topology.node_count);
  for (const auto& seed : inst.repository_seeds) state.repo_objects[seed.node].push_back(seed.object);
  for (auto& objs : state.repo_objects) std::sort(objs.begin(), objs.end());
  return state;
}

StepResult netduel_on_request(const NetDuelConfig& config, DuelState& state,
                              const RequestEvent& event) {
  check_config(config);
  PlacementEvaluator& ev = state.eval;
  const Instance& inst = ev.instance();
  if (event.object < 0 || event.object >= inst.space.object_count)
    throw InvalidInputError("request object out of range");
  if (event.ingress < 0 || event.ingress >= inst.topology.node_count)
    throw InvalidInputError("request ingress out of range");

  const std::uint64_t idx = state.requests_seen++;
  const RequestView view = make_view(state, event);
  if (!(view.best < kInf)) throw UnservableRequestError("request cannot be served");

  const auto& path = inst.topology.path[event.ingress];
  StepResult out;
  out.served.cost = view.best;
  if (view.owner == PlacementEvaluator::kRepoOwner) {
    out.served.from_repository = true;
    for (std::size_t pos = 0; pos < path.size(); ++pos) {
      const std::int32_t node = path[pos];
      if (!inst.topology.is_repository[node]) continue;
      if (inst.topology.hop_cost(event.ingress, node) != view.best) continue;
      if (!repo_has(state, node, event.object)) continue;
      out.served.by = {event.object, node};
      out.served.path_pos = static_cast<std::int32_t>(pos);
      break;
    }
  } else {
    const std::int32_t node = ev.slot_node(view.owner);
    out.served.by = {ev.slot_object(view.owner), node};
    for (std::size_t pos = 0; pos < path.size(); ++pos)
      if (path[pos] == node) {
        out.served.path_pos = static_cast<std::int32_t>(pos);
        break;
      }
  }

  // Credit the serving slot with the cost increase its loss would cause, and
  // every challenger on the path with the saving it would have contributed
  // against the allocation that lacks its paired resident.
  if (view.owner != PlacementEvaluator::kRepoOwner) {
    const double gain = view.second - view.best;
    DuelSlot& d = state.duels[view.owner];
    d.lifetime_saving += gain;
    if (d.virtual_object >= 0) d.real_saving += gain;
  }
  for (std::int32_t node : path) {
    const std::size_t end = ev.node_slot_end(node);
    for (std::size_t s = ev.node_slot_begin(node); s < end; ++s) {
      DuelSlot& d = state.duels[s];
      if (d.virtual_object < 0) continue;
      const double without = (view.owner == s) ? view.second : view.best;
      const double cand = challenger_cost(ev, view, event, d.virtual_object, node);
      if (cand < without) d.virtual_saving += without - cand;
    }
  }

  // Close the duel whose window just filled. Pairings happen one per request,
  // so window starts are distinct and at most one duel can be due.
  const std::uint64_t window = static_cast<std::uint64_t>(config.window);
  for (std::size_t s = 0; s < state.duels.size(); ++s) {
    DuelSlot& d = state.duels[s];
    if (d.virtual_object < 0) continue;
    if (idx < d.window_start + window) continue;
    if (d.virtual_saving > (1.0 + config.margin) * d.real_saving) {
      const std::int32_t node = ev.slot_node(s);
      const std::int32_t inserted = d.virtual_object;
      out.swap = SwapEvent{idx,      node,          ev.slot_object(s),
                           inserted, d.real_saving, d.virtual_saving};
      ev.commit_replace(inserted, s);
      state.duels[s] = DuelSlot{};
      cancel_challengers(state, node, inserted);
    } else {
      d.virtual_object = -1;
      d.real_saving = 0.0;
      d.virtual_saving = 0.0;
    }
    break;
  }

  if (config.rule == CandidateRule::Arrival) pair_challenger(state, event, idx);
  return out;
}

NetDuelRunResult netduel_run(const Instance& inst, const RequestTrace& trace,
                             const NetDuelConfig& config, const Allocation& initial) {
  check_config(config);
  if (trace.empty()) throw InvalidInputError("netduel_run needs a non-empty trace");
  DuelState state = netduel_init(inst, initial);
  NetDuelRunResult out;
  double acc = 0.0;
  std::int64_t in_bucket = 0;
  for (const RequestEvent& event : trace) {
    StepResult step = netduel_on_request(config, state, event);
    acc += step.served.cost;
    if (step.swap) out.swaps.push_back(*step.swap);
    if (++in_bucket == config.window) {
      out.window_cost.push_back(acc / static_cast<double>(in_bucket));
      acc = 0.0;
      in_bucket = 0;
    }
  }
  if (in_bucket > 0) out.window_cost.push_back(acc / static_cast<double>(in_bucket));
  out.allocation = state.eval.allocation();
  out.final_cost = state.eval.total_cost();
  return out;
}

}  // namespace simcache
