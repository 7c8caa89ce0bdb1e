#include "simcache/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "simcache/kernels.hpp"

namespace simcache {

namespace {

constexpr std::uint64_t kTrueUpEvery = 1024;

std::uint64_t request_key(std::int32_t object, std::int32_t ingress) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(object)) << 32) |
         static_cast<std::uint32_t>(ingress);
}

}  // namespace

PlacementEvaluator::PlacementEvaluator(const Instance& inst, const Allocation& init)
    : inst_(&inst) {
  validate_instance(inst);
  if (inst.demand.kind != Demand::Kind::Discrete) {
    throw InvalidInstanceError("placement evaluator requires discrete demand");
  }
  const auto& topo = inst.topology;
  const auto& space = inst.space;
  const auto& entries = inst.demand.entries;
  const std::size_t R = entries.size();

  std::vector<std::uint32_t> order(R);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (entries[a].ingress != entries[b].ingress) return entries[a].ingress < entries[b].ingress;
    return entries[a].object < entries[b].object;
  });

  rate_.resize(R);
  repo_cost_.assign(R, kInf);
  best_.assign(R, 0.0);
  second_.assign(R, 0.0);
  cand_.assign(R, 0.0);
  req_object_.resize(R);
  owner_.assign(R, kRepoOwner);
  second_owner_.assign(R, kRepoOwner);
  block_of_.resize(R);
  req_index_.reserve(R * 2);
  for (std::size_t r = 0; r < R; ++r) {
    const auto& e = entries[order[r]];
    rate_[r] = e.rate;
    req_object_[r] = e.object;
    if (blocks_.empty() || blocks_.back().ingress != e.ingress) {
      blocks_.push_back({e.ingress, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r)});
    }
    blocks_.back().end = static_cast<std::uint32_t>(r + 1);
    block_of_[r] = static_cast<std::uint32_t>(blocks_.size() - 1);
    req_index_.emplace(request_key(e.object, e.ingress), static_cast<std::uint32_t>(r));
  }

  if (space.kind == ObjectSpace::Kind::Points) {
    if (space.metric == Metric::Norm1 && space.dim == 2) {
      xs_.resize(R);
      ys_.resize(R);
      for (std::size_t r = 0; r < R; ++r) {
        const double* p = space.point(req_object_[r]);
        xs_[r] = p[0];
        ys_[r] = p[1];
      }
    } else if (space.metric == Metric::Norm2) {
      dims_.resize(static_cast<std::size_t>(space.dim) * R);
      for (std::size_t r = 0; r < R; ++r) {
        const double* p = space.point(req_object_[r]);
        for (std::int64_t d = 0; d < space.dim; ++d) {
          dims_[static_cast<std::size_t>(d) * R + r] = p[d];
        }
      }
    }
  }

  slot_begin_.assign(topo.node_count + 1, 0);
  for (std::int64_t n = 0; n < topo.node_count; ++n) {
    const std::int64_t cap = topo.is_repository[n] ? 0 : topo.capacity[n];
    slot_begin_[n + 1] = slot_begin_[n] + static_cast<std::size_t>(cap);
  }
  slot_obj_.assign(slot_begin_.back(), kEmptySlot);
  slot_node_.resize(slot_obj_.size());
  for (std::int64_t n = 0; n < topo.node_count; ++n) {
    for (std::size_t s = slot_begin_[n]; s < slot_begin_[n + 1]; ++s) {
      slot_node_[s] = static_cast<std::int32_t>(n);
    }
  }
  removal_loss_.assign(slot_obj_.size(), 0.0);

  covered_.resize(topo.node_count);
  for (std::uint32_t b = 0; b < blocks_.size(); ++b) {
    for (std::int32_t node : topo.path[blocks_[b].ingress]) {
      if (slot_begin_[node] == slot_begin_[node + 1]) continue;
      covered_[node].push_back({b, topo.hop_cost(blocks_[b].ingress, node)});
    }
  }
  for (std::int64_t n = 0; n < topo.node_count; ++n) {
    if (!covered_[n].empty()) covered_nodes_.push_back(static_cast<std::int32_t>(n));
  }

  // Repositories answer only exact copies they hold (mirrors serve_cost).
  std::vector<std::unordered_set<std::int32_t>> seeded(topo.node_count);
  for (const auto& s : inst.repository_seeds) seeded[s.node].insert(s.object);
  for (const auto& b : blocks_) {
    for (std::uint32_t r = b.begin; r < b.end; ++r) {
      double bestc = kInf;
      for (std::int32_t node : topo.path[b.ingress]) {
        if (!topo.is_repository[node]) continue;
        const double h = topo.hop_cost(b.ingress, node);
        if (h < bestc && seeded[node].count(req_object_[r]) != 0) bestc = h;
      }
      repo_cost_[r] = bestc;
    }
  }

  validate_allocation(inst, init);
  for (const auto& item : init.items) {
    auto slot = free_slot(item.node);
    if (!slot) throw InvalidInstanceError("allocation overfills node " + std::to_string(item.node));
    slot_obj_[*slot] = item.object;
  }
  rebuild();
}

std::optional<std::size_t> PlacementEvaluator::free_slot(std::int32_t node) const {
  for (std::size_t s = slot_begin_[node]; s < slot_begin_[node + 1]; ++s) {
    if (slot_obj_[s] == kEmptySlot) return s;
  }
  return std::nullopt;
}

bool PlacementEvaluator::node_contains(std::int32_t node, std::int32_t object) const {
  for (std::size_t s = slot_begin_[node]; s < slot_begin_[node + 1]; ++s) {
    if (slot_obj_[s] == object) return true;
  }
  return false;
}

std::optional<std::size_t> PlacementEvaluator::find_request(std::int32_t object,
                                                            std::int32_t ingress) const {
  auto it = req_index_.find(request_key(object, ingress));
  if (it == req_index_.end()) return std::nullopt;
  return static_cast<std::size_t>(it->second);
}

void PlacementEvaluator::check_object(std::int32_t object) const {
  if (object < 0 || object >= inst_->space.object_count) {
    throw InvalidInputError("object id " + std::to_string(object) + " out of range");
  }
}

void PlacementEvaluator::check_cache_node(std::int32_t node) const {
  if (node < 0 || node >= inst_->topology.node_count ||
      slot_begin_[node] == slot_begin_[node + 1]) {
    throw InvalidInputError("node " + std::to_string(node) + " has no cache slots");
  }
}

double PlacementEvaluator::candidate_one(std::size_t r, std::int32_t object, double hop) const {
  const auto& space = inst_->space;
  if (space.kind == ObjectSpace::Kind::Matrix) {
    return space.cost[static_cast<std::size_t>(req_object_[r]) * space.object_count + object] + hop;
  }
  double out;
  if (space.metric == Metric::Norm1 && space.dim == 2) {
    const double* p = space.point(object);
    kern::ops().l1_cost_2d(&xs_[r], &ys_[r], 1, p[0], p[1], space.period, space.gamma, hop, &out);
    return out;
  }
  if (space.metric == Metric::Norm2) {
    kern::ops().l2_cost_soa(dims_.data() + r, rate_.size(), static_cast<std::size_t>(space.dim), 1,
                            space.point(object), space.gamma, hop, &out);
    return out;
  }
  return space.approximation_cost(req_object_[r], object) + hop;
}

void PlacementEvaluator::fill_candidate(std::int32_t object, std::int32_t node) {
  const auto& space = inst_->space;
  const auto& ko = kern::ops();
  const std::size_t R = rate_.size();
  for (const auto& cb : covered_[node]) {
    const auto& b = blocks_[cb.block];
    const std::size_t len = b.end - b.begin;
    if (space.kind == ObjectSpace::Kind::Matrix) {
      const std::size_t N = static_cast<std::size_t>(space.object_count);
      for (std::uint32_t r = b.begin; r < b.end; ++r) {
        cand_[r] = space.cost[static_cast<std::size_t>(req_object_[r]) * N + object] + cb.hop;
      }
    } else if (space.metric == Metric::Norm1 && space.dim == 2) {
      const double* p = space.point(object);
      ko.l1_cost_2d(xs_.data() + b.begin, ys_.data() + b.begin, len, p[0], p[1], space.period,
                    space.gamma, cb.hop, cand_.data() + b.begin);
    } else if (space.metric == Metric::Norm2) {
      ko.l2_cost_soa(dims_.data() + b.begin, R, static_cast<std::size_t>(space.dim), len,
                     space.point(object), space.gamma, cb.hop, cand_.data() + b.begin);
    } else {
      for (std::uint32_t r = b.begin; r < b.end; ++r) {
        cand_[r] = space.approximation_cost(req_object_[r], object) + cb.hop;
      }
    }
  }
}

double PlacementEvaluator::option_cost(std::size_t r, std::int32_t object,
                                       std::int32_t node) const {
  check_object(object);
  if (node < 0 || node >= inst_->topology.node_count) {
    throw InvalidInputError("node id " + std::to_string(node) + " out of range");
  }
  for (const auto& cb : covered_[node]) {
    if (cb.block == block_of_[r]) return candidate_one(r, object, cb.hop);
  }
  return kInf;
}

void PlacementEvaluator::rescan_into(std::size_t r, double& best, std::size_t& owner,
                                     double& second, std::size_t& sowner) const {
  best = repo_cost_[r];
  owner = kRepoOwner;
  second = kInf;
  sowner = kRepoOwner;
  const auto& b = blocks_[block_of_[r]];
  for (std::int32_t node : inst_->topology.path[b.ingress]) {
    const std::size_t sb = slot_begin_[node], se = slot_begin_[node + 1];
    if (sb == se) continue;
    const double h = inst_->topology.hop_cost(b.ingress, node);
    for (std::size_t s = sb; s < se; ++s) {
      if (slot_obj_[s] == kEmptySlot) continue;
      const double c = candidate_one(r, slot_obj_[s], h);
      if (c < best) {
        second = best;
        sowner = owner;
        best = c;
        owner = s;
      } else if (c < second) {
        second = c;
        sowner = s;
      }
    }
  }
}

void PlacementEvaluator::rescan(std::size_t r) {
  double nb, ns;
  std::size_t no, nso;
  rescan_into(r, nb, no, ns, nso);
  set_state(r, nb, no, ns, nso);
}

void PlacementEvaluator::set_state(std::size_t r, double best, std::size_t owner, double second,
                                   std::size_t second_owner) {
  const double ob = best_[r], os = second_[r];
  const std::size_t oo = owner_[r], oso = second_owner_[r];
  if (best == ob && owner == oo && second == os && second_owner == oso) return;
  if (oo != kRepoOwner) removal_loss_[oo] -= rate_[r] * (os - ob);
  best_[r] = best;
  owner_[r] = owner;
  second_[r] = second;
  second_owner_[r] = second_owner;
  total_cost_ += rate_[r] * (best - ob);
  if (owner != kRepoOwner) removal_loss_[owner] += rate_[r] * (second - best);
}

void PlacementEvaluator::rebuild() {
  std::fill(removal_loss_.begin(), removal_loss_.end(), 0.0);
  total_cost_ = 0.0;
  for (std::size_t r = 0; r < rate_.size(); ++r) {
    double nb, ns;
    std::size_t no, nso;
    rescan_into(r, nb, no, ns, nso);
    best_[r] = nb;
    owner_[r] = no;
    second_[r] = ns;
    second_owner_[r] = nso;
    total_cost_ += rate_[r] * nb;
    if (no != kRepoOwner) removal_loss_[no] += rate_[r] * (ns - nb);
  }
}

double PlacementEvaluator::insertion_gain(std::int32_t object, std::int32_t node) {
  check_object(object);
  check_cache_node(node);
  if (covered_[node].empty()) return 0.0;
  fill_candidate(object, node);
  const auto& ko = kern::ops();
  double gain = 0.0;
  for (const auto& cb : covered_[node]) {
    const auto& b = blocks_[cb.block];
    gain += ko.positive_gain(rate_.data() + b.begin, best_.data() + b.begin,
                             cand_.data() + b.begin, b.end - b.begin);
  }
  return gain;
}

PlacementEvaluator::SwapScan PlacementEvaluator::scan_swaps(std::int32_t object,
                                                            std::int32_t node) {
  check_object(object);
  check_cache_node(node);
  const std::size_t sb = slot_begin_[node], se = slot_begin_[node + 1];
  SwapScan out;
  out.evict_delta.assign(se - sb, 0.0);
  if (covered_[node].empty()) return out;
  fill_candidate(object, node);
  const auto& ko = kern::ops();
  double gain = 0.0;
  for (const auto& cb : covered_[node]) {
    const auto& b = blocks_[cb.block];
    gain += ko.positive_gain(rate_.data() + b.begin, best_.data() + b.begin,
                             cand_.data() + b.begin, b.end - b.begin);
  }
  out.insert_gain = gain;
  for (const auto& cb : covered_[node]) {
    const auto& b = blocks_[cb.block];
    for (std::uint32_t r = b.begin; r < b.end; ++r) {
      const std::size_t s = owner_[r];
      if (s >= sb && s < se) {
        out.evict_delta[s - sb] +=
            rate_[r] * (std::min(cand_[r], second_[r]) - std::min(cand_[r], best_[r]));
      }
    }
  }
  for (double& d : out.evict_delta) d -= gain;
  return out;
}

void PlacementEvaluator::apply_candidate(std::size_t slot) {
  const std::int32_t node = slot_node_[slot];
  for (const auto& cb : covered_[node]) {
    const auto& b = blocks_[cb.block];
    for (std::uint32_t r = b.begin; r < b.end; ++r) {
      const double c = cand_[r];
      if (owner_[r] == slot) {
        if (c < second_[r]) {
          set_state(r, c, slot, second_[r], second_owner_[r]);
        } else {
          rescan(r);
        }
      } else if (second_owner_[r] == slot) {
        if (c < best_[r]) {
          set_state(r, c, slot, best_[r], owner_[r]);
        } else {
          rescan(r);
        }
      } else {
        if (c < best_[r]) {
          set_state(r, c, slot, best_[r], owner_[r]);
        } else if (c < second_[r]) {
          set_state(r, best_[r], owner_[r], c, slot);
        }
      }
    }
  }
}

std::size_t PlacementEvaluator::commit_insert(std::int32_t object, std::int32_t node) {
  check_cache_node(node);
  auto slot = free_slot(node);
  if (!slot) throw InvalidInputError("no free slot at node " + std::to_string(node));
  commit_replace(object, *slot);
  return *slot;
}

void PlacementEvaluator::commit_replace(std::int32_t object, std::size_t slot) {
  if (slot >= slot_obj_.size()) throw InvalidInputError("slot out of range");
  check_object(object);
  if (slot_obj_[slot] == object) return;
  const std::int32_t node = slot_node_[slot];
  if (node_contains(node, object)) {
    throw InvalidInputError("object " + std::to_string(object) + " already stored at node " +
                            std::to_string(node));
  }
  if (covered_[node].empty()) {
    slot_obj_[slot] = object;
    ++mutations_;
    return;
  }
  fill_candidate(object, node);
  slot_obj_[slot] = object;
  apply_candidate(slot);
  ++mutations_;
  maybe_trueup();
}

void PlacementEvaluator::remove(std::size_t slot) {
  if (slot >= slot_obj_.size()) throw InvalidInputError("slot out of range");
  if (slot_obj_[slot] == kEmptySlot) return;
  slot_obj_[slot] = kEmptySlot;
  const std::int32_t node = slot_node_[slot];
  for (const auto& cb : covered_[node]) {
    const auto& b = blocks_[cb.block];
    for (std::uint32_t r = b.begin; r < b.end; ++r) {
      if (owner_[r] == slot || second_owner_[r] == slot) rescan(r);
    }
  }
  ++mutations_;
  maybe_trueup();
}

void PlacementEvaluator::maybe_trueup() {
  if (mutations_ % kTrueUpEvery == 0) rebuild();
}

Allocation PlacementEvaluator::allocation() const {
  Allocation a;
  for (std::size_t s = 0; s < slot_obj_.size(); ++s) {
    if (slot_obj_[s] != kEmptySlot) a.items.push_back({slot_obj_[s], slot_node_[s]});
  }
  std::sort(a.items.begin(), a.items.end());
  return a;
}

}  // namespace simcache
