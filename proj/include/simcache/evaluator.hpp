#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "simcache/model.hpp"

namespace simcache {

// Incremental expected-cost bookkeeping for one instance under a mutating
// allocation. For every demand entry it maintains the best and second-best
// serving option, so pricing a candidate insertion (or any eviction at a
// node) touches only the requests that node can serve, and committing a swap
// rescans only the requests whose best or second option died.
//
// Slots are the unit of storage: node j owns the contiguous slot range
// [node_slot_begin(j), node_slot_end(j)) of size capacity[j] (repositories
// own none). A request's `owner` is the slot serving it, or kRepoOwner when
// the repositories do.
class PlacementEvaluator {
 public:
  static constexpr std::size_t kRepoOwner = static_cast<std::size_t>(-1);
  static constexpr std::int32_t kEmptySlot = -1;

  explicit PlacementEvaluator(const Instance& inst, const Allocation& init = {});

  const Instance& instance() const { return *inst_; }

  // --- slots ---
  std::size_t slot_count() const { return slot_obj_.size(); }
  std::int32_t slot_node(std::size_t slot) const { return slot_node_[slot]; }
  std::int32_t slot_object(std::size_t slot) const { return slot_obj_[slot]; }
  std::size_t node_slot_begin(std::int32_t node) const { return slot_begin_[node]; }
  std::size_t node_slot_end(std::int32_t node) const { return slot_begin_[node + 1]; }
  std::optional<std::size_t> free_slot(std::int32_t node) const;
  bool node_contains(std::int32_t node, std::int32_t object) const;
  // True when at least one demand entry can be served from this node.
  bool covers(std::int32_t node) const { return !covered_[node].empty(); }
  const std::vector<std::int32_t>& covered_nodes() const { return covered_nodes_; }

  // --- cost queries ---
  double total_cost() const { return total_cost_; }
  // Expected-cost increase of emptying `slot` (>= 0).
  double removal_loss(std::size_t slot) const { return removal_loss_[slot]; }

  // Expected-cost decrease of adding `object` at `node` (>= 0).
  double insertion_gain(std::int32_t object, std::int32_t node);

  struct SwapScan {
    double insert_gain = 0.0;        // gain of the insertion alone
    std::vector<double> evict_delta; // per local slot: cost delta of insert+evict
  };
  // Prices `object`@`node` against every slot of the node in one pass:
  // evict_delta[s] is the total cost change of storing the candidate while
  // evicting local slot s (for a free slot this is just -insert_gain).
  SwapScan scan_swaps(std::int32_t object, std::int32_t node);

  // --- per-request views ---
  std::size_t request_count() const { return rate_.size(); }
  double request_rate(std::size_t r) const { return rate_[r]; }
  std::int32_t request_object(std::size_t r) const { return req_object_[r]; }
  std::int32_t request_ingress(std::size_t r) const { return blocks_[block_of_[r]].ingress; }
  double best_cost(std::size_t r) const { return best_[r]; }
  double second_cost(std::size_t r) const { return second_[r]; }
  std::size_t owner(std::size_t r) const { return owner_[r]; }
  std::optional<std::size_t> find_request(std::int32_t object, std::int32_t ingress) const;
  // Cost of serving request r by `object` stored at `node` (kInf off-path).
  double option_cost(std::size_t r, std::int32_t object, std::int32_t node) const;

  // --- mutations ---
  // Places `object` into the lowest free slot at `node`; returns the slot.
  std::size_t commit_insert(std::int32_t object, std::int32_t node);
  // Replaces the occupant of `slot` (no-op if it already holds `object`).
  void commit_replace(std::int32_t object, std::size_t slot);
  void remove(std::size_t slot);

  Allocation allocation() const;
  // Recomputes all per-request state from the slot table (also run
  // periodically to shed float drift from the incremental updates).
  void rebuild();

 private:
  struct Block {
    std::int32_t ingress = 0;
    std::uint32_t begin = 0, end = 0;
  };
  struct CoveredBlock {
    std::uint32_t block = 0;
    double hop = 0.0;
  };

  void fill_candidate(std::int32_t object, std::int32_t node);  // into cand_
  double candidate_one(std::size_t r, std::int32_t object, double hop) const;
  void rescan_into(std::size_t r, double& best, std::size_t& owner, double& second,
                   std::size_t& sowner) const;
  void rescan(std::size_t r);
  void set_state(std::size_t r, double best, std::size_t owner, double second,
                 std::size_t second_owner);
  void apply_candidate(std::size_t slot);  // propagate cand_ as slot's new option
  void check_object(std::int32_t object) const;
  void check_cache_node(std::int32_t node) const;
  void maybe_trueup();

  const Instance* inst_;

  // Demand entries in block order (grouped by ingress).
  std::vector<double> rate_, repo_cost_, best_, second_, cand_;
  std::vector<std::int32_t> req_object_;
  std::vector<std::size_t> owner_, second_owner_;
  std::vector<Block> blocks_;
  std::vector<std::uint32_t> block_of_;
  std::vector<std::vector<CoveredBlock>> covered_;  // per node
  std::vector<std::int32_t> covered_nodes_;
  std::unordered_map<std::uint64_t, std::uint32_t> req_index_;

  // Geometry mirrors of the requested objects (points spaces).
  std::vector<double> xs_, ys_;  // Norm1 in the plane
  std::vector<double> dims_;     // Norm2, dimension-major [d * R + r]

  std::vector<std::size_t> slot_begin_;  // per node, +1 sentinel
  std::vector<std::int32_t> slot_obj_;
  std::vector<std::int32_t> slot_node_;
  std::vector<double> removal_loss_;

  double total_cost_ = 0.0;
  std::uint64_t mutations_ = 0;
};

}  // namespace simcache
