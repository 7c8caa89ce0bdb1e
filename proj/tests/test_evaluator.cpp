#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <vector>

#include "helpers.hpp"
#include "simcache/evaluator.hpp"

using namespace simcache;
using namespace simtest;

namespace {

// Integer grid catalog (norm-1, optionally toroidal) behind a two-cache chain
// with two ingresses; everything integral so expected costs are exact.
Instance grid_instance(std::mt19937_64& rng, double gamma, double period) {
  const int L = 6;
  Instance inst;
  inst.space = ObjectSpace::points(2, Metric::Norm1, gamma, period);
  inst.space.object_count = L * L;
  inst.space.coords.resize(static_cast<std::size_t>(L) * L * 2);
  for (int y = 0; y < L; ++y) {
    for (int x = 0; x < L; ++x) {
      inst.space.coords[2 * (y * L + x)] = x;
      inst.space.coords[2 * (y * L + x) + 1] = y;
    }
  }
  inst.topology = Topology::make(3);
  inst.topology.capacity = {3, 4, 0};
  inst.topology.is_repository = {0, 0, 1};
  inst.topology.set_hop(0, 1, 2.0);
  inst.topology.set_hop(0, 2, 7.0);
  inst.topology.set_hop(1, 2, 5.0);
  inst.topology.path[0] = {0, 1, 2};
  inst.topology.path[1] = {1, 2};
  for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
    inst.repository_seeds.push_back({o, 2});
    inst.demand.entries.push_back({o, 0, static_cast<double>(1 + rng() % 9)});
    if (rng() & 1) inst.demand.entries.push_back({o, 1, static_cast<double>(1 + rng() % 9)});
  }
  return inst;
}

// Small embedding catalog in R^4 under norm-2.
Instance embedding_instance(std::mt19937_64& rng, double gamma) {
  Instance inst;
  inst.space = ObjectSpace::points(4, Metric::Norm2, gamma);
  inst.space.object_count = 40;
  inst.space.coords.resize(40 * 4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (auto& c : inst.space.coords) c = u(rng);
  inst.topology = Topology::make(3);
  inst.topology.capacity = {2, 3, 0};
  inst.topology.is_repository = {0, 0, 1};
  inst.topology.set_hop(0, 1, 1.5);
  inst.topology.set_hop(0, 2, 6.5);
  inst.topology.set_hop(1, 2, 5.0);
  inst.topology.path[0] = {0, 1, 2};
  inst.topology.path[1] = {1, 2};
  for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
    inst.repository_seeds.push_back({o, 2});
    inst.demand.entries.push_back({o, 0, static_cast<double>(1 + rng() % 9)});
    if (rng() % 3 == 0) inst.demand.entries.push_back({o, 1, static_cast<double>(1 + rng() % 9)});
  }
  return inst;
}

std::vector<std::int32_t> cache_nodes(const Instance& inst) {
  std::vector<std::int32_t> out;
  for (std::int32_t j = 0; j < inst.topology.node_count; ++j) {
    if (!inst.topology.is_repository[j] && inst.topology.capacity[j] > 0) out.push_back(j);
  }
  return out;
}

// Oracle for the combined insert+evict delta of scan_swaps.
double naive_swap_delta(const Instance& inst, const Allocation& a, std::int32_t object,
                        std::int32_t node, std::int32_t evicted) {
  Allocation b = a;
  b.erase({evicted, node});
  b.insert({object, node});
  return expected_cost(inst, b).total - expected_cost(inst, a).total;
}

}  // namespace

TEST_CASE("empty and seeded allocations reproduce the model cost exactly") {
  Instance inst = toy_single(4.0, 9.0, {3, 4, 6, 4, 3});  // x9 costs, x3 rates
  PlacementEvaluator empty(inst);
  CHECK(empty.total_cost() == 180.0);

  PlacementEvaluator ev(inst, Allocation::of({{1, 0}, {3, 0}}));
  CHECK(ev.total_cost() == 24.0);
  CHECK(ev.allocation() == Allocation::of({{1, 0}, {3, 0}}));
  CHECK(ev.slot_count() == 2);
  CHECK(ev.covers(0));
  CHECK_FALSE(ev.covers(1));

  // removal losses against whole-allocation reevaluation
  for (std::size_t s = 0; s < ev.slot_count(); ++s) {
    Allocation rest = ev.allocation();
    rest.erase({ev.slot_object(s), ev.slot_node(s)});
    CHECK(ev.removal_loss(s) == expected_cost(inst, rest).total - 24.0);
  }
}

TEST_CASE("scan_swaps prices insertion and every eviction like a fresh evaluation") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 12; ++t) {
    Instance inst = random_matrix_instance(rng);
    Allocation a = random_full_allocation(inst, rng);
    PlacementEvaluator ev(inst, a);
    const double base = expected_cost(inst, a).total;
    REQUIRE(ev.total_cost() == base);
    for (std::int32_t node : cache_nodes(inst)) {
      if (!ev.covers(node)) continue;
      for (int trial = 0; trial < 8; ++trial) {
        const auto o = static_cast<std::int32_t>(rng() % inst.space.object_count);
        auto scan = ev.scan_swaps(o, node);
        Allocation plus = a;
        plus.insert({o, node});
        CHECK(scan.insert_gain == base - expected_cost(inst, plus).total);
        for (std::size_t s = ev.node_slot_begin(node); s < ev.node_slot_end(node); ++s) {
          const double want = naive_swap_delta(inst, a, o, node, ev.slot_object(s));
          CHECK(scan.evict_delta[s - ev.node_slot_begin(node)] == want);
        }
      }
      // replacing a slot by its own occupant is free
      for (std::size_t s = ev.node_slot_begin(node); s < ev.node_slot_end(node); ++s) {
        auto self = ev.scan_swaps(ev.slot_object(s), node);
        CHECK(self.evict_delta[s - ev.node_slot_begin(node)] == 0.0);
      }
    }
  }
}

TEST_CASE("mutation fuzz keeps incremental state equal to a fresh evaluator") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 10; ++t) {
    Instance inst = random_matrix_instance(rng);
    PlacementEvaluator ev(inst);
    CHECK(ev.total_cost() == expected_cost(inst, Allocation{}).total);
    for (int step = 0; step < 50; ++step) {
      const auto o = static_cast<std::int32_t>(rng() % inst.space.object_count);
      const std::size_t s = rng() % ev.slot_count();
      const std::int32_t node = ev.slot_node(s);
      switch (rng() % 3) {
        case 0:
          if (!ev.node_contains(node, o) && ev.free_slot(node)) ev.commit_insert(o, node);
          break;
        case 1:
          if (!ev.node_contains(node, o)) ev.commit_replace(o, s);
          break;
        default:
          ev.remove(s);
          break;
      }
      const Allocation a = ev.allocation();
      REQUIRE(ev.total_cost() == expected_cost(inst, a).total);
      if (step % 10 == 9) {
        PlacementEvaluator fresh(inst, a);
        for (std::size_t r = 0; r < ev.request_count(); ++r) {
          REQUIRE(ev.best_cost(r) == fresh.best_cost(r));
          REQUIRE(ev.second_cost(r) == fresh.second_cost(r));
        }
        for (std::size_t sl = 0; sl < ev.slot_count(); ++sl) {
          if (ev.slot_object(sl) == PlacementEvaluator::kEmptySlot) {
            CHECK(ev.removal_loss(sl) == 0.0);
          } else {
            Allocation rest = a;
            rest.erase({ev.slot_object(sl), ev.slot_node(sl)});
            CHECK(ev.removal_loss(sl) == expected_cost(inst, rest).total - ev.total_cost());
          }
        }
      }
    }
  }
}

TEST_CASE("insertion_gain is realized exactly by commit_insert") {
  std::mt19937_64 rng(5);
  Instance inst = random_matrix_instance(rng);
  PlacementEvaluator ev(inst);
  for (std::int32_t node : cache_nodes(inst)) {
    while (ev.free_slot(node)) {
      std::int32_t pick = -1;
      for (std::int32_t o = 0; o < inst.space.object_count; ++o) {
        if (!ev.node_contains(node, o)) {
          pick = o;
          break;
        }
      }
      REQUIRE(pick >= 0);
      const double g = ev.insertion_gain(pick, node);
      const double before = ev.total_cost();
      ev.commit_insert(pick, node);
      CHECK(before - ev.total_cost() == g);
    }
  }
}

TEST_CASE("points spaces: grid and embedding agree with the model") {
  std::mt19937_64 rng(41);
  for (double gamma : {1.0, 2.0}) {
    for (double period : {0.0, 6.0}) {
      Instance inst = grid_instance(rng, gamma, period);
      Allocation a = random_full_allocation(inst, rng);
      PlacementEvaluator ev(inst, a);
      const double base = expected_cost(inst, a).total;
      CHECK(ev.total_cost() == base);  // integer grid costs are exact
      for (std::int32_t node : cache_nodes(inst)) {
        const auto o = static_cast<std::int32_t>(rng() % inst.space.object_count);
        auto scan = ev.scan_swaps(o, node);
        for (std::size_t s = ev.node_slot_begin(node); s < ev.node_slot_end(node); ++s) {
          const double want = naive_swap_delta(inst, a, o, node, ev.slot_object(s));
          CHECK(scan.evict_delta[s - ev.node_slot_begin(node)] ==
                doctest::Approx(want).epsilon(1e-12));
        }
      }
    }
  }
  for (double gamma : {1.0, 0.5, 1.3}) {
    Instance inst = embedding_instance(rng, gamma);
    Allocation a = random_full_allocation(inst, rng);
    PlacementEvaluator ev(inst, a);
    const double base = expected_cost(inst, a).total;
    CHECK(ev.total_cost() == doctest::Approx(base).epsilon(1e-12));
    for (std::int32_t node : cache_nodes(inst)) {
      const auto o = static_cast<std::int32_t>(rng() % inst.space.object_count);
      auto scan = ev.scan_swaps(o, node);
      Allocation plus = a;
      plus.insert({o, node});
      CHECK(scan.insert_gain ==
            doctest::Approx(base - expected_cost(inst, plus).total).epsilon(1e-9));
    }
  }
}

TEST_CASE("per-request views expose the serving options") {
  Instance inst = toy_tandem(4.0, 4.0, 9.0, {3, 4, 6, 4, 3});  // x9 costs, x3 rates
  PlacementEvaluator ev(inst, Allocation::of({{2, 0}, {0, 1}}));

  auto r2 = ev.find_request(2, 0);  // object x3 at the ingress
  REQUIRE(r2.has_value());
  CHECK(ev.request_object(*r2) == 2);
  CHECK(ev.request_ingress(*r2) == 0);
  CHECK(ev.best_cost(*r2) == 0.0);  // served by the ingress copy of x3
  CHECK(ev.owner(*r2) == ev.node_slot_begin(0));
  CHECK(ev.request_rate(*r2) == 6.0);

  auto r0 = ev.find_request(0, 0);  // object x1: exact copy at the parent
  REQUIRE(r0.has_value());
  CHECK(ev.best_cost(*r0) == 4.0);    // h(0,1) = 4
  CHECK(ev.second_cost(*r0) == 13.0); // repository fallback

  CHECK_FALSE(ev.find_request(0, 1).has_value());

  CHECK(ev.option_cost(*r2, 1, 0) == 0.0);
  CHECK(ev.option_cost(*r2, 1, 1) == 4.0);
  CHECK(ev.option_cost(*r2, 0, 0) == kInf);  // x1 cannot stand in for x3
  auto r1_parent = ev.find_request(1, 0);
  REQUIRE(r1_parent.has_value());
  CHECK(ev.option_cost(*r1_parent, 1, 2) == kInf);  // repositories take no placements
}

TEST_CASE("argument and state errors") {
  Instance inst = toy_single(4.0, 9.0, {3, 4, 6, 4, 3});
  PlacementEvaluator ev(inst, Allocation::of({{1, 0}, {3, 0}}));
  CHECK_THROWS_AS(ev.scan_swaps(99, 0), InvalidInputError);
  CHECK_THROWS_AS(ev.scan_swaps(0, 1), InvalidInputError);   // repository
  CHECK_THROWS_AS(ev.scan_swaps(0, 7), InvalidInputError);
  CHECK_THROWS_AS(ev.commit_insert(0, 0), InvalidInputError);  // node full
  CHECK_THROWS_AS(ev.commit_replace(1, 1), InvalidInputError); // duplicate at node
  CHECK_THROWS_AS(ev.commit_replace(0, 99), InvalidInputError);
  CHECK_THROWS_AS(ev.remove(99), InvalidInputError);

  Instance regions = inst;
  regions.demand.kind = Demand::Kind::Regions;
  regions.demand.entries.clear();
  regions.demand.regions.push_back({0, 0, 1.0, 0.0, 0.0});
  CHECK_THROWS_AS(PlacementEvaluator{regions}, InvalidInstanceError);

  Instance overfull = toy_single(4.0, 9.0, {3, 4, 6, 4, 3}, 1);
  CHECK_THROWS_AS((PlacementEvaluator{overfull, Allocation::of({{1, 0}, {3, 0}})}),
                  InvalidInputError);
}

TEST_CASE("rebuild after drift leaves exact state untouched on integer instances") {
  std::mt19937_64 rng(123);
  Instance inst = random_matrix_instance(rng);
  PlacementEvaluator ev(inst);
  for (int step = 0; step < 200; ++step) {
    const auto o = static_cast<std::int32_t>(rng() % inst.space.object_count);
    const std::size_t s = rng() % ev.slot_count();
    if (!ev.node_contains(ev.slot_node(s), o)) ev.commit_replace(o, s);
  }
  const double before = ev.total_cost();
  ev.rebuild();
  CHECK(ev.total_cost() == before);
  CHECK(ev.total_cost() == expected_cost(inst, ev.allocation()).total);
}
