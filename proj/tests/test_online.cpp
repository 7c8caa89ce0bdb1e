#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "simcache/offline.hpp"
#include "simcache/online.hpp"
#include "simcache/workload.hpp"

using namespace simcache;
using simtest::random_full_allocation;
using simtest::random_matrix_instance;
using simtest::toy_single;
using simtest::toy_tandem;

namespace {

const std::array<double, 5> kLam{3.0, 4.0, 6.0, 4.0, 3.0};

RequestTrace repeat_request(std::int32_t object, std::int32_t ingress, int times) {
  return RequestTrace(static_cast<std::size_t>(times), RequestEvent{object, ingress});
}

void check_serve_matches(const Instance& inst, const ServeChoice& got, const ServeChoice& want) {
  CHECK(got.cost == want.cost);
  CHECK(got.by.object == want.by.object);
  CHECK(got.by.node == want.by.node);
  CHECK(got.from_repository == want.from_repository);
  CHECK(got.path_pos == want.path_pos);
  (void)inst;
}

}  // namespace

TEST_CASE("netduel rejects bad configs, traces, and requests") {
  const Instance inst = toy_single(4.0, 9.0, kLam, 1);
  const RequestTrace one = repeat_request(2, 0, 1);

  NetDuelConfig bad;
  bad.window = 0;
  CHECK_THROWS_AS(netduel_run(inst, one, bad), InvalidInputError);
  bad = {};
  bad.margin = -0.1;
  CHECK_THROWS_AS(netduel_run(inst, one, bad), InvalidInputError);
  bad.margin = std::nan("");
  CHECK_THROWS_AS(netduel_run(inst, one, bad), InvalidInputError);
  bad = {};
  bad.per_node = false;
  CHECK_THROWS_AS(netduel_run(inst, one, bad), InvalidInputError);

  CHECK_THROWS_AS(netduel_run(inst, {}, NetDuelConfig{}), InvalidInputError);

  NetDuelConfig ok;
  ok.margin = kInf;
  CHECK_NOTHROW(netduel_run(inst, one, ok));

  DuelState state = netduel_init(inst);
  CHECK_THROWS_AS(netduel_on_request(NetDuelConfig{}, state, {5, 0}), InvalidInputError);
  CHECK_THROWS_AS(netduel_on_request(NetDuelConfig{}, state, {-1, 0}), InvalidInputError);
  CHECK_THROWS_AS(netduel_on_request(NetDuelConfig{}, state, {0, 2}), InvalidInputError);

  Allocation overfull;
  overfull.insert({0, 0});
  overfull.insert({1, 0});
  CHECK_THROWS_AS(netduel_init(inst, overfull), Error);
}

TEST_CASE("cold start fills free slots along the path without duels") {
  const Instance inst = toy_tandem(4.0, 9.0, 90.0, kLam);
  const NetDuelConfig config;
  DuelState state = netduel_init(inst);
  REQUIRE(state.duels.size() == 2);
  CHECK(state.requests_seen == 0);

  const std::size_t s0 = state.eval.node_slot_begin(0);
  const std::size_t s1 = state.eval.node_slot_begin(1);

  // First sight of an object lands in the first free slot along the path.
  StepResult r0 = netduel_on_request(config, state, {0, 0});
  check_serve_matches(inst, r0.served, serve_cost(inst, 0, 0, {}));
  CHECK(r0.served.from_repository);
  CHECK(state.allocation() == Allocation::of({{0, 0}}));
  CHECK(state.duels[s0].virtual_object == -1);
  CHECK_FALSE(r0.swap.has_value());

  StepResult r1 = netduel_on_request(config, state, {1, 0});
  CHECK(r1.served.cost == 4.0);
  CHECK(r1.served.by.object == 0);
  CHECK(state.allocation() == Allocation::of({{0, 0}, {1, 1}}));
  CHECK(state.duels[s0].virtual_object == -1);
  CHECK(state.duels[s1].virtual_object == -1);
  CHECK(state.duels[s0].lifetime_saving == 95.0);

  // Full caches: the new object challenges the resident with the smallest
  // accumulated saving (node 1's 90 beats node 0's 95).
  StepResult r2 = netduel_on_request(config, state, {2, 0});
  CHECK(r2.served.cost == 9.0);
  CHECK(state.allocation() == Allocation::of({{0, 0}, {1, 1}}));
  CHECK(state.duels[s1].lifetime_saving == 90.0);
  CHECK(state.duels[s0].virtual_object == -1);
  CHECK(state.duels[s1].virtual_object == 2);
  CHECK(state.duels[s1].window_start == 2);
  CHECK(state.duels[s1].real_saving == 0.0);
  CHECK(state.duels[s1].virtual_saving == 0.0);

  // An object already challenging somewhere on the path is not paired again.
  StepResult r3 = netduel_on_request(config, state, {2, 0});
  CHECK(r3.served.cost == 9.0);
  CHECK(state.duels[s0].virtual_object == -1);
  CHECK(state.duels[s1].virtual_object == 2);
  CHECK(state.duels[s1].window_start == 2);
  CHECK(state.duels[s1].real_saving == 90.0);
  CHECK(state.duels[s1].virtual_saving == 90.0);
  CHECK(state.duels[s1].lifetime_saving == 180.0);

  SUBCASE("equal lifetimes break toward the lower node") {
    DuelState tied = netduel_init(inst, Allocation::of({{0, 0}, {1, 1}}));
    netduel_on_request(config, tied, {4, 0});  // repository serve, no slot history
    CHECK(tied.duels[tied.eval.node_slot_begin(0)].virtual_object == 4);
    CHECK(tied.duels[tied.eval.node_slot_begin(1)].virtual_object == -1);
  }
}

TEST_CASE("a resident that keeps winning survives its duel") {
  const Instance inst = toy_single(4.0, 9.0, kLam, 1);
  NetDuelConfig config;
  config.window = 5;
  DuelState state = netduel_init(inst, Allocation::of({{2, 0}}));

  // Any non-resident arrival recruits a challenger.
  netduel_on_request(config, state, {3, 0});
  CHECK(state.duels[0].virtual_object == 3);

  // Restart cleanly: first observe a request for the resident itself, which
  // cannot be paired, then let object 1 (useless for the traffic that
  // follows) start its duel.
  state = netduel_init(inst, Allocation::of({{2, 0}}));
  netduel_on_request(config, state, {2, 0});  // idx 0: no duel, resident requested
  CHECK(state.duels[0].virtual_object == -1);
  CHECK(state.duels[0].lifetime_saving == 9.0);

  netduel_on_request(config, state, {1, 0});  // idx 1: duel starts, challenger 1
  CHECK(state.duels[0].virtual_object == 1);
  CHECK(state.duels[0].window_start == 1);

  // Requests for object 3 are served by the resident (cost 0) and are worth
  // nothing to challenger 1 (dissimilar), so the resident racks up savings.
  for (int t = 0; t < 4; ++t) {
    StepResult r = netduel_on_request(config, state, {3, 0});
    CHECK(r.served.cost == 0.0);
    CHECK_FALSE(r.swap.has_value());
    CHECK(state.duels[0].virtual_object == 1);
  }
  CHECK(state.duels[0].real_saving == 36.0);
  CHECK(state.duels[0].virtual_saving == 0.0);

  // Window filled at idx 6: the duel resolves in the resident's favor, and
  // the very arrival that closed it recruits object 3 as the next challenger.
  StepResult last = netduel_on_request(config, state, {3, 0});
  CHECK_FALSE(last.swap.has_value());
  CHECK(state.duels[0].virtual_object == 3);
  CHECK(state.duels[0].window_start == 6);
  CHECK(state.duels[0].real_saving == 0.0);
  CHECK(state.duels[0].virtual_saving == 0.0);
  CHECK(state.duels[0].lifetime_saving == 63.0);
  CHECK(state.allocation() == Allocation::of({{2, 0}}));
  CHECK(state.requests_seen == 7);
}

TEST_CASE("a popular challenger takes the slot exactly at the window boundary") {
  const Instance inst = toy_single(4.0, 9.0, kLam, 1);
  NetDuelConfig config;
  config.window = 6;
  const Allocation init = Allocation::of({{0, 0}});
  const RequestTrace trace = repeat_request(4, 0, 15);

  DuelState state = netduel_init(inst, init);
  CHECK(state.allocation() == init);
  for (std::uint64_t idx = 0; idx < 6; ++idx) {
    StepResult r = netduel_on_request(config, state, trace[idx]);
    CHECK(r.served.cost == 9.0);  // repository; the resident cannot approximate 4
    if (idx == 0) {
      CHECK(state.duels[0].virtual_object == 4);
      CHECK(state.duels[0].window_start == 0);
    }
    if (idx < 5) CHECK_FALSE(r.swap.has_value());
    if (idx == 5) {
      CHECK(state.duels[0].virtual_saving == 45.0);
      CHECK(state.allocation() == init);
    }
  }
  // idx 6 is served under the old placement, then the duel closes and swaps.
  StepResult r6 = netduel_on_request(config, state, trace[6]);
  CHECK(r6.served.cost == 9.0);
  REQUIRE(r6.swap.has_value());
  CHECK(r6.swap->request_index == 6);
  CHECK(r6.swap->node == 0);
  CHECK(r6.swap->evicted == 0);
  CHECK(r6.swap->inserted == 4);
  CHECK(r6.swap->real_saving == 0.0);
  CHECK(r6.swap->virtual_saving == 54.0);
  CHECK(state.allocation() == Allocation::of({{4, 0}}));
  CHECK(state.duels[0].virtual_object == -1);
  CHECK(state.duels[0].lifetime_saving == 0.0);

  StepResult r7 = netduel_on_request(config, state, trace[7]);
  CHECK(r7.served.cost == 0.0);

  SUBCASE("netduel_run reports the same history in window buckets") {
    NetDuelRunResult res = netduel_run(inst, trace, config, init);
    REQUIRE(res.swaps.size() == 1);
    CHECK(res.swaps[0].request_index == 6);
    CHECK(res.swaps[0].inserted == 4);
    REQUIRE(res.window_cost.size() == 3);  // 6 + 6 + 3 requests
    CHECK(res.window_cost[0] == 9.0);
    CHECK(res.window_cost[1] == 1.5);  // one stale serve, then five free ones
    CHECK(res.window_cost[2] == 0.0);
    CHECK(res.allocation == Allocation::of({{4, 0}}));
    CHECK(res.final_cost == 133.0);
  }

  SUBCASE("a window longer than the trace leaves one partial bucket") {
    NetDuelConfig wide = config;
    wide.window = 100;
    NetDuelRunResult res = netduel_run(inst, trace, wide, init);
    CHECK(res.swaps.empty());
    REQUIRE(res.window_cost.size() == 1);
    CHECK(res.window_cost[0] == 9.0);
    CHECK(res.allocation == init);
  }
}

TEST_CASE("an infinite margin freezes the placement") {
  const Instance inst = toy_single(4.0, 9.0, kLam, 1);
  NetDuelConfig config;
  config.window = 6;
  config.margin = kInf;
  const Allocation init = Allocation::of({{0, 0}});

  NetDuelRunResult res = netduel_run(inst, repeat_request(4, 0, 25), config, init);
  CHECK(res.swaps.empty());
  CHECK(res.allocation == init);
  for (double c : res.window_cost) CHECK(c == 9.0);
  CHECK(res.final_cost == 133.0);
}

TEST_CASE("the None rule disables all placement changes") {
  const Instance inst = toy_single(4.0, 9.0, kLam, 2);  // one slot left free
  NetDuelConfig config;
  config.window = 4;
  config.rule = CandidateRule::None;
  const Allocation init = Allocation::of({{0, 0}});

  DuelState state = netduel_init(inst, init);
  for (int t = 0; t < 12; ++t) {
    StepResult r = netduel_on_request(config, state, {4, 0});
    CHECK(r.served.cost == 9.0);
    CHECK_FALSE(r.swap.has_value());
  }
  CHECK(state.allocation() == init);  // even the free slot stays empty
  for (const DuelSlot& d : state.duels) CHECK(d.virtual_object == -1);

  NetDuelRunResult res = netduel_run(inst, repeat_request(4, 0, 12), config, init);
  for (double c : res.window_cost) CHECK(c == 9.0);
  CHECK(res.allocation == init);
}

TEST_CASE("random traces keep serving costs exact and state invariants intact") {
  std::mt19937_64 rng(20240817);
  NetDuelConfig config;
  config.window = 7;

  for (int rep = 0; rep < 10; ++rep) {
    CAPTURE(rep);
    const Instance inst = random_matrix_instance(rng);
    const Allocation init = (rep % 2 == 1) ? random_full_allocation(inst, rng) : Allocation{};
    DuelState state = netduel_init(inst, init);

    std::vector<std::int32_t> ingresses{0};
    if (!inst.topology.path[1].empty()) ingresses.push_back(1);

    for (int step = 0; step < 400; ++step) {
      CAPTURE(step);
      const std::int32_t o = static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(inst.space.object_count));
      const std::int32_t i = ingresses[rng() % ingresses.size()];

      const ServeChoice want = serve_cost(inst, o, i, state.allocation());
      StepResult r = netduel_on_request(config, state, {o, i});
      CHECK(r.served.cost == want.cost);

      if (r.swap) {
        CHECK(r.swap->virtual_saving > (1.0 + config.margin) * r.swap->real_saving);
        CHECK(r.swap->evicted != r.swap->inserted);
      }
      for (std::size_t s = 0; s < state.duels.size(); ++s) {
        const DuelSlot& d = state.duels[s];
        CHECK(d.real_saving >= 0.0);
        CHECK(d.virtual_saving >= 0.0);
        CHECK(d.lifetime_saving >= 0.0);
        if (d.virtual_object < 0) continue;
        CHECK(d.virtual_object < inst.space.object_count);
        CHECK(d.window_start < state.requests_seen);
        const std::int32_t node = state.eval.slot_node(s);
        CHECK(d.virtual_object != state.eval.slot_object(s));
        CHECK_FALSE(state.eval.node_contains(node, d.virtual_object));
      }
      if (step % 50 == 49) {
        const Allocation a = state.allocation();
        CHECK_NOTHROW(validate_allocation(inst, a));
        CHECK(state.eval.total_cost() == expected_cost(inst, a).total);
      }
    }
  }
}

TEST_CASE("identical runs produce identical histories") {
  std::mt19937_64 rng(71);
  const Instance inst = random_matrix_instance(rng);
  RequestTrace trace;
  for (int t = 0; t < 300; ++t)
    trace.push_back({static_cast<std::int32_t>(rng() % static_cast<std::uint64_t>(inst.space.object_count)), 0});

  NetDuelConfig config;
  config.window = 9;
  const NetDuelRunResult a = netduel_run(inst, trace, config);
  const NetDuelRunResult b = netduel_run(inst, trace, config);
  CHECK(a.allocation == b.allocation);
  CHECK(a.final_cost == b.final_cost);
  REQUIRE(a.window_cost.size() == b.window_cost.size());
  for (std::size_t w = 0; w < a.window_cost.size(); ++w) CHECK(a.window_cost[w] == b.window_cost[w]);
  REQUIRE(a.swaps.size() == b.swaps.size());
  for (std::size_t s = 0; s < a.swaps.size(); ++s) {
    CHECK(a.swaps[s].request_index == b.swaps[s].request_index);
    CHECK(a.swaps[s].node == b.swaps[s].node);
    CHECK(a.swaps[s].evicted == b.swaps[s].evicted);
    CHECK(a.swaps[s].inserted == b.swaps[s].inserted);
    CHECK(a.swaps[s].real_saving == b.swaps[s].real_saving);
    CHECK(a.swaps[s].virtual_saving == b.swaps[s].virtual_saving);
  }
}

TEST_CASE("a long run over gaussian grid traffic lands near the local-swap placement") {
  const std::int64_t side = 6;
  Instance inst;
  inst.space = grid_object_space(side, 1.0, false);
  inst.topology = Topology::make(3);
  inst.topology.capacity = {4, 2, 0};
  inst.topology.is_repository = {0, 0, 1};
  inst.topology.set_hop(0, 1, 2.0);
  inst.topology.set_hop(0, 2, 6.0);
  inst.topology.set_hop(1, 2, 4.0);
  inst.topology.path[0] = {0, 1, 2};
  inst.topology.path[1] = {1, 2};
  inst.demand = gaussian_grid_demand(side, side * side, 1.5, 100.0);
  for (std::int32_t o = 0; o < inst.space.object_count; ++o) inst.repository_seeds.push_back({o, 2});
  validate_instance(inst);

  const LocalSwapResult ls = local_swap(inst, {}, {}, StopRule::converged());
  REQUIRE(ls.converged);
  const GreedyResult greedy = greedy_place(inst);

  const RequestTrace trace = sample_trace_count(inst.demand, 40000, 5).flatten();
  const NetDuelRunResult res = netduel_run(inst, trace, NetDuelConfig{});

  CHECK(res.final_cost <= 1.1 * ls.cost);
  CHECK(res.final_cost >= 0.9 * ls.cost);
  CHECK_FALSE(res.swaps.empty());

  // Cold start: the early windows pay repository prices, the late ones do not.
  REQUIRE(res.window_cost.size() == 80);
  double head = 0.0, tail = 0.0;
  for (int w = 0; w < 8; ++w) {
    head += res.window_cost[w];
    tail += res.window_cost[res.window_cost.size() - 1 - w];
  }
  CHECK(tail <= head);

  // Typical ordering of the three placement strategies on smooth demand: the
  // online run recovers nearly all of greedy's caching gain.
  const double empty = expected_cost(inst, {}).total;
  WARN(ls.cost <= greedy.cost + 1e-9);
  WARN(empty - res.final_cost >= 0.98 * (empty - greedy.cost));
}
