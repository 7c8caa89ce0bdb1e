#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "simcache/kernels.hpp"
#include "simcache/model.hpp"

using namespace simcache;
using kern::Lane;

namespace {

const std::vector<std::size_t> kSizes{0, 1, 3, 4, 7, 8, 9, 31, 64, 257, 1000};

std::vector<Lane> available_lanes() {
  std::vector<Lane> lanes{Lane::Scalar};
  if (kern::lane_supported(Lane::Avx2)) lanes.push_back(Lane::Avx2);
  if (kern::lane_supported(Lane::Avx512)) lanes.push_back(Lane::Avx512);
  return lanes;
}

std::vector<double> randv(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar lane is always available and some lane is active") {
  CHECK(kern::lane_supported(Lane::Scalar));
  CHECK_NOTHROW(kern::ops());
  MESSAGE("active lane: ", std::string(kern::ops().name));
  MESSAGE("lanes under test: ", available_lanes().size());
}

TEST_CASE("l1_cost_2d: SIMD lanes match scalar bit for bit") {
  std::mt19937_64 rng(1);
  const auto& ref = kern::ops_for(Lane::Scalar);
  for (auto lane : available_lanes()) {
    const auto& k = kern::ops_for(lane);
    for (auto n : kSizes) {
      auto xs = randv(rng, n, -50, 50);
      auto ys = randv(rng, n, -50, 50);
      for (double gamma : {1.0, 2.0, 0.5, 1.7}) {
        for (double period : {0.0, 60.0}) {
          std::vector<double> a(n, -1), b(n, -1);
          ref.l1_cost_2d(xs.data(), ys.data(), n, 3.25, -7.5, period, gamma, 0.625, a.data());
          k.l1_cost_2d(xs.data(), ys.data(), n, 3.25, -7.5, period, gamma, 0.625, b.data());
          for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(a[i] == b[i]);
          }
        }
      }
    }
  }
}

TEST_CASE("l2_cost_soa: SIMD lanes match scalar bit for bit") {
  std::mt19937_64 rng(2);
  const auto& ref = kern::ops_for(Lane::Scalar);
  for (auto lane : available_lanes()) {
    const auto& k = kern::ops_for(lane);
    for (auto n : kSizes) {
      for (std::size_t dim : {1u, 2u, 10u}) {
        const std::size_t stride = n + 3;  // deliberately padded
        auto dims = randv(rng, stride * dim, -4, 4);
        auto q = randv(rng, dim, -4, 4);
        for (double gamma : {1.0, 2.0, 0.5, 1.3}) {
          std::vector<double> a(n, -1), b(n, -1);
          ref.l2_cost_soa(dims.data(), stride, dim, n, q.data(), gamma, 1.5, a.data());
          k.l2_cost_soa(dims.data(), stride, dim, n, q.data(), gamma, 1.5, b.data());
          for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(a[i] == b[i]);
          }
        }
      }
    }
  }
}

TEST_CASE("positive_gain and dot agree across lanes within summation error") {
  std::mt19937_64 rng(3);
  const auto& ref = kern::ops_for(Lane::Scalar);
  for (auto lane : available_lanes()) {
    const auto& k = kern::ops_for(lane);
    for (auto n : kSizes) {
      auto rate = randv(rng, n, 0, 2);
      auto best = randv(rng, n, 0, 10);
      auto cand = randv(rng, n, 0, 12);
      // sprinkle unservable candidates
      for (std::size_t i = 0; i < n; i += 5) cand[i] = kInf;
      const double g0 = ref.positive_gain(rate.data(), best.data(), cand.data(), n);
      const double g1 = k.positive_gain(rate.data(), best.data(), cand.data(), n);
      CHECK(g1 == doctest::Approx(g0).epsilon(1e-12));
      const double d0 = ref.dot(rate.data(), best.data(), n);
      const double d1 = k.dot(rate.data(), best.data(), n);
      CHECK(d1 == doctest::Approx(d0).epsilon(1e-12));
    }
  }
}

TEST_CASE("positive_gain ignores candidates that cannot improve") {
  const auto& k = kern::ops();
  std::vector<double> rate{2.0, 3.0, 5.0};
  std::vector<double> best{1.0, 4.0, 2.0};
  std::vector<double> cand{kInf, 1.0, 2.0};  // inf, better by 3, equal
  CHECK(k.positive_gain(rate.data(), best.data(), cand.data(), 3) == 9.0);
}

TEST_CASE("l1 wrap-around distances stay within the torus diameter") {
  const auto& k = kern::ops();
  const double period = 10.0;
  std::vector<double> xs{0.0, 9.5, 4.0, 5.0};
  std::vector<double> ys{0.0, 9.5, 6.0, 5.0};
  std::vector<double> out(4);
  k.l1_cost_2d(xs.data(), ys.data(), 4, 0.0, 0.0, period, 1.0, 0.0, out.data());
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 1.0);  // 0.5 + 0.5 wrapped
  CHECK(out[2] == 8.0);
  CHECK(out[3] == 10.0);
  for (double v : out) CHECK(v <= period);  // each axis contributes at most period/2
}

TEST_CASE("set_lane switches supported lanes and rejects the rest") {
  const Lane before = kern::active_lane();
  for (auto lane : available_lanes()) {
    kern::set_lane(lane);
    CHECK(kern::active_lane() == lane);
    CHECK(kern::ops().name == kern::ops_for(lane).name);
  }
  for (auto lane : {Lane::Avx2, Lane::Avx512}) {
    if (!kern::lane_supported(lane)) {
      CHECK_THROWS_AS(kern::set_lane(lane), InvalidInputError);
      CHECK_THROWS_AS(kern::ops_for(lane), InvalidInputError);
    }
  }
  kern::set_lane(before);
}
