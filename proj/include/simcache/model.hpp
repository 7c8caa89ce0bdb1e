#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace simcache {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Errors are typed so callers (and tests) can distinguish bad arguments from
// structurally broken inputs.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInputError : Error {
  using Error::Error;
};
struct InvalidInstanceError : Error {
  using Error::Error;
};
struct UnservableRequestError : Error {
  using Error::Error;
};
struct CombinatorialSizeError : Error {
  using Error::Error;
};
struct InvalidConstraintError : Error {
  using Error::Error;
};
struct UnsupportedTopologyError : Error {
  using Error::Error;
};
struct NoProgressError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};
struct ParseError : Error {
  ParseError(const std::string& what, int line_no) : Error(what), line(line_no) {}
  int line = 0;
};

enum class Metric { Norm1, Norm2 };

// Catalog of objects together with the dissimilarity between them, either as
// an explicit matrix or as points in R^d under a norm raised to `gamma`.
// A positive `period` wraps Norm1 coordinates around a torus of that size.
struct ObjectSpace {
  enum class Kind { Matrix, Points };

  Kind kind = Kind::Matrix;
  std::int64_t object_count = 0;

  // Matrix form: row-major object_count x object_count, kInf = unservable pair.
  std::vector<double> cost;

  // Points form.
  Metric metric = Metric::Norm2;
  double gamma = 1.0;
  std::int64_t dim = 0;
  double period = 0.0;
  std::vector<double> coords;  // object-major, object_count x dim

  static ObjectSpace matrix(std::int64_t count);
  static ObjectSpace points(std::int64_t dim, Metric metric, double gamma, double period = 0.0);

  double distance(std::int64_t x, std::int64_t y) const;
  // Dissimilarity penalty for serving a request for x with stored object y.
  double approximation_cost(std::int64_t x, std::int64_t y) const;
  const double* point(std::int64_t o) const { return coords.data() + o * dim; }
};

struct Approximizer {
  std::int32_t object = 0;
  std::int32_t node = 0;
  auto operator<=>(const Approximizer&) const = default;
};

// Node graph with per-node capacities, hop costs and per-ingress forwarding
// paths. Repository nodes have unbounded capacity and hold the seed copies.
struct Topology {
  std::int64_t node_count = 0;
  std::vector<std::int64_t> capacity;        // per node; ignored for repositories
  std::vector<std::uint8_t> is_repository;   // per node
  std::vector<double> hop;                   // row-major node_count x node_count, kInf = unreachable
  std::vector<std::vector<std::int32_t>> path;  // per ingress: node sequence; empty = not an ingress

  static Topology make(std::int64_t node_count);
  double hop_cost(std::int64_t i, std::int64_t j) const { return hop[i * node_count + j]; }
  void set_hop(std::int64_t i, std::int64_t j, double v) { hop[i * node_count + j] = v; }
};

struct DemandEntry {
  std::int32_t object = 0;
  std::int32_t ingress = 0;
  double rate = 0.0;
};

// One observed request; traces drive the online policy and trace-mode swaps.
struct RequestEvent {
  std::int32_t object = 0;
  std::int32_t ingress = 0;
};
using RequestTrace = std::vector<RequestEvent>;

struct RegionEntry {
  std::int32_t region = 0;
  std::int32_t ingress = 0;
  double rate = 0.0;  // demand per unit area; regions have unit area
  double cx = 0.0, cy = 0.0;
};

struct Demand {
  enum class Kind { Discrete, Regions };
  Kind kind = Kind::Discrete;
  std::vector<DemandEntry> entries;
  std::vector<RegionEntry> regions;

  double total_rate() const;
};

struct Instance {
  ObjectSpace space;
  Topology topology;
  Demand demand;
  std::vector<Approximizer> repository_seeds;  // (object, repository node)
};

// A placement: set of (object, node) pairs, kept sorted and unique.
struct Allocation {
  std::vector<Approximizer> items;

  static Allocation of(std::initializer_list<Approximizer> list);
  bool contains(Approximizer a) const;
  void insert(Approximizer a);
  void erase(Approximizer a);
  std::size_t size() const { return items.size(); }
  bool operator==(const Allocation&) const = default;
};

struct ServeChoice {
  double cost = kInf;
  Approximizer by{-1, -1};
  bool from_repository = false;
  std::int32_t path_pos = -1;  // hop count from the ingress along the path
};

struct CostBreakdown {
  double total = 0.0;
  double approximation = 0.0;
  double retrieval = 0.0;
  std::vector<double> node_served_rate;   // per node
  std::vector<ServeChoice> per_request;   // aligned with demand.entries
};

// Throws InvalidInputError / InvalidInstanceError / UnsupportedTopologyError
// when the instance is structurally unusable (bad shapes, negative costs,
// non-increasing hop costs along a path, a demanded object with no reachable
// repository, ...).
void validate_instance(const Instance& inst);

// Occupancy and id-range check for an allocation against the instance.
void validate_allocation(const Instance& inst, const Allocation& a);

// Cheapest way to serve one request: min over allocated approximizers and
// repository seeds on the ingress path of C_a(object, stored) + h(ingress, node).
// Ties broken by fewer hops from the ingress, then lowest stored-object id.
ServeChoice serve_cost(const Instance& inst, std::int32_t object, std::int32_t ingress,
                       const Allocation& a);

// Rate-weighted total of serve_cost over all demand entries (Discrete demand only).
CostBreakdown expected_cost(const Instance& inst, const Allocation& a);

// Expected-cost reduction of `a` versus serving everything from repositories.
double caching_gain(const Instance& inst, const Allocation& a);

}  // namespace simcache
