#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simcache/model.hpp"

namespace simcache {

// A timestamped request log. `events` is kept sorted by time; `seed` and
// `source` record how the trace was produced so experiment manifests can
// reproduce it.
struct TimedRequest {
  double time = 0.0;
  std::int32_t object = 0;
  std::int32_t ingress = 0;
};

struct Trace {
  std::vector<TimedRequest> events;
  std::optional<std::uint64_t> seed;
  std::string source;

  // Drops timestamps for policies that only consume the request order.
  RequestTrace flatten() const;
};

// Per-object rates proportional to exp(-d^2 / (2 sigma^2)), where d is the
// norm-1 distance of the object's grid cell from the grid center (the point
// (side-1)/2 in each axis, so even sides use the half-integer center). The
// first `count` cells in row-major order carry demand, normalized to
// `total_rate`, all arriving at `ingress`.
Demand gaussian_grid_demand(std::int64_t side, std::int64_t count, double sigma,
                            double total_rate, std::int32_t ingress = 0);

Demand uniform_demand(std::int64_t count, double total_rate, std::int32_t ingress = 0);

// Companion object space for grid demands: one point per cell under norm-1,
// optionally wrapped into a torus of size `side`.
ObjectSpace grid_object_space(std::int64_t side, double gamma, bool torus);

// Superposed per-entry Poisson processes. A zero total rate yields an empty
// trace. Fixed seeds give identical traces.
Trace sample_trace(const Demand& demand, double duration, std::uint64_t seed);
Trace sample_trace_count(const Demand& demand, std::int64_t events, std::uint64_t seed);

struct EmbeddingCatalog {
  std::int64_t item_count = 0;
  std::int64_t dim = 0;
  std::vector<std::string> labels;          // external item ids, in file order
  std::vector<double> coords;               // item-major, item_count x dim
  std::vector<std::int64_t> request_count;  // per item, from the bound trace
  std::vector<double> barycenter;           // length dim
};

struct IngestOptions {
  bool weighted_barycenter = true;  // weight items by request count
};

struct IngestResult {
  EmbeddingCatalog catalog;
  Trace trace;
  std::vector<std::string> warnings;
};

// Items file: CSV `item_id,x_1,...,x_d` (dimension fixed by the first row).
// Events file: CSV `timestamp,item_id[,ingress]`, default ingress 0. Unknown
// items and malformed fields raise ParseError with the 1-based line; events
// out of time order are sorted and reported as a warning.
IngestResult ingest_embedding_trace(const std::string& items_path,
                                    const std::string& events_path, IngestOptions opts = {});

// Inverse of ingest_embedding_trace, same CSV layout; numbers are written
// with shortest round-trip formatting so a re-ingest reproduces the inputs.
void write_embedding_trace(const EmbeddingCatalog& catalog, const Trace& trace,
                           const std::string& items_path, const std::string& events_path);

// Norm-2 points space over the catalog coordinates.
ObjectSpace catalog_space(const EmbeddingCatalog& catalog, double gamma);

// Discrete demand with rates proportional to the catalog request counts.
Demand demand_from_counts(const EmbeddingCatalog& catalog, double total_rate,
                          std::int32_t ingress = 0);

// Requests-per-item density inside spherical shells [k*width, (k+1)*width)
// around the barycenter; shells containing no items are omitted.
struct ShellStat {
  double rho = 0.0;  // inner shell radius
  std::int64_t items = 0;
  std::int64_t requests = 0;
  double density = 0.0;
};

std::vector<ShellStat> shell_density(const EmbeddingCatalog& catalog, const Trace& trace,
                                     double width = 1.0);

// Synthetic embedding workload: `clusters` Gaussian blobs in R^dim, the first
// centered at the origin and the rest pushed out along coordinate axes, with
// request counts apportioned deterministically by a Gaussian popularity decay
// from the origin. Built so the shell densities fall off from the barycenter.
struct ClusteredTraceSpec {
  std::int64_t items = 10000;
  std::int64_t events = 100000;
  std::int64_t dim = 10;
  std::int64_t clusters = 3;
  double cluster_separation = 12.0;
  double cluster_sigma = 1.5;
  double decay_sigma = 2.0;
  double duration = 1000.0;
  std::uint64_t seed = 1;
};

std::pair<EmbeddingCatalog, Trace> make_clustered_embedding(const ClusteredTraceSpec& spec);

}  // namespace simcache
