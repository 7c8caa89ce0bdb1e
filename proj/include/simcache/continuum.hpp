#pragma once

#include <cstdint>
#include <vector>

#include "simcache/model.hpp"

namespace simcache {

// Continuous-limit solvers. The demand lives on a 2-D domain split into M
// unit-area regions with constant rate density per region; storage is a real
// number of slots per cache. Dissimilarity is norm-1 distance to the power
// gamma, so each slot covers a square ball and the per-region approximation
// cost has the closed form zeta_coeff(gamma) * lambda * k^(-gamma/2).

struct RegionProfile {
  std::vector<double> rate;  // per-region request density, one unit-area region each
};

double zeta_coeff(double gamma);

// Approximation cost of requests falling in one norm-1 ball of the given
// radius under constant rate density.
double ball_cost(double rate, double radius, double gamma);

struct SingleCacheResult {
  std::vector<double> slots;  // per region, summing to k
  double cost = 0.0;
};
SingleCacheResult single_cache_opt(const RegionProfile& profile, double k, double gamma);

// A chain of caches: node 0 is the leaf where requests arrive, node N-1 is
// the last resort. `hop[j]` is the cumulative retrieval cost from the leaf
// (hop[0] is usually 0) and must be non-decreasing. When
// `repository_last` is set the final node approximates at no cost (infinite
// size) and its `size` entry is ignored.
struct ChainSpec {
  std::vector<double> size;
  std::vector<double> hop;
  double gamma = 1.0;
  bool repository_last = true;
};

struct ContinuousSolution {
  std::int64_t regions = 0;
  std::int64_t nodes = 0;
  // Row-major M x N: weights[i*N+j] is the fraction of region i served by
  // node j; rows sum to 1. slots holds k_{i,j} (zero for a repository) and
  // radii the matching ball radius sqrt(1/(2 k_{i,j})) (inf where no slots).
  std::vector<double> weights;
  std::vector<double> slots;
  std::vector<double> radii;
  // N-1 popularity cut values, repository side first (ascending).
  std::vector<double> thresholds;
  double approximation = 0.0;
  double retrieval = 0.0;
  double cost = 0.0;
  std::int64_t iterations = 0;
  double residual = 0.0;
};

// Objective value for a full M x N weight matrix (rows must sum to 1).
double chain_objective(const RegionProfile& profile, const ChainSpec& spec,
                       const std::vector<double>& weights);

// First-order solver (FISTA with backtracking and restart).
ContinuousSolution chain_solve(const RegionProfile& profile, const ChainSpec& spec);

// Structure-aware solver: sorts regions by rate and searches the popularity
// cut positions directly (integer cuts by dynamic programming, fractional
// boundary regions by golden-section refinement).
ContinuousSolution chain_threshold_solve(const RegionProfile& profile, const ChainSpec& spec);

// Tree with all leaves at the same depth, identical sizes per level, and the
// leaf-l arrival process scaled by beta[l]. The optimum replicates one chain
// solution across each level.
struct TreeSpec {
  std::vector<std::int64_t> leaf_depth;
  std::vector<double> beta;
  ChainSpec chain;  // per-level sizes and cumulative costs, leaf upward
};
struct TreeResult {
  ContinuousSolution level;  // solution replicated at every cache of a level
  double total_cost = 0.0;
};
TreeResult equidepth_tree_solve(const RegionProfile& profile, const TreeSpec& tree);

// Two caches in tandem with arrivals at both: the leaf sees the profile
// rates, the parent the same rates scaled by beta_parent, and forwarding
// costs h per request. Weights are the leaf-served fraction per region.
struct TandemSpec {
  double k1 = 0.0;
  double k2 = 0.0;
  double h = 0.0;
  double beta_parent = 0.0;
  double gamma = 1.0;
};

double tandem_both_cost(const RegionProfile& profile, const TandemSpec& spec,
                        const std::vector<double>& w);

struct TandemGradient {
  std::vector<double> d;
  bool one_sided = false;  // some component sat on the box boundary
};
TandemGradient tandem_both_grad(const RegionProfile& profile, const TandemSpec& spec,
                                const std::vector<double>& w);

struct TandemSolveResult {
  std::vector<double> weights;
  double cost = 0.0;
  double residual = 0.0;
  std::int64_t iterations = 0;
  bool converged = false;
};
TandemSolveResult tandem_both_solve(const RegionProfile& profile, const TandemSpec& spec);

// Closed-form/quadrature cost for the uniform-density tandem where both
// caches hold k slots over a domain of the given area and the two square
// tessellations are shifted so parent centroids sit on leaf-cell corners.
// Leaf requests within depth z of a corner are forwarded; z solves
// (r-z)^gamma - z^gamma = h (z = max(0,(r-h)/2) when gamma is 1).
struct TandemUniformResult {
  double radius = 0.0;        // tessellation ball radius
  double z = 0.0;             // forwarding onset depth along the cell diagonal
  double saving_per_slot = 0.0;
  double cost = 0.0;
};
TandemUniformResult tandem_uniform_analytic(double k, double h, double gamma, double area,
                                            double rate_density);

}  // namespace simcache
