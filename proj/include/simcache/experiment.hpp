#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "simcache/continuum.hpp"
#include "simcache/model.hpp"
#include "simcache/online.hpp"
#include "simcache/workload.hpp"

namespace simcache {

inline constexpr const char* kSimcacheVersion = "0.1.0";

// Environment variable naming the directory experiment outputs land under
// when no explicit root is passed.
inline constexpr const char* kOutputRootEnv = "SIMCACHE_OUTPUT_ROOT";

enum class ExperimentKind {
  TandemSweep,          // cost-vs-h sweep over a gaussian grid tandem
  AllocationDump,       // final placements of each method at one sweep point
  TandemBoth,           // continuous tandem with arrivals at both caches
  AnalyticVsLocalSwap,  // uniform-demand tandem: closed form vs local swap
  ConstrainedStudy,     // distance-constrained placement on embedding traces
  ShellDensity,         // request density per distance shell of a catalog
};

// One experiment description, loaded from a JSON file. Only the fields used
// by the configured kind are meaningful; load_config fills the rest with
// their defaults.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::TandemSweep;
  std::string output;  // subdirectory under the output root; defaults to the kind name
  int workers = 1;

  // Grid catalog and demand (tandem-sweep, allocation-dump, analytic-vs-localswap).
  std::int64_t side = 0;
  double gamma = 1.0;
  bool torus = false;
  std::vector<double> sigma;  // demand spread; sweep axis for tandem-sweep
  double total_rate = 0.0;

  // Two-cache tandem topology (tandem-sweep, allocation-dump).
  std::vector<std::int64_t> slots{100, 100};
  bool slots_defaulted = true;
  double repository_hop = 0.0;

  std::vector<double> h_values;  // leaf-to-parent hop sweep
  std::vector<std::string> algorithms;
  std::vector<std::uint64_t> seeds;

  NetDuelConfig netduel;
  std::int64_t trace_length = 200000;

  // tandem-both.
  std::vector<double> rates;
  double k1 = 0.0, k2 = 0.0;
  double beta_parent = 0.0;

  // analytic-vs-localswap.
  std::int64_t slots_per_cache = 0;
  std::vector<double> gammas;

  // constrained-study and shell-density.
  ClusteredTraceSpec workload;
  std::vector<double> d_values;
  std::string items_path, events_path;  // ingest mode for shell-density
  double shell_width = 1.0;
};

struct ConfigDiagnostic {
  int line = 0;  // 1-based; 0 when no position applies
  std::string message;
};

struct ConfigCheck {
  bool ok = true;
  std::vector<ConfigDiagnostic> diagnostics;
};

// Schema check of a config file: parse errors, missing or unknown keys (each
// reported individually), empty sweep grids, and dangling file references.
// Never touches anything besides reading the file.
ConfigCheck validate_config(const std::string& path);

// validate_config + construction; throws ParseError carrying the first
// diagnostic's line when the file does not check out.
ExperimentConfig load_config(const std::string& path);

// Reference instances behind the tandem sweep points: a leaf cache, a parent
// cache h hops further along, and a repository at repository_hop. A zero h
// (the co-located parent) is represented by a vanishing positive hop, since
// hop costs must strictly increase along a path.
//
// tandem_sweep_instance: gaussian demand of spread sigma arriving at the leaf
// (uses side, gamma, torus, total_rate, slots, repository_hop).
// tandem_uniform_instance: uniform demand split evenly between arrivals at
// the leaf and at the parent (uses side, torus, total_rate, slots_per_cache,
// repository_hop).
Instance tandem_sweep_instance(const ExperimentConfig& config, double sigma, double h);
Instance tandem_uniform_instance(const ExperimentConfig& config, double gamma, double h);

struct RunReport {
  std::filesystem::path directory;
  std::vector<std::string> outputs;  // file names relative to `directory`
  std::int64_t rows = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // point key -> error
  std::string config_hash;
};

// Executes every sweep point on a bounded worker pool, writes per-point CSV
// files, merges them by sorted key into results.csv, and records provenance
// (config hash, seeds, versions, slot counts, failures) in manifest.json.
// Failed points are recorded and skipped; the run itself still succeeds.
// Output root: explicit argument, else $SIMCACHE_OUTPUT_ROOT, else the
// current directory.
RunReport run_experiment(const ExperimentConfig& config, const std::string& output_root = "");

}  // namespace simcache
