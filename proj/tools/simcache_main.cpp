#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simcache/experiment.hpp"
#include "simcache/instance_io.hpp"
#include "simcache/offline.hpp"

namespace {

using nlohmann::json;
using namespace simcache;

std::vector<double> split_doubles(const std::string& csv, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw InvalidInputError("cannot parse '" + cell + "' in " + what);
    }
  }
  if (out.empty()) throw InvalidInputError(what + " must list at least one number");
  return out;
}

RegionProfile read_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile file " + path, 0);
  RegionProfile profile;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      try {
        profile.rate.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError("not a number: '" + tok + "'", line_no);
      }
    }
  }
  if (profile.rate.empty()) throw ParseError("profile file lists no rates", line_no);
  return profile;
}

RequestTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file " + path, 0);
  RequestTrace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    long long object = 0;
    if (!(ls >> object)) continue;  // blank line
    long long ingress = 0;
    ls >> ingress;
    trace.push_back({static_cast<std::int32_t>(object), static_cast<std::int32_t>(ingress)});
  }
  if (trace.empty()) throw ParseError("trace file lists no requests", line_no);
  return trace;
}

json allocation_json(const Allocation& a) {
  json out = json::array();
  for (const auto& x : a.items) out.push_back({x.object, x.node});
  return out;
}

json solution_json(const ContinuousSolution& sol, bool with_weights) {
  json out;
  out["regions"] = sol.regions;
  out["nodes"] = sol.nodes;
  out["cost"] = sol.cost;
  out["approximation"] = sol.approximation;
  out["retrieval"] = sol.retrieval;
  out["slots"] = sol.slots;
  out["radii"] = sol.radii;
  out["thresholds"] = sol.thresholds;
  out["iterations"] = sol.iterations;
  out["residual"] = sol.residual;
  if (with_weights) out["weights"] = sol.weights;
  return out;
}

void emit(const json& out) { std::cout << out.dump(2) << "\n"; }

int run_command(const std::string& config_path, const std::string& output_root, int workers) {
  const ConfigCheck check = validate_config(config_path);
  if (!check.ok) {
    for (const auto& d : check.diagnostics)
      std::cerr << config_path << ":" << d.line << ": " << d.message << "\n";
    return 1;
  }
  ExperimentConfig cfg = load_config(config_path);
  if (workers > 0) cfg.workers = workers;
  const RunReport report = run_experiment(cfg, output_root);
  for (const auto& [point, error] : report.failures)
    std::cerr << "warning: point '" << point << "' failed: " << error << "\n";
  json out;
  out["directory"] = report.directory.string();
  out["config_hash"] = report.config_hash;
  out["rows"] = report.rows;
  out["outputs"] = report.outputs;
  out["failed_points"] = report.failures.size();
  emit(out);
  const bool all_failed = !report.failures.empty() && report.rows == 0 &&
                          report.outputs.size() <= 1;  // nothing beyond the manifest
  return all_failed ? 2 : 0;
}

int validate_command(const std::string& config_path) {
  const ConfigCheck check = validate_config(config_path);
  if (check.ok) {
    std::cout << config_path << ": ok\n";
    return 0;
  }
  for (const auto& d : check.diagnostics)
    std::cout << config_path << ":" << d.line << ": " << d.message << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"similarity-cache placement toolkit"};
  app.require_subcommand(1);

  // run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "execute an experiment config");
  std::string run_config;
  std::string output_root;
  int run_workers = 0;
  run->add_option("config", run_config, "experiment config (JSON)")->required();
  run->add_option("--output-root", output_root,
                  "directory for experiment outputs (default: $" + std::string(kOutputRootEnv) +
                      " or the working directory)");
  run->add_option("--workers", run_workers, "override the worker pool size");

  // validate -----------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "check an experiment config");
  std::string validate_config_path;
  validate->add_option("config", validate_config_path, "experiment config (JSON)")->required();

  // place --------------------------------------------------------------
  auto* place = app.add_subcommand("place", "offline placement on an instance file");
  std::string place_algo, place_instance, place_init, place_out, place_dump;
  std::int64_t max_combinations = 10'000'000;
  std::int64_t place_sweeps = 0;
  std::uint64_t place_seed = 0;
  place->add_option("algorithm", place_algo, "greedy | localswap | cascade | bruteforce")
      ->required()
      ->check(CLI::IsMember({"greedy", "localswap", "cascade", "bruteforce"}));
  place->add_option("--instance", place_instance, "instance file")->required();
  place->add_option("--init", place_init, "starting allocation file (localswap)");
  place->add_option("--out", place_out, "write the final allocation here");
  place->add_option("--sweeps", place_sweeps, "stop localswap after this many sweeps");
  place->add_option("--seed", place_seed, "seed for completing a partial start");
  place->add_option("--max-combinations", max_combinations, "bruteforce enumeration cap");
  place->add_option("--dump", place_dump, "re-serialize the parsed instance (inlines payloads)");

  // cont ---------------------------------------------------------------
  auto* cont = app.add_subcommand("cont", "continuous-approximation solvers");
  cont->require_subcommand(1);
  std::string profile_path;
  double gamma = 1.0;
  bool with_weights = false;

  auto* single = cont->add_subcommand("single", "one cache against a far repository");
  double single_k = 0.0;
  single->add_option("--profile", profile_path, "region rates (CSV)")->required();
  single->add_option("--gamma", gamma, "dissimilarity exponent");
  single->add_option("--k", single_k, "cache size")->required();

  auto* chain = cont->add_subcommand("chain", "a chain of caches in front of a repository");
  std::string chain_sizes, chain_hops;
  std::string chain_solver = "threshold";
  chain->add_option("--profile", profile_path, "region rates (CSV)")->required();
  chain->add_option("--gamma", gamma, "dissimilarity exponent");
  chain->add_option("--sizes", chain_sizes, "cache sizes, leaf first (comma separated)")
      ->required();
  chain->add_option("--hops", chain_hops,
                    "cumulative retrieval costs incl. the repository (comma separated)")
      ->required();
  chain->add_option("--solver", chain_solver, "threshold | fista")
      ->check(CLI::IsMember({"threshold", "fista"}));
  chain->add_flag("--weights", with_weights, "include per-region weights in the output");

  auto* tree = cont->add_subcommand("tree", "equal-depth tree of caches");
  std::string tree_sizes, tree_hops, tree_beta;
  std::int64_t tree_depth = 0;
  tree->add_option("--profile", profile_path, "region rates (CSV)")->required();
  tree->add_option("--gamma", gamma, "dissimilarity exponent");
  tree->add_option("--sizes", tree_sizes, "per-level cache sizes, leaf first")->required();
  tree->add_option("--hops", tree_hops, "cumulative per-level costs incl. the root repository")
      ->required();
  tree->add_option("--depth", tree_depth, "leaf depth")->required();
  tree->add_option("--beta", tree_beta, "per-leaf arrival scales (comma separated)")->required();

  auto* tandem = cont->add_subcommand("tandem", "two caches with arrivals at both");
  double k1 = 0.0, k2 = 0.0, tandem_h = 0.0, beta_parent = 0.0;
  tandem->add_option("--profile", profile_path, "region rates (CSV)")->required();
  tandem->add_option("--gamma", gamma, "dissimilarity exponent");
  tandem->add_option("--k1", k1, "leaf cache size")->required();
  tandem->add_option("--k2", k2, "parent cache size")->required();
  tandem->add_option("--hop", tandem_h, "leaf-to-parent retrieval cost")->required();
  tandem->add_option("--beta-parent", beta_parent, "parent arrival scale");
  tandem->add_flag("--weights", with_weights, "include per-region weights in the output");

  // online ---------------------------------------------------------------
  auto* online = app.add_subcommand("online", "trace-driven policies");
  online->require_subcommand(1);
  auto* netduel = online->add_subcommand("netduel", "per-slot challenger policy");
  std::string nd_instance, nd_trace, nd_initial, nd_out_alloc, nd_out_costs;
  NetDuelConfig nd_config;
  std::string nd_rule = "arrival";
  netduel->add_option("--instance", nd_instance, "instance file")->required();
  netduel->add_option("--trace", nd_trace, "request trace (object[,ingress] per line)")
      ->required();
  netduel->add_option("--initial", nd_initial, "starting allocation file");
  netduel->add_option("--window", nd_config.window, "duel observation window (requests)");
  netduel->add_option("--margin", nd_config.margin, "relative saving a challenger must exceed");
  netduel->add_option("--rule", nd_rule, "challenger recruitment: arrival | none")
      ->check(CLI::IsMember({"arrival", "none"}));
  netduel->add_option("--out-allocation", nd_out_alloc, "write the final allocation here");
  netduel->add_option("--out-costs", nd_out_costs, "write per-window mean serve costs here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(run_config, output_root, run_workers);
    if (*validate) return validate_command(validate_config_path);

    if (*place) {
      const Instance inst = read_instance(place_instance);
      if (!place_dump.empty()) write_instance(inst, place_dump);
      Allocation result;
      json out;
      out["algorithm"] = place_algo;
      if (place_algo == "greedy") {
        const GreedyResult r = greedy_place(inst);
        result = r.allocation;
        out["cost"] = r.cost;
        out["complete"] = r.complete;
        out["steps"] = r.steps.size();
      } else if (place_algo == "localswap") {
        const Allocation init = place_init.empty() ? Allocation{} : read_allocation(place_init);
        const StopRule stop =
            place_sweeps > 0 ? StopRule::sweeps(place_sweeps) : StopRule::converged();
        const LocalSwapResult r = local_swap(inst, init, {}, stop, place_seed);
        result = r.allocation;
        out["cost"] = r.cost;
        out["converged"] = r.converged;
        out["sweeps"] = r.sweeps;
        out["moves"] = r.trace.size();
      } else if (place_algo == "cascade") {
        const CascadeResult r = cascade_place(inst);
        result = r.allocation;
        out["cost"] = r.cost;
        out["greedy_cost"] = r.greedy.cost;
        out["swaps"] = r.swaps.size();
      } else {
        BruteForceLimits limits;
        limits.max_combinations = max_combinations;
        const BruteForceResult r = brute_force_optimal(inst, limits);
        result = r.allocation;
        out["cost"] = r.cost;
        out["combinations"] = r.combinations;
      }
      out["allocation"] = allocation_json(result);
      if (!place_out.empty()) write_allocation(result, place_out);
      emit(out);
      return 0;
    }

    if (*cont) {
      const RegionProfile profile = read_profile(profile_path);
      json out;
      out["gamma"] = gamma;
      if (*single) {
        const SingleCacheResult r = single_cache_opt(profile, single_k, gamma);
        out["kind"] = "single";
        out["k"] = single_k;
        out["cost"] = r.cost;
        out["slots"] = r.slots;
      } else if (*chain) {
        ChainSpec spec;
        spec.size = split_doubles(chain_sizes, "--sizes");
        spec.hop = split_doubles(chain_hops, "--hops");
        spec.gamma = gamma;
        spec.repository_last = true;
        spec.size.push_back(0.0);  // the repository's size entry is ignored
        const ContinuousSolution sol = chain_solver == "threshold"
                                           ? chain_threshold_solve(profile, spec)
                                           : chain_solve(profile, spec);
        out = solution_json(sol, with_weights);
        out["kind"] = "chain";
        out["gamma"] = gamma;
        out["solver"] = chain_solver;
      } else if (*tree) {
        TreeSpec spec;
        spec.chain.size = split_doubles(tree_sizes, "--sizes");
        spec.chain.hop = split_doubles(tree_hops, "--hops");
        spec.chain.gamma = gamma;
        spec.chain.repository_last = true;
        spec.chain.size.push_back(0.0);
        spec.beta = split_doubles(tree_beta, "--beta");
        spec.leaf_depth.assign(spec.beta.size(), tree_depth);
        const TreeResult r = equidepth_tree_solve(profile, spec);
        out["kind"] = "tree";
        out["gamma"] = gamma;
        out["leaves"] = spec.beta.size();
        out["depth"] = tree_depth;
        out["total_cost"] = r.total_cost;
        out["level_cost"] = r.level.cost;
        out["level_slots"] = r.level.slots;
      } else {
        TandemSpec spec;
        spec.k1 = k1;
        spec.k2 = k2;
        spec.h = tandem_h;
        spec.beta_parent = beta_parent;
        spec.gamma = gamma;
        const TandemSolveResult r = tandem_both_solve(profile, spec);
        out["kind"] = "tandem";
        out["cost"] = r.cost;
        out["converged"] = r.converged;
        out["iterations"] = r.iterations;
        out["residual"] = r.residual;
        if (with_weights) out["weights"] = r.weights;
      }
      emit(out);
      return 0;
    }

    if (*online) {
      const Instance inst = read_instance(nd_instance);
      const RequestTrace trace = read_trace(nd_trace);
      const Allocation initial =
          nd_initial.empty() ? Allocation{} : read_allocation(nd_initial);
      nd_config.rule = nd_rule == "none" ? CandidateRule::None : CandidateRule::Arrival;
      const NetDuelRunResult r = netduel_run(inst, trace, nd_config, initial);
      if (!nd_out_alloc.empty()) write_allocation(r.allocation, nd_out_alloc);
      if (!nd_out_costs.empty()) {
        std::ofstream costs(nd_out_costs, std::ios::binary);
        if (!costs) throw Error("cannot write " + nd_out_costs);
        costs << "window,mean_cost\n";
        for (std::size_t w = 0; w < r.window_cost.size(); ++w) {
          char buf[64];
          auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), r.window_cost[w]);
          costs << w << "," << std::string_view(buf, p - buf) << "\n";
        }
      }
      json out;
      out["requests"] = trace.size();
      out["final_cost"] = r.final_cost;
      out["swaps"] = r.swaps.size();
      out["windows"] = r.window_cost.size();
      out["allocation"] = allocation_json(r.allocation);
      emit(out);
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what();
    if (e.line > 0) std::cerr << " (line " << e.line << ")";
    std::cerr << "\n";
    return 1;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidInstanceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidConstraintError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CombinatorialSizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
