#include "simcache/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "simcache/offline.hpp"

namespace simcache {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

int line_of_offset(const std::string& text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

// 1-based line of the first occurrence of a quoted key, 0 when absent. Keys
// in the schema are distinct enough that the first hit is the right one.
int find_key_line(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  const std::size_t pos = text.find(needle);
  if (pos == std::string::npos) return 0;
  return line_of_offset(text, pos);
}

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::TandemSweep: return "tandem-sweep";
    case ExperimentKind::AllocationDump: return "allocation-dump";
    case ExperimentKind::TandemBoth: return "tandem-both";
    case ExperimentKind::AnalyticVsLocalSwap: return "analytic-vs-localswap";
    case ExperimentKind::ConstrainedStudy: return "constrained-study";
    case ExperimentKind::ShellDensity: return "shell-density";
  }
  return "?";
}

// Collects schema diagnostics against the raw text (for line numbers) and
// fills the typed config as it walks.
struct Checker {
  const std::string& text;
  std::vector<ConfigDiagnostic>& out;

  void fail(const std::string& key, const std::string& message) {
    out.push_back({find_key_line(text, key), message});
  }

  void unknown_keys(const json& obj, const std::string& scope,
                    std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
      bool known = false;
      for (const char* a : allowed)
        if (key == a) known = true;
      if (!known) fail(key, "unknown key '" + scope + key + "'");
    }
  }

  const json* get(const json& obj, const std::string&, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
  }

  const json* need(const json& obj, const std::string& scope, const char* key,
                   const std::string& anchor) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      out.push_back({find_key_line(text, anchor), "missing required key '" + scope + key + "'"});
      return nullptr;
    }
    return &*it;
  }

  bool number(const json* v, const std::string& key, double& into, double lo = -kInf) {
    if (!v) return false;
    if (!v->is_number()) {
      fail(key, "'" + key + "' must be a number");
      return false;
    }
    into = v->get<double>();
    if (!(into >= lo)) {
      fail(key, "'" + key + "' must be >= " + fmt_double(lo));
      return false;
    }
    return true;
  }

  bool integer(const json* v, const std::string& key, std::int64_t& into, std::int64_t lo) {
    if (!v) return false;
    if (!v->is_number_integer()) {
      fail(key, "'" + key + "' must be an integer");
      return false;
    }
    into = v->get<std::int64_t>();
    if (into < lo) {
      fail(key, "'" + key + "' must be >= " + std::to_string(lo));
      return false;
    }
    return true;
  }

  bool boolean(const json* v, const std::string& key, bool& into) {
    if (!v) return false;
    if (!v->is_boolean()) {
      fail(key, "'" + key + "' must be a boolean");
      return false;
    }
    into = v->get<bool>();
    return true;
  }

  bool text_field(const json* v, const std::string& key, std::string& into) {
    if (!v) return false;
    if (!v->is_string()) {
      fail(key, "'" + key + "' must be a string");
      return false;
    }
    into = v->get<std::string>();
    return true;
  }

  bool number_array(const json* v, const std::string& key, std::vector<double>& into,
                    double lo = -kInf) {
    if (!v) return false;
    if (!v->is_array() || v->empty()) {
      fail(key, "'" + key + "' must be a non-empty array");
      return false;
    }
    into.clear();
    for (const auto& e : *v) {
      if (!e.is_number() || !(e.get<double>() >= lo)) {
        fail(key, "'" + key + "' entries must be numbers >= " + fmt_double(lo));
        return false;
      }
      into.push_back(e.get<double>());
    }
    return true;
  }

  bool integer_array(const json* v, const std::string& key, std::vector<std::int64_t>& into,
                     std::int64_t lo) {
    if (!v) return false;
    if (!v->is_array() || v->empty()) {
      fail(key, "'" + key + "' must be a non-empty array");
      return false;
    }
    into.clear();
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() < lo) {
        fail(key, "'" + key + "' entries must be integers >= " + std::to_string(lo));
        return false;
      }
      into.push_back(e.get<std::int64_t>());
    }
    return true;
  }
};

void check_grid(Checker& ck, const json& root, ExperimentConfig& cfg, bool fixed_gamma) {
  const json* grid = ck.need(root, "", "grid", "kind");
  if (!grid) return;
  if (!grid->is_object()) {
    ck.fail("grid", "'grid' must be an object");
    return;
  }
  if (fixed_gamma)
    ck.unknown_keys(*grid, "grid.", {"side", "torus"});
  else
    ck.unknown_keys(*grid, "grid.", {"side", "gamma", "torus"});
  ck.integer(ck.need(*grid, "grid.", "side", "grid"), "side", cfg.side, 1);
  if (!fixed_gamma)
    if (const json* g = ck.get(*grid, "grid.", "gamma")) ck.number(g, "gamma", cfg.gamma, 0.0);
  if (const json* t = ck.get(*grid, "grid.", "torus")) ck.boolean(t, "torus", cfg.torus);
}

void check_topology(Checker& ck, const json& root, ExperimentConfig& cfg) {
  const json* topo = ck.need(root, "", "topology", "kind");
  if (!topo) return;
  if (!topo->is_object()) {
    ck.fail("topology", "'topology' must be an object");
    return;
  }
  ck.unknown_keys(*topo, "topology.", {"slots", "repository_hop"});
  if (const json* s = ck.get(*topo, "topology.", "slots")) {
    if (ck.integer_array(s, "slots", cfg.slots, 1)) {
      cfg.slots_defaulted = false;
      if (cfg.slots.size() != 2) ck.fail("slots", "'slots' must list exactly two cache sizes");
    }
  }
  ck.number(ck.need(*topo, "topology.", "repository_hop", "topology"), "repository_hop",
            cfg.repository_hop, 1e-12);
}

void check_netduel(Checker& ck, const json& root, ExperimentConfig& cfg) {
  const json* nd = ck.get(root, "", "netduel");
  if (!nd) return;
  if (!nd->is_object()) {
    ck.fail("netduel", "'netduel' must be an object");
    return;
  }
  ck.unknown_keys(*nd, "netduel.", {"window", "margin", "trace_length"});
  if (const json* w = ck.get(*nd, "netduel.", "window"))
    ck.integer(w, "window", cfg.netduel.window, 1);
  if (const json* m = ck.get(*nd, "netduel.", "margin")) ck.number(m, "margin", cfg.netduel.margin, 0.0);
  if (const json* t = ck.get(*nd, "netduel.", "trace_length"))
    ck.integer(t, "trace_length", cfg.trace_length, 1);
}

void check_algorithms(Checker& ck, const json& root, ExperimentConfig& cfg) {
  const json* algos = ck.need(root, "", "algorithms", "kind");
  if (!algos) return;
  if (!algos->is_array() || algos->empty()) {
    ck.fail("algorithms", "'algorithms' must be a non-empty array");
    return;
  }
  cfg.algorithms.clear();
  for (const auto& a : *algos) {
    const std::string name = a.is_string() ? a.get<std::string>() : std::string();
    if (name != "greedy" && name != "localswap" && name != "continuous" && name != "netduel") {
      ck.fail("algorithms", "unknown algorithm '" + name + "'");
      continue;
    }
    cfg.algorithms.push_back(name);
  }
}

void check_seeds(Checker& ck, const json& root, ExperimentConfig& cfg) {
  std::vector<std::int64_t> raw;
  if (ck.integer_array(ck.need(root, "", "seeds", "kind"), "seeds", raw, 0)) {
    cfg.seeds.assign(raw.begin(), raw.end());
  }
}

void check_workload(Checker& ck, const json& root, ExperimentConfig& cfg) {
  const json* w = ck.get(root, "", "workload");
  if (!w) return;
  if (!w->is_object()) {
    ck.fail("workload", "'workload' must be an object");
    return;
  }
  ck.unknown_keys(*w, "workload.", {"items", "events", "dim", "clusters", "cluster_separation",
                                    "cluster_sigma", "decay_sigma", "duration"});
  if (const json* v = ck.get(*w, "workload.", "items")) ck.integer(v, "items", cfg.workload.items, 1);
  if (const json* v = ck.get(*w, "workload.", "events")) ck.integer(v, "events", cfg.workload.events, 1);
  if (const json* v = ck.get(*w, "workload.", "dim")) ck.integer(v, "dim", cfg.workload.dim, 1);
  if (const json* v = ck.get(*w, "workload.", "clusters"))
    ck.integer(v, "clusters", cfg.workload.clusters, 1);
  if (const json* v = ck.get(*w, "workload.", "cluster_separation"))
    ck.number(v, "cluster_separation", cfg.workload.cluster_separation, 0.0);
  if (const json* v = ck.get(*w, "workload.", "cluster_sigma"))
    ck.number(v, "cluster_sigma", cfg.workload.cluster_sigma, 0.0);
  if (const json* v = ck.get(*w, "workload.", "decay_sigma"))
    ck.number(v, "decay_sigma", cfg.workload.decay_sigma, 0.0);
  if (const json* v = ck.get(*w, "workload.", "duration"))
    ck.number(v, "duration", cfg.workload.duration, 0.0);
}

void check_h_within_repo(Checker& ck, const ExperimentConfig& cfg) {
  for (double h : cfg.h_values)
    if (h >= cfg.repository_hop) {
      ck.fail("h_values", "'h_values' must stay below repository_hop");
      return;
    }
}

ConfigCheck check_impl(const std::string& path, ExperimentConfig& cfg) {
  ConfigCheck result;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    result.ok = false;
    result.diagnostics.push_back({0, "cannot open config file: " + path});
    return result;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    result.ok = false;
    result.diagnostics.push_back({line_of_offset(text, e.byte), e.what()});
    return result;
  }
  if (!root.is_object()) {
    result.ok = false;
    result.diagnostics.push_back({1, "config must be a JSON object"});
    return result;
  }

  Checker ck{text, result.diagnostics};

  std::string kind_str;
  if (!ck.text_field(ck.need(root, "", "kind", "kind"), "kind", kind_str)) {
    result.ok = false;
    return result;
  }
  bool known_kind = false;
  for (auto k : {ExperimentKind::TandemSweep, ExperimentKind::AllocationDump,
                 ExperimentKind::TandemBoth, ExperimentKind::AnalyticVsLocalSwap,
                 ExperimentKind::ConstrainedStudy, ExperimentKind::ShellDensity})
    if (kind_str == kind_name(k)) {
      cfg.kind = k;
      known_kind = true;
    }
  if (!known_kind) {
    ck.fail("kind", "unknown experiment kind '" + kind_str + "'");
    result.ok = false;
    return result;
  }
  cfg.output = kind_str;

  if (const json* o = ck.get(root, "", "output")) ck.text_field(o, "output", cfg.output);
  if (const json* w = ck.get(root, "", "workers")) {
    std::int64_t n = 1;
    if (ck.integer(w, "workers", n, 1)) cfg.workers = static_cast<int>(n);
  }

  switch (cfg.kind) {
    case ExperimentKind::TandemSweep: {
      ck.unknown_keys(root, "", {"kind", "output", "workers", "grid", "demand", "topology",
                                 "h_values", "algorithms", "seeds", "netduel"});
      check_grid(ck, root, cfg, false);
      if (const json* demand = ck.need(root, "", "demand", "kind")) {
        if (demand->is_object()) {
          ck.unknown_keys(*demand, "demand.", {"sigma", "total_rate"});
          ck.number_array(ck.need(*demand, "demand.", "sigma", "demand"), "sigma", cfg.sigma, 1e-12);
          ck.number(ck.need(*demand, "demand.", "total_rate", "demand"), "total_rate",
                    cfg.total_rate, 0.0);
        } else {
          ck.fail("demand", "'demand' must be an object");
        }
      }
      check_topology(ck, root, cfg);
      ck.number_array(ck.need(root, "", "h_values", "kind"), "h_values", cfg.h_values, 0.0);
      check_algorithms(ck, root, cfg);
      check_seeds(ck, root, cfg);
      check_netduel(ck, root, cfg);
      check_h_within_repo(ck, cfg);
      break;
    }
    case ExperimentKind::AllocationDump: {
      ck.unknown_keys(root, "", {"kind", "output", "workers", "grid", "demand", "topology", "h",
                                 "algorithms", "seeds", "netduel"});
      check_grid(ck, root, cfg, false);
      if (const json* demand = ck.need(root, "", "demand", "kind")) {
        if (demand->is_object()) {
          ck.unknown_keys(*demand, "demand.", {"sigma", "total_rate"});
          double s = 0.0;
          if (ck.number(ck.need(*demand, "demand.", "sigma", "demand"), "sigma", s, 1e-12))
            cfg.sigma = {s};
          ck.number(ck.need(*demand, "demand.", "total_rate", "demand"), "total_rate",
                    cfg.total_rate, 0.0);
        } else {
          ck.fail("demand", "'demand' must be an object");
        }
      }
      check_topology(ck, root, cfg);
      double h = 0.0;
      if (ck.number(ck.need(root, "", "h", "kind"), "h", h, 0.0)) cfg.h_values = {h};
      check_algorithms(ck, root, cfg);
      check_seeds(ck, root, cfg);
      check_netduel(ck, root, cfg);
      check_h_within_repo(ck, cfg);
      break;
    }
    case ExperimentKind::TandemBoth: {
      ck.unknown_keys(root, "",
                      {"kind", "output", "workers", "rates", "k1", "k2", "beta_parent", "gamma",
                       "h_values"});
      ck.number_array(ck.need(root, "", "rates", "kind"), "rates", cfg.rates, 0.0);
      ck.number(ck.need(root, "", "k1", "kind"), "k1", cfg.k1, 1e-12);
      ck.number(ck.need(root, "", "k2", "kind"), "k2", cfg.k2, 1e-12);
      if (const json* b = ck.get(root, "", "beta_parent"))
        ck.number(b, "beta_parent", cfg.beta_parent, 0.0);
      if (const json* g = ck.get(root, "", "gamma")) ck.number(g, "gamma", cfg.gamma, 0.0);
      ck.number_array(ck.need(root, "", "h_values", "kind"), "h_values", cfg.h_values, 0.0);
      break;
    }
    case ExperimentKind::AnalyticVsLocalSwap: {
      ck.unknown_keys(root, "", {"kind", "output", "workers", "grid", "slots", "total_rate",
                                 "gammas", "h_values", "repository_hop"});
      check_grid(ck, root, cfg, true);
      cfg.torus = true;
      if (const json* grid = ck.get(root, "", "grid"))
        if (grid->is_object())
          if (const json* t = ck.get(*grid, "grid.", "torus")) ck.boolean(t, "torus", cfg.torus);
      ck.integer(ck.need(root, "", "slots", "kind"), "slots", cfg.slots_per_cache, 1);
      ck.number(ck.need(root, "", "total_rate", "kind"), "total_rate", cfg.total_rate, 0.0);
      ck.number_array(ck.need(root, "", "gammas", "kind"), "gammas", cfg.gammas, 1e-12);
      ck.number_array(ck.need(root, "", "h_values", "kind"), "h_values", cfg.h_values, 0.0);
      ck.number(ck.need(root, "", "repository_hop", "kind"), "repository_hop", cfg.repository_hop,
                1e-12);
      check_h_within_repo(ck, cfg);
      break;
    }
    case ExperimentKind::ConstrainedStudy: {
      ck.unknown_keys(root, "", {"kind", "output", "workers", "workload", "gamma", "slots",
                                 "repository_hop", "total_rate", "d_values", "seeds"});
      check_workload(ck, root, cfg);
      if (const json* g = ck.get(root, "", "gamma")) ck.number(g, "gamma", cfg.gamma, 0.0);
      ck.integer(ck.need(root, "", "slots", "kind"), "slots", cfg.slots_per_cache, 1);
      ck.number(ck.need(root, "", "repository_hop", "kind"), "repository_hop", cfg.repository_hop,
                1e-12);
      ck.number(ck.need(root, "", "total_rate", "kind"), "total_rate", cfg.total_rate, 0.0);
      ck.number_array(ck.need(root, "", "d_values", "kind"), "d_values", cfg.d_values, 0.0);
      check_seeds(ck, root, cfg);
      break;
    }
    case ExperimentKind::ShellDensity: {
      ck.unknown_keys(root, "", {"kind", "output", "workers", "items", "events", "workload",
                                 "seed", "width"});
      const json* items = ck.get(root, "", "items");
      const json* events = ck.get(root, "", "events");
      if ((items == nullptr) != (events == nullptr)) {
        ck.fail(items ? "items" : "events", "'items' and 'events' must be given together");
      } else if (items) {
        ck.text_field(items, "items", cfg.items_path);
        ck.text_field(events, "events", cfg.events_path);
        const fs::path base = fs::path(path).parent_path();
        for (auto* field : {&cfg.items_path, &cfg.events_path}) {
          if (field->empty()) continue;
          fs::path p = base / *field;
          if (!fs::exists(p))
            ck.fail(field == &cfg.items_path ? "items" : "events",
                    "file not found: " + p.string());
          else
            *field = fs::absolute(p).string();
        }
        if (root.contains("workload") || root.contains("seed"))
          ck.fail("workload", "'workload'/'seed' do not apply when ingesting files");
      } else {
        check_workload(ck, root, cfg);
        if (const json* s = ck.get(root, "", "seed")) {
          std::int64_t seed = 1;
          if (ck.integer(s, "seed", seed, 0)) cfg.workload.seed = static_cast<std::uint64_t>(seed);
        }
      }
      if (const json* w = ck.get(root, "", "width")) ck.number(w, "width", cfg.shell_width, 1e-12);
      break;
    }
  }

  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const ConfigDiagnostic& a, const ConfigDiagnostic& b) { return a.line < b.line; });
  result.ok = result.diagnostics.empty();
  return result;
}

// ---------------------------------------------------------------------------
// Run phase.

json canonical_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = kind_name(c.kind);
  switch (c.kind) {
    case ExperimentKind::TandemSweep:
    case ExperimentKind::AllocationDump:
      j["grid"] = {{"side", c.side}, {"gamma", c.gamma}, {"torus", c.torus}};
      j["demand"] = {{"sigma", c.sigma}, {"total_rate", c.total_rate}};
      j["topology"] = {{"slots", c.slots}, {"repository_hop", c.repository_hop}};
      j["h_values"] = c.h_values;
      j["algorithms"] = c.algorithms;
      j["seeds"] = c.seeds;
      j["netduel"] = {{"window", c.netduel.window},
                      {"margin", c.netduel.margin},
                      {"trace_length", c.trace_length}};
      break;
    case ExperimentKind::TandemBoth:
      j["rates"] = c.rates;
      j["k1"] = c.k1;
      j["k2"] = c.k2;
      j["beta_parent"] = c.beta_parent;
      j["gamma"] = c.gamma;
      j["h_values"] = c.h_values;
      break;
    case ExperimentKind::AnalyticVsLocalSwap:
      j["grid"] = {{"side", c.side}, {"torus", c.torus}};
      j["slots"] = c.slots_per_cache;
      j["total_rate"] = c.total_rate;
      j["gammas"] = c.gammas;
      j["h_values"] = c.h_values;
      j["repository_hop"] = c.repository_hop;
      break;
    case ExperimentKind::ConstrainedStudy:
      j["workload"] = {{"items", c.workload.items},
                       {"events", c.workload.events},
                       {"dim", c.workload.dim},
                       {"clusters", c.workload.clusters},
                       {"cluster_separation", c.workload.cluster_separation},
                       {"cluster_sigma", c.workload.cluster_sigma},
                       {"decay_sigma", c.workload.decay_sigma},
                       {"duration", c.workload.duration}};
      j["gamma"] = c.gamma;
      j["slots"] = c.slots_per_cache;
      j["repository_hop"] = c.repository_hop;
      j["total_rate"] = c.total_rate;
      j["d_values"] = c.d_values;
      j["seeds"] = c.seeds;
      break;
    case ExperimentKind::ShellDensity:
      if (!c.items_path.empty()) {
        j["items"] = c.items_path;
        j["events"] = c.events_path;
      } else {
        j["workload"] = {{"items", c.workload.items},
                         {"events", c.workload.events},
                         {"dim", c.workload.dim},
                         {"clusters", c.workload.clusters},
                         {"cluster_separation", c.workload.cluster_separation},
                         {"cluster_sigma", c.workload.cluster_sigma},
                         {"decay_sigma", c.workload.decay_sigma},
                         {"duration", c.workload.duration}};
        j["seed"] = c.workload.seed;
      }
      j["width"] = c.shell_width;
      break;
  }
  return j;
}

// Hop costs along a path must strictly increase, so a co-located parent
// (h = 0) is represented by a vanishing positive hop: the true h -> 0 limit,
// which still keeps the parent's slots distinct from the leaf's.
constexpr double kCoLocatedHop = 1e-9;

}  // namespace

Instance tandem_sweep_instance(const ExperimentConfig& c, double sigma, double h) {
  if (h == 0.0) h = kCoLocatedHop;
  Instance inst;
  inst.space = grid_object_space(c.side, c.gamma, c.torus);
  inst.demand = gaussian_grid_demand(c.side, c.side * c.side, sigma, c.total_rate);
  inst.topology = Topology::make(3);
  inst.topology.capacity = {c.slots[0], c.slots[1], 0};
  inst.topology.is_repository = {0, 0, 1};
  inst.topology.set_hop(0, 1, h);
  inst.topology.set_hop(0, 2, c.repository_hop);
  inst.topology.set_hop(1, 2, c.repository_hop - h);
  inst.topology.path[0] = {0, 1, 2};
  inst.topology.path[1] = {1, 2};
  for (std::int32_t o = 0; o < inst.space.object_count; ++o) inst.repository_seeds.push_back({o, 2});
  return inst;
}

Instance tandem_uniform_instance(const ExperimentConfig& c, double gamma, double h) {
  if (h == 0.0) h = kCoLocatedHop;
  Instance inst;
  inst.space = grid_object_space(c.side, gamma, c.torus);
  const std::int64_t m = c.side * c.side;
  inst.topology = Topology::make(3);
  inst.topology.capacity = {c.slots_per_cache, c.slots_per_cache, 0};
  inst.topology.is_repository = {0, 0, 1};
  inst.topology.set_hop(0, 1, h);
  inst.topology.set_hop(0, 2, c.repository_hop);
  inst.topology.set_hop(1, 2, c.repository_hop - h);
  inst.topology.path[0] = {0, 1, 2};
  inst.topology.path[1] = {1, 2};
  const double rate = c.total_rate / static_cast<double>(2 * m);
  for (std::int32_t o = 0; o < m; ++o) {
    inst.demand.entries.push_back({o, 0, rate});
    inst.demand.entries.push_back({o, 1, rate});
    inst.repository_seeds.push_back({o, 2});
  }
  return inst;
}

namespace {

RegionProfile cell_profile(const Instance& inst) {
  RegionProfile profile;
  profile.rate.assign(inst.space.object_count, 0.0);
  for (const auto& e : inst.demand.entries) profile.rate[e.object] += e.rate;
  return profile;
}

ContinuousSolution continuous_solution(const ExperimentConfig& c, const Instance& inst, double h) {
  ChainSpec spec;
  spec.size = {static_cast<double>(c.slots[0]), static_cast<double>(c.slots[1]), 0.0};
  spec.hop = {0.0, h, c.repository_hop};
  spec.gamma = c.gamma;
  spec.repository_last = true;
  return chain_threshold_solve(cell_profile(inst), spec);
}

double sweep_cost(const ExperimentConfig& c, const std::string& algorithm, double sigma, double h,
                  std::uint64_t seed) {
  const Instance inst = tandem_sweep_instance(c, sigma, h);
  if (algorithm == "greedy") return greedy_place(inst).cost;
  if (algorithm == "localswap") return local_swap(inst, {}, {}, StopRule::converged()).cost;
  if (algorithm == "continuous") return continuous_solution(c, inst, h).cost;
  const RequestTrace trace = sample_trace_count(inst.demand, c.trace_length, seed).flatten();
  NetDuelConfig nd = c.netduel;
  return netduel_run(inst, trace, nd).final_cost;
}

std::string csv_header(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::TandemSweep:
    case ExperimentKind::TandemBoth: return "algorithm,h,sigma,seed,cost";
    case ExperimentKind::AnalyticVsLocalSwap: return "algorithm,h,gamma,seed,cost";
    case ExperimentKind::ConstrainedStudy: return "algorithm,d,seed,cost";
    case ExperimentKind::ShellDensity: return "rho,items,requests,density";
    case ExperimentKind::AllocationDump: return "";
  }
  return "";
}

struct Job {
  std::string key;    // sorted merge key; also the point file stem
  std::string label;  // human-readable point description for the manifest
  std::function<std::vector<std::string>()> run;
};

std::string point_key(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%06zu", index);
  return std::string(buf);
}

void write_lines(const fs::path& file, const std::vector<std::string>& lines) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  for (const auto& l : lines) out << l << "\n";
}

double norm2_distance(const double* a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < b.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

std::vector<Job> build_jobs(const ExperimentConfig& c, const fs::path& dir,
                            std::vector<std::string>& extra_outputs) {
  std::vector<Job> jobs;
  auto add = [&jobs](std::string label, std::function<std::vector<std::string>()> fn) {
    jobs.push_back({point_key(jobs.size()), std::move(label), std::move(fn)});
  };

  switch (c.kind) {
    case ExperimentKind::TandemSweep: {
      for (double h : c.h_values)
        for (double sigma : c.sigma)
          for (std::uint64_t seed : c.seeds)
            for (const std::string& algorithm : c.algorithms)
              add(algorithm + " h=" + fmt_double(h) + " sigma=" + fmt_double(sigma) +
                      " seed=" + std::to_string(seed),
                  [&c, h, sigma, seed, algorithm] {
                    const double cost = sweep_cost(c, algorithm, sigma, h, seed);
                    return std::vector<std::string>{algorithm + "," + fmt_double(h) + "," +
                                                    fmt_double(sigma) + "," + std::to_string(seed) +
                                                    "," + fmt_double(cost)};
                  });
      break;
    }
    case ExperimentKind::AllocationDump: {
      const double h = c.h_values[0];
      const double sigma = c.sigma[0];
      for (const std::string& algorithm : c.algorithms) {
        const std::string file = "allocation_" + algorithm + ".csv";
        extra_outputs.push_back(file);
        add(algorithm + " dump", [&c, h, sigma, algorithm, file, &dir_ = dir] {
          const Instance inst = tandem_sweep_instance(c, sigma, h);
          std::vector<std::string> lines;
          if (algorithm == "continuous") {
            const ContinuousSolution sol = continuous_solution(c, inst, h);
            lines.push_back("region,row,col,rate,w_leaf,w_parent,owner");
            const RegionProfile profile = cell_profile(inst);
            for (std::int64_t i = 0; i < sol.regions; ++i) {
              const double* pt = inst.space.point(i);
              const double w_leaf = sol.weights[i * sol.nodes + 0];
              const double w_parent = sol.weights[i * sol.nodes + 1];
              lines.push_back(std::to_string(i) + "," + fmt_double(pt[0]) + "," +
                              fmt_double(pt[1]) + "," + fmt_double(profile.rate[i]) + "," +
                              fmt_double(w_leaf) + "," + fmt_double(w_parent) + "," +
                              (w_parent > w_leaf ? "parent" : "leaf"));
            }
          } else {
            Allocation a;
            if (algorithm == "greedy") {
              a = greedy_place(inst).allocation;
            } else if (algorithm == "localswap") {
              a = local_swap(inst, {}, {}, StopRule::converged()).allocation;
            } else {
              const RequestTrace trace =
                  sample_trace_count(inst.demand, c.trace_length, c.seeds[0]).flatten();
              a = netduel_run(inst, trace, c.netduel).allocation;
            }
            std::vector<Approximizer> items = a.items;
            std::sort(items.begin(), items.end(), [](const Approximizer& l, const Approximizer& r) {
              return std::pair(l.node, l.object) < std::pair(r.node, r.object);
            });
            lines.push_back("node,object,row,col");
            for (const auto& x : items) {
              const double* pt = inst.space.point(x.object);
              lines.push_back(std::to_string(x.node) + "," + std::to_string(x.object) + "," +
                              fmt_double(pt[0]) + "," + fmt_double(pt[1]));
            }
          }
          write_lines(dir_ / file, lines);
          return std::vector<std::string>{};
        });
      }
      break;
    }
    case ExperimentKind::TandemBoth: {
      for (double h : c.h_values)
        add("tandem-both h=" + fmt_double(h), [&c, h] {
          RegionProfile profile;
          profile.rate = c.rates;
          TandemSpec spec;
          spec.k1 = c.k1;
          spec.k2 = c.k2;
          spec.h = h;
          spec.beta_parent = c.beta_parent;
          spec.gamma = c.gamma;
          const TandemSolveResult sol = tandem_both_solve(profile, spec);
          return std::vector<std::string>{"tandem-both," + fmt_double(h) + ",0,0," +
                                          fmt_double(sol.cost)};
        });
      break;
    }
    case ExperimentKind::AnalyticVsLocalSwap: {
      for (double gamma : c.gammas)
        for (double h : c.h_values) {
          add("analytic gamma=" + fmt_double(gamma) + " h=" + fmt_double(h), [&c, gamma, h] {
            const double area = static_cast<double>(c.side * c.side);
            // total_rate covers both arrival processes; the analytic model
            // takes the density of one.
            const double density = c.total_rate / (2.0 * area);
            const TandemUniformResult r = tandem_uniform_analytic(
                static_cast<double>(c.slots_per_cache), h, gamma, area, density);
            return std::vector<std::string>{"analytic," + fmt_double(h) + "," + fmt_double(gamma) +
                                            ",0," + fmt_double(r.cost)};
          });
          add("localswap gamma=" + fmt_double(gamma) + " h=" + fmt_double(h), [&c, gamma, h] {
            const Instance inst = tandem_uniform_instance(c, gamma, h);
            const LocalSwapResult r = local_swap(inst, {}, {}, StopRule::converged());
            return std::vector<std::string>{"localswap," + fmt_double(h) + "," + fmt_double(gamma) +
                                            ",0," + fmt_double(r.cost)};
          });
        }
      break;
    }
    case ExperimentKind::ConstrainedStudy: {
      for (std::uint64_t seed : c.seeds) {
        auto build = [&c, seed] {
          ClusteredTraceSpec spec = c.workload;
          spec.seed = seed;
          auto [catalog, trace] = make_clustered_embedding(spec);
          Instance inst;
          inst.space = catalog_space(catalog, c.gamma);
          inst.topology = Topology::make(2);
          inst.topology.capacity = {c.slots_per_cache, 0};
          inst.topology.is_repository = {0, 1};
          inst.topology.set_hop(0, 1, c.repository_hop);
          inst.topology.path[0] = {0, 1};
          inst.demand = demand_from_counts(catalog, c.total_rate);
          for (std::int32_t o = 0; o < inst.space.object_count; ++o)
            inst.repository_seeds.push_back({o, 1});
          return std::pair(std::move(inst), std::move(catalog));
        };
        add("localswap seed=" + std::to_string(seed), [build, seed] {
          auto [inst, catalog] = build();
          const LocalSwapResult r = local_swap(inst, {}, {}, StopRule::converged());
          return std::vector<std::string>{"localswap,inf," + std::to_string(seed) + "," +
                                          fmt_double(r.cost)};
        });
        for (double d : c.d_values)
          add("constrained d=" + fmt_double(d) + " seed=" + std::to_string(seed),
              [build, seed, d] {
                auto [inst, catalog] = build();
                const auto& bary = catalog.barycenter;
                const Instance& inst_ref = inst;
                AdmissionPredicate admit = [&inst_ref, &bary, d](std::int32_t object,
                                                                 std::int32_t) {
                  return norm2_distance(inst_ref.space.point(object), bary) <= d;
                };
                const LocalSwapResult r =
                    constrained_local_swap(inst, admit, {}, {}, StopRule::converged());
                return std::vector<std::string>{"constrained," + fmt_double(d) + "," +
                                                std::to_string(seed) + "," + fmt_double(r.cost)};
              });
      }
      break;
    }
    case ExperimentKind::ShellDensity: {
      add("shell-density", [&c] {
        EmbeddingCatalog catalog;
        Trace trace;
        if (!c.items_path.empty()) {
          IngestResult in = ingest_embedding_trace(c.items_path, c.events_path);
          catalog = std::move(in.catalog);
          trace = std::move(in.trace);
        } else {
          auto made = make_clustered_embedding(c.workload);
          catalog = std::move(made.first);
          trace = std::move(made.second);
        }
        std::vector<std::string> lines;
        for (const ShellStat& s : shell_density(catalog, trace, c.shell_width))
          lines.push_back(fmt_double(s.rho) + "," + std::to_string(s.items) + "," +
                          std::to_string(s.requests) + "," + fmt_double(s.density));
        return lines;
      });
      break;
    }
  }
  return jobs;
}

}  // namespace

ConfigCheck validate_config(const std::string& path) {
  ExperimentConfig scratch;
  return check_impl(path, scratch);
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  const ConfigCheck check = check_impl(path, cfg);
  if (!check.ok) {
    const auto& first = check.diagnostics.front();
    throw ParseError(first.message, first.line);
  }
  return cfg;
}

RunReport run_experiment(const ExperimentConfig& config, const std::string& output_root) {
  std::string root = output_root;
  if (root.empty())
    if (const char* env = std::getenv(kOutputRootEnv)) root = env;
  if (root.empty()) root = ".";

  RunReport report;
  report.directory = fs::path(root) / (config.output.empty() ? kind_name(config.kind) : config.output);
  fs::create_directories(report.directory);
  const json canon = canonical_json(config);
  report.config_hash = fnv1a_hex(canon.dump());

  std::vector<std::string> extra_outputs;
  std::vector<Job> jobs = build_jobs(config, report.directory, extra_outputs);

  const bool pointwise = csv_header(config.kind) != std::string();
  if (pointwise) fs::create_directories(report.directory / "points");

  // Bounded worker pool over independent points; each point writes its own
  // file so the merge order never depends on scheduling.
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const std::vector<std::string> rows = jobs[i].run();
        if (pointwise) write_lines(report.directory / "points" / (jobs[i].key + ".csv"), rows);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int workers = std::max(1, config.workers);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  json failures = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (errors[i].empty()) continue;
    failures.push_back({{"point", jobs[i].label}, {"error", errors[i]}});
    report.failures.emplace_back(jobs[i].label, errors[i]);
  }

  if (pointwise) {
    // Deterministic merge: point keys are zero-padded indices, so sorted
    // order is enumeration order regardless of which worker ran what.
    std::ofstream merged(report.directory / "results.csv", std::ios::binary);
    merged << csv_header(config.kind) << "\n";
    for (const Job& job : jobs) {
      std::ifstream in(report.directory / "points" / (job.key + ".csv"), std::ios::binary);
      if (!in) continue;  // failed point
      std::string line;
      while (std::getline(in, line)) {
        merged << line << "\n";
        ++report.rows;
      }
      report.outputs.push_back("points/" + job.key + ".csv");
    }
    report.outputs.insert(report.outputs.begin(), "results.csv");
  } else {
    for (const auto& f : extra_outputs)
      if (fs::exists(report.directory / f)) report.outputs.push_back(f);
  }

  json slots = json::array();
  switch (config.kind) {
    case ExperimentKind::TandemSweep:
    case ExperimentKind::AllocationDump:
      for (auto s : config.slots) slots.push_back(s);
      break;
    case ExperimentKind::TandemBoth:
      slots.push_back(config.k1);
      slots.push_back(config.k2);
      break;
    case ExperimentKind::AnalyticVsLocalSwap:
      slots.push_back(config.slots_per_cache);
      slots.push_back(config.slots_per_cache);
      break;
    case ExperimentKind::ConstrainedStudy: slots.push_back(config.slots_per_cache); break;
    case ExperimentKind::ShellDensity: break;
  }

  json manifest;
  manifest["kind"] = kind_name(config.kind);
  manifest["config"] = canon;
  manifest["config_hash"] = report.config_hash;
  manifest["versions"] = {{"simcache", kSimcacheVersion}};
  manifest["seeds"] = config.seeds;
  manifest["cache_slots"] = slots;
  manifest["cache_slots_defaulted"] = config.slots_defaulted &&
                                      (config.kind == ExperimentKind::TandemSweep ||
                                       config.kind == ExperimentKind::AllocationDump);
  manifest["row_header"] = csv_header(config.kind);
  manifest["points"] = jobs.size();
  manifest["rows"] = report.rows;
  manifest["failures"] = failures;
  manifest["outputs"] = report.outputs;
  manifest["finished_at"] = static_cast<std::int64_t>(std::time(nullptr));

  std::ofstream mout(report.directory / "manifest.json", std::ios::binary);
  mout << manifest.dump(2) << "\n";
  report.outputs.push_back("manifest.json");
  return report;
}

}  // namespace simcache
