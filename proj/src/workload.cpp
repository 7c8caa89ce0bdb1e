#include "simcache/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>

namespace simcache {

namespace {

double next_u(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

double parse_double_field(std::string_view s, int line_no, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line_no);
  return v;
}

std::int64_t parse_int_field(std::string_view s, int line_no, const char* what) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line_no);
  return v;
}

void compute_barycenter(EmbeddingCatalog& cat, bool weighted) {
  cat.barycenter.assign(cat.dim, 0.0);
  if (cat.item_count == 0) return;
  double total = 0.0;
  if (weighted)
    for (std::int64_t c : cat.request_count) total += static_cast<double>(c);
  const bool use_weights = weighted && total > 0.0;
  if (!use_weights) total = static_cast<double>(cat.item_count);
  for (std::int64_t i = 0; i < cat.item_count; ++i) {
    const double w = use_weights ? static_cast<double>(cat.request_count[i]) : 1.0;
    if (w == 0.0) continue;
    for (std::int64_t d = 0; d < cat.dim; ++d)
      cat.barycenter[d] += w * cat.coords[i * cat.dim + d];
  }
  for (double& b : cat.barycenter) b /= total;
}

Trace sample_poisson(const Demand& demand, double duration, std::int64_t max_events,
                     std::uint64_t seed) {
  if (demand.kind != Demand::Kind::Discrete)
    throw InvalidInputError("trace sampling needs discrete demand");
  Trace out;
  out.seed = seed;
  out.source = "poisson";
  std::vector<double> cum;
  cum.reserve(demand.entries.size());
  double total = 0.0;
  for (const DemandEntry& e : demand.entries) {
    if (!std::isfinite(e.rate) || e.rate < 0.0)
      throw InvalidInputError("demand rates must be finite and nonnegative");
    total += e.rate;
    cum.push_back(total);
  }
  if (total <= 0.0) return out;
  std::mt19937_64 rng(seed);
  double t = 0.0;
  for (std::int64_t n = 0; max_events < 0 || n < max_events; ++n) {
    t += -std::log(next_u(rng)) / total;
    if (max_events < 0 && t > duration) break;
    const double v = next_u(rng) * total;
    const auto it = std::lower_bound(cum.begin(), cum.end(), v);
    const std::size_t idx = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
    out.events.push_back({t, demand.entries[idx].object, demand.entries[idx].ingress});
  }
  return out;
}

}  // namespace

RequestTrace Trace::flatten() const {
  RequestTrace out;
  out.reserve(events.size());
  for (const TimedRequest& e : events) out.push_back({e.object, e.ingress});
  return out;
}

Demand gaussian_grid_demand(std::int64_t side, std::int64_t count, double sigma,
                            double total_rate, std::int32_t ingress) {
  if (side < 1) throw InvalidInputError("grid side must be at least 1");
  if (count < 1 || count > side * side)
    throw InvalidInputError("object count must lie in [1, side^2]");
  if (!std::isfinite(sigma) || sigma <= 0.0)
    throw InvalidInputError("sigma must be positive");
  if (!std::isfinite(total_rate) || total_rate < 0.0)
    throw InvalidInputError("total rate must be finite and nonnegative");
  const double center = static_cast<double>(side - 1) / 2.0;
  std::vector<double> g(count);
  double sum = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double dr = std::abs(static_cast<double>(i / side) - center);
    const double dc = std::abs(static_cast<double>(i % side) - center);
    const double d = dr + dc;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[i];
  }
  Demand out;
  out.kind = Demand::Kind::Discrete;
  out.entries.reserve(count);
  for (std::int64_t i = 0; i < count; ++i)
    out.entries.push_back(
        {static_cast<std::int32_t>(i), ingress, total_rate * g[i] / sum});
  return out;
}

Demand uniform_demand(std::int64_t count, double total_rate, std::int32_t ingress) {
  if (count < 1) throw InvalidInputError("object count must be at least 1");
  if (!std::isfinite(total_rate) || total_rate < 0.0)
    throw InvalidInputError("total rate must be finite and nonnegative");
  Demand out;
  out.kind = Demand::Kind::Discrete;
  out.entries.reserve(count);
  const double each = total_rate / static_cast<double>(count);
  for (std::int64_t i = 0; i < count; ++i)
    out.entries.push_back({static_cast<std::int32_t>(i), ingress, each});
  return out;
}

ObjectSpace grid_object_space(std::int64_t side, double gamma, bool torus) {
  if (side < 1) throw InvalidInputError("grid side must be at least 1");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw InvalidInputError("gamma must be finite and nonnegative");
  ObjectSpace s =
      ObjectSpace::points(2, Metric::Norm1, gamma, torus ? static_cast<double>(side) : 0.0);
  s.object_count = side * side;
  s.coords.reserve(s.object_count * 2);
  for (std::int64_t r = 0; r < side; ++r)
    for (std::int64_t c = 0; c < side; ++c) {
      s.coords.push_back(static_cast<double>(r));
      s.coords.push_back(static_cast<double>(c));
    }
  return s;
}

Trace sample_trace(const Demand& demand, double duration, std::uint64_t seed) {
  if (!std::isfinite(duration) || duration < 0.0)
    throw InvalidInputError("duration must be finite and nonnegative");
  return sample_poisson(demand, duration, -1, seed);
}

Trace sample_trace_count(const Demand& demand, std::int64_t events, std::uint64_t seed) {
  if (events < 0) throw InvalidInputError("event count must be nonnegative");
  return sample_poisson(demand, 0.0, events, seed);
}

IngestResult ingest_embedding_trace(const std::string& items_path,
                                    const std::string& events_path, IngestOptions opts) {
  IngestResult out;
  EmbeddingCatalog& cat = out.catalog;

  std::ifstream items(items_path);
  if (!items) throw ParseError("cannot open items file '" + items_path + "'", 0);
  std::unordered_map<std::string, std::int64_t> index;
  std::string line;
  int line_no = 0;
  while (std::getline(items, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto fields = split_csv(sv);
    if (fields.size() < 2) throw ParseError("item row needs an id and coordinates", line_no);
    if (cat.dim == 0)
      cat.dim = static_cast<std::int64_t>(fields.size()) - 1;
    else if (static_cast<std::int64_t>(fields.size()) - 1 != cat.dim)
      throw ParseError("item row has " + std::to_string(fields.size() - 1) +
                           " coordinates, expected " + std::to_string(cat.dim),
                       line_no);
    std::string label(fields[0]);
    if (label.empty()) throw ParseError("empty item id", line_no);
    if (!index.emplace(label, cat.item_count).second)
      throw ParseError("duplicate item id '" + label + "'", line_no);
    cat.labels.push_back(std::move(label));
    for (std::int64_t d = 0; d < cat.dim; ++d)
      cat.coords.push_back(parse_double_field(fields[d + 1], line_no, "coordinate"));
    ++cat.item_count;
  }
  if (cat.item_count == 0) throw ParseError("items file has no rows", 0);
  cat.request_count.assign(cat.item_count, 0);

  std::ifstream events(events_path);
  if (!events) throw ParseError("cannot open events file '" + events_path + "'", 0);
  out.trace.source = events_path;
  bool monotone = true;
  line_no = 0;
  while (std::getline(events, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto fields = split_csv(sv);
    if (fields.size() != 2 && fields.size() != 3)
      throw ParseError("event row needs timestamp,item[,ingress]", line_no);
    TimedRequest ev;
    ev.time = parse_double_field(fields[0], line_no, "timestamp");
    const auto it = index.find(std::string(fields[1]));
    if (it == index.end())
      throw ParseError("unknown item id '" + std::string(fields[1]) + "'", line_no);
    ev.object = static_cast<std::int32_t>(it->second);
    if (fields.size() == 3)
      ev.ingress = static_cast<std::int32_t>(parse_int_field(fields[2], line_no, "ingress"));
    if (!out.trace.events.empty() && ev.time < out.trace.events.back().time) monotone = false;
    out.trace.events.push_back(ev);
    ++cat.request_count[ev.object];
  }
  if (!monotone) {
    std::stable_sort(out.trace.events.begin(), out.trace.events.end(),
                     [](const TimedRequest& a, const TimedRequest& b) { return a.time < b.time; });
    out.warnings.push_back("events were out of time order and have been sorted");
  }

  compute_barycenter(cat, opts.weighted_barycenter);
  return out;
}

void write_embedding_trace(const EmbeddingCatalog& catalog, const Trace& trace,
                           const std::string& items_path, const std::string& events_path) {
  std::ofstream items(items_path);
  if (!items) throw InvalidInputError("cannot write items file '" + items_path + "'");
  for (std::int64_t i = 0; i < catalog.item_count; ++i) {
    items << catalog.labels[i];
    for (std::int64_t d = 0; d < catalog.dim; ++d)
      items << ',' << fmt_double(catalog.coords[i * catalog.dim + d]);
    items << '\n';
  }
  std::ofstream events(events_path);
  if (!events) throw InvalidInputError("cannot write events file '" + events_path + "'");
  for (const TimedRequest& e : trace.events) {
    if (e.object < 0 || e.object >= catalog.item_count)
      throw InvalidInputError("trace references an object outside the catalog");
    events << fmt_double(e.time) << ',' << catalog.labels[e.object] << ',' << e.ingress << '\n';
  }
}

ObjectSpace catalog_space(const EmbeddingCatalog& catalog, double gamma) {
  if (catalog.item_count == 0) throw InvalidInputError("catalog is empty");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw InvalidInputError("gamma must be finite and nonnegative");
  ObjectSpace s = ObjectSpace::points(catalog.dim, Metric::Norm2, gamma);
  s.object_count = catalog.item_count;
  s.coords = catalog.coords;
  return s;
}

Demand demand_from_counts(const EmbeddingCatalog& catalog, double total_rate,
                          std::int32_t ingress) {
  if (!std::isfinite(total_rate) || total_rate < 0.0)
    throw InvalidInputError("total rate must be finite and nonnegative");
  double total = 0.0;
  for (std::int64_t c : catalog.request_count) total += static_cast<double>(c);
  Demand out;
  out.kind = Demand::Kind::Discrete;
  out.entries.reserve(catalog.item_count);
  for (std::int64_t i = 0; i < catalog.item_count; ++i) {
    const double share =
        total > 0.0 ? static_cast<double>(catalog.request_count[i]) / total : 0.0;
    out.entries.push_back({static_cast<std::int32_t>(i), ingress, total_rate * share});
  }
  return out;
}

std::vector<ShellStat> shell_density(const EmbeddingCatalog& catalog, const Trace& trace,
                                     double width) {
  if (!std::isfinite(width) || width <= 0.0)
    throw InvalidInputError("shell width must be positive");
  if (catalog.item_count == 0) throw InvalidInputError("catalog is empty");

  std::vector<std::int64_t> requests(catalog.item_count, 0);
  for (const TimedRequest& e : trace.events) {
    if (e.object < 0 || e.object >= catalog.item_count)
      throw InvalidInputError("trace references an object outside the catalog");
    ++requests[e.object];
  }

  std::unordered_map<std::int64_t, ShellStat> shells;
  for (std::int64_t i = 0; i < catalog.item_count; ++i) {
    double sq = 0.0;
    for (std::int64_t d = 0; d < catalog.dim; ++d) {
      const double diff = catalog.coords[i * catalog.dim + d] - catalog.barycenter[d];
      sq += diff * diff;
    }
    const auto k = static_cast<std::int64_t>(std::floor(std::sqrt(sq) / width));
    ShellStat& s = shells[k];
    s.rho = static_cast<double>(k) * width;
    ++s.items;
    s.requests += requests[i];
  }

  std::vector<ShellStat> out;
  out.reserve(shells.size());
  for (auto& [k, s] : shells) {
    s.density = static_cast<double>(s.requests) / static_cast<double>(s.items);
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(),
            [](const ShellStat& a, const ShellStat& b) { return a.rho < b.rho; });
  return out;
}

std::pair<EmbeddingCatalog, Trace> make_clustered_embedding(const ClusteredTraceSpec& spec) {
  if (spec.items < 1 || spec.clusters < 1 || spec.items < spec.clusters)
    throw InvalidInputError("need at least one item per cluster");
  if (spec.dim < 1) throw InvalidInputError("dimension must be at least 1");
  if (spec.events < 0) throw InvalidInputError("event count must be nonnegative");
  if (!(spec.cluster_sigma > 0.0) || !(spec.decay_sigma > 0.0) || !(spec.duration > 0.0) ||
      spec.cluster_separation < 0.0)
    throw InvalidInputError("cluster parameters must be positive");

  EmbeddingCatalog cat;
  cat.item_count = spec.items;
  cat.dim = spec.dim;
  cat.coords.resize(spec.items * spec.dim);
  cat.labels.reserve(spec.items);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.cluster_sigma);
  for (std::int64_t i = 0; i < spec.items; ++i) {
    cat.labels.push_back("item" + std::to_string(i));
    const std::int64_t cluster = i % spec.clusters;
    const std::int64_t axis = cluster > 0 ? (cluster - 1) % spec.dim : 0;
    for (std::int64_t d = 0; d < spec.dim; ++d) {
      double c = noise(rng);
      if (cluster > 0 && d == axis) c += spec.cluster_separation;
      cat.coords[i * spec.dim + d] = c;
    }
  }

  // Deterministic apportionment of the event budget by popularity weight:
  // floors first, then largest remainders.
  std::vector<double> weight(spec.items);
  double wsum = 0.0;
  for (std::int64_t i = 0; i < spec.items; ++i) {
    double sq = 0.0;
    for (std::int64_t d = 0; d < spec.dim; ++d) {
      const double c = cat.coords[i * spec.dim + d];
      sq += c * c;
    }
    weight[i] = std::exp(-sq / (2.0 * spec.decay_sigma * spec.decay_sigma));
    wsum += weight[i];
  }
  cat.request_count.assign(spec.items, 0);
  std::vector<std::pair<double, std::int64_t>> remainder;
  remainder.reserve(spec.items);
  std::int64_t assigned = 0;
  for (std::int64_t i = 0; i < spec.items; ++i) {
    const double share = static_cast<double>(spec.events) * weight[i] / wsum;
    const auto base = static_cast<std::int64_t>(std::floor(share));
    cat.request_count[i] = base;
    assigned += base;
    remainder.push_back({share - static_cast<double>(base), i});
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::int64_t i = 0; assigned < spec.events; ++i, ++assigned)
    ++cat.request_count[remainder[i % remainder.size()].second];

  compute_barycenter(cat, true);

  Trace trace;
  trace.seed = spec.seed;
  trace.source = "clustered";
  trace.events.reserve(spec.events);
  std::vector<std::int32_t> ids;
  ids.reserve(spec.events);
  for (std::int64_t i = 0; i < spec.items; ++i)
    for (std::int64_t c = 0; c < cat.request_count[i]; ++c)
      ids.push_back(static_cast<std::int32_t>(i));
  std::shuffle(ids.begin(), ids.end(), rng);
  const double mean_gap =
      spec.events > 0 ? spec.duration / static_cast<double>(spec.events) : 0.0;
  double t = 0.0;
  for (std::int32_t id : ids) {
    t += -std::log(next_u(rng)) * mean_gap;
    trace.events.push_back({t, id, 0});
  }
  return {std::move(cat), std::move(trace)};
}

}  // namespace simcache
