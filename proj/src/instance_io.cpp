#include "simcache/instance_io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace simcache {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(trim(s.substr(pos)));
      break;
    }
    out.push_back(trim(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_number(std::string_view tok, int line) {
  if (tok == "inf" || tok == "+inf" || tok == "Inf" || tok == "INF") return kInf;
  if (tok == "-inf") return -kInf;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ParseError("not a number: '" + std::string(tok) + "'", line);
  }
  return v;
}

std::int64_t parse_int(std::string_view tok, int line) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    throw ParseError("not an integer: '" + std::string(tok) + "'", line);
  }
  return v;
}

struct KeyValue {
  int line = 0;
  std::string key;
  std::string value;
};

struct Section {
  int line = 0;
  std::string name;
  std::vector<KeyValue> kvs;
};

std::vector<Section> lex_sections(std::istream& in) {
  std::vector<Section> out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", line);
      out.push_back({line, std::string(trim(s.substr(1, s.size() - 2))), {}});
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line);
    if (out.empty()) throw ParseError("content before the first [section]", line);
    out.back().kvs.push_back(
        {line, std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1)))});
  }
  return out;
}

// Rows of an @file CSV payload. `anchor` is the referencing line in the
// instance file, used when the file itself cannot be opened.
std::vector<std::pair<int, std::vector<std::string>>> read_csv_rows(
    const std::filesystem::path& path, int anchor) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open referenced file " + path.string(), anchor);
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    std::vector<std::string> cells;
    for (const auto c : split(s, ',')) cells.emplace_back(c);
    rows.emplace_back(line, std::move(cells));
  }
  return rows;
}

std::string fmt_double(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

bool is_ref(const std::string& value) { return !value.empty() && value.front() == '@'; }

std::filesystem::path ref_path(const std::string& value, const std::string& base_dir) {
  return std::filesystem::path(base_dir) / value.substr(1);
}

ObjectSpace build_space(const Section& sec, const std::string& base_dir) {
  std::string kind;
  std::int64_t objects = -1, dim = -1;
  std::string metric;
  double gamma = 1.0, period = 0.0;
  std::vector<std::pair<int, std::string>> rows, points;
  std::string payload_ref;
  int payload_line = 0;

  for (const auto& kv : sec.kvs) {
    if (kv.key == "kind") {
      kind = kv.value;
    } else if (kv.key == "objects") {
      objects = parse_int(kv.value, kv.line);
    } else if (kv.key == "dim") {
      dim = parse_int(kv.value, kv.line);
    } else if (kv.key == "metric") {
      metric = kv.value;
    } else if (kv.key == "gamma") {
      gamma = parse_number(kv.value, kv.line);
    } else if (kv.key == "period") {
      period = parse_number(kv.value, kv.line);
    } else if (kv.key == "row") {
      rows.emplace_back(kv.line, kv.value);
    } else if (kv.key == "point") {
      points.emplace_back(kv.line, kv.value);
    } else if (kv.key == "cost" || kv.key == "points") {
      if (!is_ref(kv.value)) throw ParseError("'" + kv.key + "' must be an @file reference", kv.line);
      payload_ref = kv.value;
      payload_line = kv.line;
    } else {
      throw ParseError("unknown [space] key '" + kv.key + "'", kv.line);
    }
  }
  if (objects < 0) throw ParseError("[space] needs 'objects'", sec.line);

  if (kind == "matrix") {
    auto s = ObjectSpace::matrix(objects);
    if (!payload_ref.empty()) {
      const auto csv = read_csv_rows(ref_path(payload_ref, base_dir), payload_line);
      if (std::ssize(csv) != objects) {
        throw ParseError("cost matrix has " + std::to_string(csv.size()) + " rows, expected " +
                             std::to_string(objects),
                         payload_line);
      }
      for (std::int64_t i = 0; i < objects; ++i) {
        const auto& [line, cells] = csv[i];
        if (std::ssize(cells) != objects) {
          throw ParseError("matrix row has " + std::to_string(cells.size()) +
                               " entries, expected " + std::to_string(objects),
                           line);
        }
        for (std::int64_t j = 0; j < objects; ++j) s.cost[i * objects + j] = parse_number(cells[j], line);
      }
    } else {
      if (std::ssize(rows) != objects) {
        throw ParseError("[space] has " + std::to_string(rows.size()) + " 'row' lines, expected " +
                             std::to_string(objects),
                         sec.line);
      }
      for (std::int64_t i = 0; i < objects; ++i) {
        const auto toks = tokens(rows[i].second);
        if (std::ssize(toks) != objects) {
          throw ParseError("row has " + std::to_string(toks.size()) + " entries, expected " +
                               std::to_string(objects),
                           rows[i].first);
        }
        for (std::int64_t j = 0; j < objects; ++j) s.cost[i * objects + j] = parse_number(toks[j], rows[i].first);
      }
    }
    return s;
  }

  if (kind == "points") {
    if (dim <= 0) throw ParseError("[space] kind points needs 'dim'", sec.line);
    Metric m;
    if (metric == "norm1") {
      m = Metric::Norm1;
    } else if (metric == "norm2") {
      m = Metric::Norm2;
    } else {
      throw ParseError("[space] needs 'metric = norm1|norm2'", sec.line);
    }
    auto s = ObjectSpace::points(dim, m, gamma, period);
    s.object_count = objects;
    s.coords.assign(objects * dim, 0.0);
    if (!payload_ref.empty()) {
      const auto csv = read_csv_rows(ref_path(payload_ref, base_dir), payload_line);
      std::vector<char> seen(objects, 0);
      for (const auto& [line, cells] : csv) {
        if (std::ssize(cells) != dim + 1) {
          throw ParseError("point row has " + std::to_string(cells.size()) +
                               " cells, expected id plus " + std::to_string(dim),
                           line);
        }
        const std::int64_t id = parse_int(cells[0], line);
        if (id < 0 || id >= objects) throw ParseError("object id out of range", line);
        if (seen[id]) throw ParseError("duplicate object id " + std::to_string(id), line);
        seen[id] = 1;
        for (std::int64_t d = 0; d < dim; ++d) s.coords[id * dim + d] = parse_number(cells[d + 1], line);
      }
      if (std::ssize(csv) != objects) {
        throw ParseError("points file has " + std::to_string(csv.size()) + " rows, expected " +
                             std::to_string(objects),
                         payload_line);
      }
    } else {
      if (std::ssize(points) != objects) {
        throw ParseError("[space] has " + std::to_string(points.size()) +
                             " 'point' lines, expected " + std::to_string(objects),
                         sec.line);
      }
      for (std::int64_t i = 0; i < objects; ++i) {
        const auto toks = tokens(points[i].second);
        if (std::ssize(toks) != dim) {
          throw ParseError("point has " + std::to_string(toks.size()) +
                               " coordinates, expected " + std::to_string(dim),
                           points[i].first);
        }
        for (std::int64_t d = 0; d < dim; ++d) s.coords[i * dim + d] = parse_number(toks[d], points[i].first);
      }
    }
    return s;
  }

  throw ParseError("[space] needs 'kind = matrix|points'", sec.line);
}

Topology build_topology(const Section& sec) {
  std::int64_t nodes = -1;
  const KeyValue* capacity = nullptr;
  const KeyValue* repos = nullptr;
  std::vector<const KeyValue*> hops, paths;
  for (const auto& kv : sec.kvs) {
    if (kv.key == "nodes") {
      nodes = parse_int(kv.value, kv.line);
    } else if (kv.key == "capacity") {
      capacity = &kv;
    } else if (kv.key == "repository_nodes") {
      repos = &kv;
    } else if (kv.key == "hop") {
      hops.push_back(&kv);
    } else if (kv.key == "path") {
      paths.push_back(&kv);
    } else {
      throw ParseError("unknown [topology] key '" + kv.key + "'", kv.line);
    }
  }
  if (nodes <= 0) throw ParseError("[topology] needs 'nodes'", sec.line);
  auto topo = Topology::make(nodes);
  if (!capacity) throw ParseError("[topology] needs 'capacity'", sec.line);
  const auto caps = tokens(capacity->value);
  if (std::ssize(caps) != nodes) {
    throw ParseError("capacity lists " + std::to_string(caps.size()) + " nodes, expected " +
                         std::to_string(nodes),
                     capacity->line);
  }
  for (std::int64_t j = 0; j < nodes; ++j) topo.capacity[j] = parse_int(caps[j], capacity->line);
  if (repos) {
    for (const auto t : tokens(repos->value)) {
      const std::int64_t j = parse_int(t, repos->line);
      if (j < 0 || j >= nodes) throw ParseError("repository node out of range", repos->line);
      topo.is_repository[j] = 1;
    }
  }
  for (const auto* kv : hops) {
    const auto t = tokens(kv->value);
    if (t.size() != 3) throw ParseError("hop needs 'from to cost'", kv->line);
    const std::int64_t i = parse_int(t[0], kv->line), j = parse_int(t[1], kv->line);
    if (i < 0 || i >= nodes || j < 0 || j >= nodes) throw ParseError("hop node out of range", kv->line);
    topo.set_hop(i, j, parse_number(t[2], kv->line));
  }
  for (const auto* kv : paths) {
    const auto t = tokens(kv->value);
    if (t.size() < 2) throw ParseError("path needs 'ingress node...'", kv->line);
    const std::int64_t ing = parse_int(t[0], kv->line);
    if (ing < 0 || ing >= nodes) throw ParseError("path ingress out of range", kv->line);
    if (!topo.path[ing].empty()) throw ParseError("duplicate path for ingress " + std::to_string(ing), kv->line);
    for (std::size_t k = 1; k < t.size(); ++k) {
      const std::int64_t nd = parse_int(t[k], kv->line);
      if (nd < 0 || nd >= nodes) throw ParseError("path node out of range", kv->line);
      topo.path[ing].push_back(static_cast<std::int32_t>(nd));
    }
  }
  return topo;
}

Demand build_demand(const Section& sec, const std::string& base_dir) {
  Demand demand;
  std::unordered_set<std::uint64_t> seen;
  auto add = [&](std::int64_t o, std::int64_t i, double rate, int line) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(o)) << 32) |
        static_cast<std::uint32_t>(i);
    if (!seen.insert(key).second) {
      throw ParseError("duplicate demand entry for object " + std::to_string(o) + " at ingress " +
                           std::to_string(i),
                       line);
    }
    demand.entries.push_back(
        {static_cast<std::int32_t>(o), static_cast<std::int32_t>(i), rate});
  };
  for (const auto& kv : sec.kvs) {
    if (kv.key == "rate") {
      const auto t = tokens(kv.value);
      if (t.size() != 3) throw ParseError("rate needs 'object ingress value'", kv.line);
      add(parse_int(t[0], kv.line), parse_int(t[1], kv.line), parse_number(t[2], kv.line), kv.line);
    } else if (kv.key == "rates") {
      if (!is_ref(kv.value)) throw ParseError("'rates' must be an @file reference", kv.line);
      for (const auto& [line, cells] : read_csv_rows(ref_path(kv.value, base_dir), kv.line)) {
        if (cells.size() != 3) throw ParseError("rate row needs object,ingress,rate", line);
        add(parse_int(cells[0], line), parse_int(cells[1], line), parse_number(cells[2], line), line);
      }
    } else {
      throw ParseError("unknown [demand] key '" + kv.key + "'", kv.line);
    }
  }
  return demand;
}

std::vector<Approximizer> build_seeds(const Section& sec, std::int64_t objects) {
  std::vector<Approximizer> seeds;
  std::unordered_set<std::uint64_t> seen;
  auto add = [&](std::int64_t o, std::int64_t j, int line) {
    const std::uint64_t key =
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(o)) << 32) |
        static_cast<std::uint32_t>(j);
    if (!seen.insert(key).second) throw ParseError("duplicate repository seed", line);
    seeds.push_back({static_cast<std::int32_t>(o), static_cast<std::int32_t>(j)});
  };
  for (const auto& kv : sec.kvs) {
    if (kv.key == "seed") {
      const auto t = tokens(kv.value);
      if (t.size() != 2) throw ParseError("seed needs 'object node'", kv.line);
      add(parse_int(t[0], kv.line), parse_int(t[1], kv.line), kv.line);
    } else if (kv.key == "seed_all") {
      const std::int64_t j = parse_int(kv.value, kv.line);
      for (std::int64_t o = 0; o < objects; ++o) add(o, j, kv.line);
    } else {
      throw ParseError("unknown [repositories] key '" + kv.key + "'", kv.line);
    }
  }
  return seeds;
}

}  // namespace

Instance parse_instance(std::istream& in, const std::string& base_dir) {
  const auto sections = lex_sections(in);
  const Section* space = nullptr;
  const Section* topo = nullptr;
  const Section* demand = nullptr;
  const Section* repos = nullptr;
  for (const auto& sec : sections) {
    const Section** slot = nullptr;
    if (sec.name == "space") slot = &space;
    else if (sec.name == "topology") slot = &topo;
    else if (sec.name == "demand") slot = &demand;
    else if (sec.name == "repositories") slot = &repos;
    else throw ParseError("unknown section [" + sec.name + "]", sec.line);
    if (*slot) throw ParseError("duplicate section [" + sec.name + "]", sec.line);
    *slot = &sec;
  }
  Instance inst;
  if (space) inst.space = build_space(*space, base_dir);
  if (topo) inst.topology = build_topology(*topo);
  if (demand) inst.demand = build_demand(*demand, base_dir);
  if (repos && space) inst.repository_seeds = build_seeds(*repos, inst.space.object_count);
  if (!space) throw ParseError("missing [space] section", 0);
  if (!topo) throw ParseError("missing [topology] section", 0);
  return inst;
}

Instance read_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  const std::string base = std::filesystem::path(path).parent_path().string();
  Instance inst = parse_instance(in, base.empty() ? "." : base);
  validate_instance(inst);
  return inst;
}

std::string format_instance(const Instance& inst) {
  std::ostringstream out;
  const auto& s = inst.space;
  out << "[space]\n";
  if (s.kind == ObjectSpace::Kind::Matrix) {
    out << "kind = matrix\nobjects = " << s.object_count << "\n";
    for (std::int64_t i = 0; i < s.object_count; ++i) {
      out << "row =";
      for (std::int64_t j = 0; j < s.object_count; ++j) {
        out << ' ' << fmt_double(s.cost[i * s.object_count + j]);
      }
      out << '\n';
    }
  } else {
    out << "kind = points\nobjects = " << s.object_count << "\ndim = " << s.dim
        << "\nmetric = " << (s.metric == Metric::Norm1 ? "norm1" : "norm2")
        << "\ngamma = " << fmt_double(s.gamma) << "\nperiod = " << fmt_double(s.period) << "\n";
    for (std::int64_t i = 0; i < s.object_count; ++i) {
      out << "point =";
      for (std::int64_t d = 0; d < s.dim; ++d) out << ' ' << fmt_double(s.coords[i * s.dim + d]);
      out << '\n';
    }
  }

  const auto& t = inst.topology;
  out << "\n[topology]\nnodes = " << t.node_count << "\ncapacity =";
  for (std::int64_t j = 0; j < t.node_count; ++j) out << ' ' << t.capacity[j];
  out << '\n';
  bool any_repo = false;
  for (std::int64_t j = 0; j < t.node_count; ++j) any_repo = any_repo || t.is_repository[j];
  if (any_repo) {
    out << "repository_nodes =";
    for (std::int64_t j = 0; j < t.node_count; ++j) {
      if (t.is_repository[j]) out << ' ' << j;
    }
    out << '\n';
  }
  for (std::int64_t i = 0; i < t.node_count; ++i) {
    for (std::int64_t j = 0; j < t.node_count; ++j) {
      if (i != j && t.hop_cost(i, j) != kInf) {
        out << "hop = " << i << ' ' << j << ' ' << fmt_double(t.hop_cost(i, j)) << '\n';
      }
    }
  }
  for (std::int64_t i = 0; i < t.node_count; ++i) {
    if (t.path[i].empty()) continue;
    out << "path = " << i;
    for (const auto nd : t.path[i]) out << ' ' << nd;
    out << '\n';
  }

  out << "\n[demand]\n";
  for (const auto& e : inst.demand.entries) {
    out << "rate = " << e.object << ' ' << e.ingress << ' ' << fmt_double(e.rate) << '\n';
  }

  out << "\n[repositories]\n";
  for (const auto& seed : inst.repository_seeds) {
    out << "seed = " << seed.object << ' ' << seed.node << '\n';
  }
  return out.str();
}

void write_instance(const Instance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << format_instance(inst);
}

Allocation parse_allocation(std::istream& in) {
  Allocation a;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto cells = split(s, ',');
    if (cells.size() != 2) throw ParseError("expected 'object,node'", line);
    const Approximizer x{static_cast<std::int32_t>(parse_int(cells[0], line)),
                         static_cast<std::int32_t>(parse_int(cells[1], line))};
    if (a.contains(x)) throw ParseError("duplicate allocation entry", line);
    a.insert(x);
  }
  return a;
}

Allocation read_allocation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  return parse_allocation(in);
}

std::string format_allocation(const Allocation& a) {
  std::ostringstream out;
  out << "# object,node\n";
  for (const auto& x : a.items) out << x.object << ',' << x.node << '\n';
  return out.str();
}

void write_allocation(const Allocation& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << format_allocation(a);
}

}  // namespace simcache
