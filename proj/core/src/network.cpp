#include "cetk/network.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

using ojson = nlohmann::ordered_json;

namespace {

void recompute_node_counts(CauseEffectGraph& g) {
  std::map<std::size_t, std::size_t> counts;
  for (const auto& e : g.edges) {
    counts[e.source] += e.count;
    counts[e.target] += e.count;
  }
  std::vector<GraphNode> kept;
  for (auto& n : g.nodes) {
    auto it = counts.find(n.id);
    if (it == counts.end()) continue;
    n.count = it->second;
    kept.push_back(std::move(n));
  }
  g.nodes = std::move(kept);
}

}  // namespace

const GraphNode* CauseEffectGraph::node(std::size_t id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const GraphNode& n, std::size_t v) { return n.id < v; });
  return it != nodes.end() && it->id == id ? &*it : nullptr;
}

const GraphNode* CauseEffectGraph::node_by_label(std::string_view label) const {
  for (const auto& n : nodes) {
    if (n.label == label) return &n;
  }
  return nullptr;
}

std::size_t CauseEffectGraph::total_edge_count() const {
  std::size_t t = 0;
  for (const auto& e : edges) t += e.count;
  return t;
}

CauseEffectGraph build_graph(std::span<const CauseEffectRecord> records,
                             const ClusterSet& clusters) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_counts;
  std::map<std::size_t, const Cluster*> used;
  for (const auto& r : records) {
    for (std::size_t id : {r.cause_cluster, r.effect_cluster}) {
      const Cluster* c = clusters.find(id);
      if (c == nullptr) {
        throw Error(ErrorCode::UnresolvedCluster,
                    "record " + r.sentence_id + " references cluster " + std::to_string(id));
      }
      used[id] = c;
    }
    ++edge_counts[{r.cause_cluster, r.effect_cluster}];
  }
  CauseEffectGraph g;
  for (const auto& [id, c] : used) g.nodes.push_back({id, c->label, c->parent, 0});
  for (const auto& [key, count] : edge_counts) g.edges.push_back({key.first, key.second, count});
  recompute_node_counts(g);
  return g;
}

CauseEffectGraph filter_graph(const CauseEffectGraph& graph, std::size_t min_edge) {
  CauseEffectGraph g = graph;
  std::erase_if(g.edges, [&](const GraphEdge& e) { return e.count < min_edge; });
  recompute_node_counts(g);
  g.min_edge_applied = std::max(graph.min_edge_applied, min_edge);
  return g;
}

std::vector<PairRow> top_pairs(const CauseEffectGraph& graph, std::size_t k,
                               const std::optional<std::string>& exclude) {
  std::vector<PairRow> rows;
  for (const auto& e : graph.edges) {
    const GraphNode* src = graph.node(e.source);
    const GraphNode* dst = graph.node(e.target);
    if (exclude && (src->label == *exclude || dst->label == *exclude)) continue;
    rows.push_back({e.source, e.target, src->label, dst->label, e.count});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PairRow& a, const PairRow& b) { return a.count > b.count; });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

std::vector<EffectRow> effects_of(const CauseEffectGraph& graph, std::string_view label,
                                  std::size_t k) {
  const GraphNode* n = graph.node_by_label(label);
  if (n == nullptr) throw Error(ErrorCode::UnknownCluster, std::string(label));
  std::vector<EffectRow> rows;
  for (const auto& e : graph.edges) {
    if (e.source != n->id) continue;
    rows.push_back({e.target, graph.node(e.target)->label, e.count});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const EffectRow& a, const EffectRow& b) { return a.count > b.count; });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

std::vector<std::pair<std::string, std::string>> cause_effect_pairs(
    std::span<const std::string> causes, std::span<const std::string> effects) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : causes) {
    for (const auto& e : effects) out.emplace_back(c, e);
  }
  return out;
}

std::string graph_to_json(const CauseEffectGraph& graph) {
  ojson nodes = ojson::array();
  for (const auto& n : graph.nodes) {
    ojson o;
    o["id"] = n.id;
    o["label"] = n.label;
    o["parent"] = n.parent;
    o["count"] = n.count;
    nodes.push_back(std::move(o));
  }
  ojson edges = ojson::array();
  for (const auto& e : graph.edges) {
    ojson o;
    o["source"] = e.source;
    o["target"] = e.target;
    o["count"] = e.count;
    edges.push_back(std::move(o));
  }
  ojson obj;
  obj["schema_version"] = 1;
  obj["min_edge_applied"] = graph.min_edge_applied;
  obj["nodes"] = std::move(nodes);
  obj["edges"] = std::move(edges);
  return obj.dump();
}

CauseEffectGraph graph_from_json(std::string_view text) {
  try {
    const auto obj = ojson::parse(text);
    if (obj.at("schema_version").get<int>() != 1) {
      throw Error(ErrorCode::SchemaError, "unsupported graph schema version");
    }
    CauseEffectGraph g;
    g.min_edge_applied = obj.at("min_edge_applied").get<std::size_t>();
    for (const auto& n : obj.at("nodes")) {
      g.nodes.push_back({n.at("id").get<std::size_t>(), n.at("label").get<std::string>(),
                         n.at("parent").get<std::string>(), n.at("count").get<std::size_t>()});
    }
    for (const auto& e : obj.at("edges")) {
      GraphEdge edge{e.at("source").get<std::size_t>(), e.at("target").get<std::size_t>(),
                     e.at("count").get<std::size_t>()};
      if (edge.count < 1) throw Error(ErrorCode::SchemaError, "edge count must be >= 1");
      g.edges.push_back(edge);
    }
    std::sort(g.nodes.begin(), g.nodes.end(),
              [](const GraphNode& a, const GraphNode& b) { return a.id < b.id; });
    std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
      return std::pair(a.source, a.target) < std::pair(b.source, b.target);
    });
    for (const auto& e : g.edges) {
      if (!g.node(e.source) || !g.node(e.target)) {
        throw Error(ErrorCode::SchemaError, "edge references a missing node");
      }
    }
    return g;
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

void export_graph(const CauseEffectGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << graph_to_json(graph) << '\n';
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

CauseEffectGraph import_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return graph_from_json(buf.str());
}

std::string record_to_json(const CauseEffectRecord& r) {
  ojson obj;
  obj["sentence_id"] = r.sentence_id;
  obj["cause_phrase"] = r.cause_phrase;
  obj["effect_phrase"] = r.effect_phrase;
  obj["cause_cluster"] = r.cause_cluster;
  obj["effect_cluster"] = r.effect_cluster;
  return obj.dump();
}

CauseEffectRecord record_from_json(std::string_view text) {
  try {
    const auto obj = ojson::parse(text);
    return {obj.at("sentence_id").get<std::string>(), obj.at("cause_phrase").get<std::string>(),
            obj.at("effect_phrase").get<std::string>(), obj.at("cause_cluster").get<std::size_t>(),
            obj.at("effect_cluster").get<std::size_t>()};
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

std::vector<CauseEffectRecord> read_records(std::istream& in) {
  std::vector<CauseEffectRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

}  // namespace cetk
