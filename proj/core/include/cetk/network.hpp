#pragma once

// Directed weighted cause -> effect graph over clusters.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cetk/clustering.hpp"

namespace cetk {

inline constexpr std::size_t kDefaultMinEdge = 250;

struct CauseEffectRecord {
  std::string sentence_id;
  std::string cause_phrase;
  std::string effect_phrase;
  std::size_t cause_cluster = 0;
  std::size_t effect_cluster = 0;

  friend bool operator==(const CauseEffectRecord&, const CauseEffectRecord&) = default;
};

struct GraphNode {
  std::size_t id = 0;
  std::string label;
  std::string parent;
  /// Appearances as cause plus appearances as effect.
  std::size_t count = 0;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t count = 0;

  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Nodes sorted by id, edges by (source, target).
struct CauseEffectGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::size_t min_edge_applied = 1;

  const GraphNode* node(std::size_t id) const;
  const GraphNode* node_by_label(std::string_view label) const;
  std::size_t total_edge_count() const;

  friend bool operator==(const CauseEffectGraph&, const CauseEffectGraph&) = default;
};

/// Throws UnresolvedCluster when a record names a cluster not in `clusters`.
CauseEffectGraph build_graph(std::span<const CauseEffectRecord> records,
                             const ClusterSet& clusters);

/// Keeps edges with count >= min_edge, drops isolated nodes and recomputes
/// node counts from the surviving edges.
CauseEffectGraph filter_graph(const CauseEffectGraph& graph, std::size_t min_edge);

struct PairRow {
  std::size_t source = 0;
  std::size_t target = 0;
  std::string cause_label;
  std::string effect_label;
  std::size_t count = 0;
};

/// Count descending, ties by (source, target). Edges touching a cluster
/// labelled `exclude` are skipped.
std::vector<PairRow> top_pairs(const CauseEffectGraph& graph, std::size_t k,
                               const std::optional<std::string>& exclude = std::nullopt);

struct EffectRow {
  std::size_t id = 0;
  std::string label;
  std::size_t count = 0;
};

/// Outgoing edges of the named cluster, count descending. Throws UnknownCluster.
std::vector<EffectRow> effects_of(const CauseEffectGraph& graph, std::string_view label,
                                  std::size_t k);

/// Every cause span paired with every effect span of one sentence.
std::vector<std::pair<std::string, std::string>> cause_effect_pairs(
    std::span<const std::string> causes, std::span<const std::string> effects);

std::string graph_to_json(const CauseEffectGraph& graph);
CauseEffectGraph graph_from_json(std::string_view json);
/// Throws IoError.
void export_graph(const CauseEffectGraph& graph, const std::filesystem::path& path);
CauseEffectGraph import_graph(const std::filesystem::path& path);

std::string record_to_json(const CauseEffectRecord& record);
CauseEffectRecord record_from_json(std::string_view json);
std::vector<CauseEffectRecord> read_records(std::istream& in);

}  // namespace cetk
