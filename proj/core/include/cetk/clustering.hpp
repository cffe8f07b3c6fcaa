#pragma once

// Semi-supervised grouping of cause/effect phrases. Human-labelled seed
// phrases form the initial clusters; every further phrase joins the cluster
// holding its most similar member, or opens a new cluster (parent "Other")
// when no member reaches the similarity threshold.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cetk/embeddings.hpp"

namespace cetk {

inline constexpr double kDefaultSimilarityThreshold = 0.55;
inline constexpr std::size_t kDefaultMinClusterCount = 10;
inline constexpr std::string_view kAutoClusterParent = "Other";

struct ClusterConfig {
  /// Inclusive: similarity >= threshold joins the cluster.
  double similarity_threshold = kDefaultSimilarityThreshold;
  std::size_t min_count = kDefaultMinClusterCount;

  void validate() const;
};

struct ClusterMember {
  std::string phrase;
  Vector vector;
};

struct Cluster {
  std::size_t id = 0;
  std::string label;
  std::string parent;
  std::vector<ClusterMember> members;
  std::size_t count = 0;
};

class ClusterSet {
 public:
  const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
  std::size_t size() const noexcept { return clusters_.size(); }
  bool empty() const noexcept { return clusters_.empty(); }

  const Cluster* find(std::size_t id) const;
  const Cluster* find_label(std::string_view label) const;
  /// Lowest cluster id holding `phrase` as a member, if any.
  const Cluster* find_member(std::string_view phrase) const;

  Cluster& create(std::string label, std::string parent);
  void add_member(std::size_t cluster_id, std::string phrase, Vector vector);
  void add_count(std::size_t cluster_id, std::size_t n);

  std::size_t total_count() const;
  std::size_t next_id() const noexcept { return next_id_; }

  /// Keeps clusters for which keep(cluster) is true; ids are not reused.
  template <typename Pred>
  ClusterSet filtered(Pred keep) const {
    ClusterSet out;
    out.next_id_ = next_id_;
    for (const auto& c : clusters_) {
      if (keep(c)) out.insert_existing(c);
    }
    return out;
  }

  void insert_existing(Cluster cluster);

 private:
  Cluster& mutable_cluster(std::size_t id);

  std::vector<Cluster> clusters_;
  std::unordered_map<std::size_t, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> member_index_;
  std::size_t next_id_ = 0;
};

struct SeedPhrase {
  std::string phrase;
  std::string cluster;
  std::string parent;
};

/// Mean of token lookup vectors. Throws EmptyPhrase when nothing tokenizes.
Vector phrase_vector(std::string_view phrase, const EmbeddingTable& table);

/// One cluster per distinct label in first-appearance order; repeated
/// phrases under a label collapse to one member and raise the count.
/// Throws EmptySeed.
ClusterSet seed_clusters(std::span<const SeedPhrase> seeds, const EmbeddingTable& table);

struct Assignment {
  std::size_t cluster_id = 0;
  double similarity = 0.0;
  bool created = false;
};

/// Assigns `occurrences` copies of `phrase`. A phrase that is already a
/// member joins that member's cluster with similarity 1. Ties on similarity
/// go to the lowest cluster id.
Assignment assign(std::string_view phrase, ClusterSet& clusters, const EmbeddingTable& table,
                  const ClusterConfig& config, std::size_t occurrences = 1);

/// Drops clusters whose count is below config.min_count.
ClusterSet prune(const ClusterSet& clusters, const ClusterConfig& config);

struct ClusterReportRow {
  std::size_t id = 0;
  std::string parent;
  std::string label;
  std::size_t count = 0;
};

/// Count descending, then id ascending; first k rows.
std::vector<ClusterReportRow> cluster_report(const ClusterSet& clusters, std::size_t k);

/// Distinct phrases with their frequencies, most frequent first, ties broken
/// lexicographically. This is the canonical processing order for assign.
std::vector<std::pair<std::string, std::size_t>> canonical_phrase_order(
    std::span<const std::string> phrases);

SeedPhrase seed_from_json(std::string_view json);
std::string seed_to_json(const SeedPhrase& seed);
std::vector<SeedPhrase> read_seeds(std::istream& in);

std::string cluster_to_json(const Cluster& cluster);
void write_clusters(const ClusterSet& clusters, std::ostream& out);
/// Member vectors are recomputed from `table`.
ClusterSet read_clusters(std::istream& in, const EmbeddingTable& table);

}  // namespace cetk
