#pragma once

// Generator for a templated cause/effect corpus with a matching embedding
// table, seed phrases and the frequency tables the full pipeline is expected
// to recover. Used by the acceptance tests, the demo data and benchmarks.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cetk/clustering.hpp"
#include "cetk/embeddings.hpp"
#include "cetk/tagging.hpp"
#include "cetk/text.hpp"

namespace cetk {

struct SyntheticFamily {
  std::string label;
  std::string parent;
  Role role = Role::Cause;
  std::vector<std::string> phrases;
  /// Seeded families contribute their first two phrases as seeds.
  bool seeded = true;
};

struct SyntheticPair {
  std::string cause;
  std::string effect;
  std::size_t count = 0;
};

struct SyntheticConfig {
  std::uint64_t seed = 7;
  /// Multiplies every designed pair count except the rare family's.
  std::size_t pair_scale = 1;
  std::size_t non_causal = 1200;
  /// Short and question tweets that the sentence filters must drop.
  std::size_t filtered_extras = 20;
  double noise = 0.04;
};

struct SyntheticCorpus {
  EmbeddingTable embeddings{1};
  std::vector<SyntheticFamily> families;
  std::vector<SyntheticPair> pairs;
  /// Every tweet holds exactly one sentence, id "<tweet id>:0".
  std::vector<Tweet> tweets;
  /// Gold labels for the kept sentences, in tweet order.
  std::vector<AnnotationRecord> annotations;
  std::vector<SeedPhrase> seeds;

  /// Smallest edge threshold that removes the rare pair and nothing else.
  std::size_t min_edge = 0;
  SyntheticPair rare_pair;
  /// Unseeded family whose cluster falls under the default min count.
  std::string rare_family;

  /// Cluster label -> count after pruning (seeds included).
  std::map<std::string, std::size_t> expected_cluster_counts;
  /// (cause label, effect label) -> count after the min_edge filter.
  std::map<std::pair<std::string, std::string>, std::size_t> expected_edges;

  std::size_t kept_sentences() const { return annotations.size(); }
};

/// The built-in family and pair design.
std::vector<SyntheticFamily> default_families();
std::vector<SyntheticPair> default_pairs();

SyntheticCorpus generate_synthetic(const SyntheticConfig& config = {});

}  // namespace cetk
