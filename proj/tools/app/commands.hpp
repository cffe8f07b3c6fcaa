#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cetk/active_learning.hpp"
#include "cetk/classifier.hpp"
#include "cetk/clustering.hpp"
#include "cetk/crf.hpp"
#include "cetk/embeddings.hpp"
#include "cetk/network.hpp"
#include "store.hpp"

namespace cetk::app {

struct GlobalOptions {
  std::filesystem::path store = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> embeddings;
};

struct ClassifierOptions {
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> hidden;
  bool no_class_weights = false;
};

struct CrfOptions {
  double c1 = kDefaultCrfL1;
  double c2 = kDefaultCrfL2;
  std::size_t max_iterations = 200;
  std::size_t window = 0;
  double holdout = 0.1;
};

struct AlOptions {
  std::size_t sample = kDefaultRoundSample;
  std::optional<std::filesystem::path> resolutions;
  std::optional<std::size_t> epochs;
};

struct ClusterOptions {
  double threshold = kDefaultSimilarityThreshold;
  std::size_t min_count = kDefaultMinClusterCount;
  std::optional<std::filesystem::path> seeds;
  std::size_t top = 10;
};

struct NetworkOptions {
  std::size_t min_edge = kDefaultMinEdge;
  std::size_t top = 10;
  std::optional<std::string> exclude;
};

/// Every command returns its JSON report (one line, no trailing newline).
std::string cmd_ingest(const GlobalOptions& g, const std::filesystem::path& input,
                       const std::optional<std::filesystem::path>& annotations);
std::string cmd_train_classifier(const GlobalOptions& g, const ClassifierOptions& o);
std::string cmd_train_crf(const GlobalOptions& g, const CrfOptions& o);
std::string cmd_predict(const GlobalOptions& g);
std::string cmd_extract(const GlobalOptions& g);
std::string cmd_al_round(const GlobalOptions& g, const AlOptions& o);
std::string cmd_cluster(const GlobalOptions& g, const ClusterOptions& o);
std::string cmd_network(const GlobalOptions& g, const NetworkOptions& o);
std::string cmd_eval(const GlobalOptions& g, const std::optional<std::filesystem::path>& gold,
                     const std::optional<std::filesystem::path>& pred);
std::string cmd_kappa(const std::filesystem::path& a, const std::filesystem::path& b);

/// Embedding table named by the flag, falling back to the manifest.
EmbeddingTable resolve_embeddings(const GlobalOptions& g, const ProjectStore& store);
std::uint64_t resolve_seed(const GlobalOptions& g, const ProjectStore& store);

/// Parses {"sentence_id", "resolution": "confirm"|"reject", "spans"?}.
/// Throws SchemaError.
std::pair<std::string, Resolution> parse_resolution_request(std::string_view json);

std::string history_row_json(const HistoryRow& row);
std::string annotation_item_json(const AnnotationItem& item);

/// The active-learning loop bound to a store. Mutations are applied in
/// memory and buffered as events; commit() persists them atomically.
class AlController {
 public:
  AlController(const ProjectStore& store, std::shared_ptr<const EmbeddingTable> table,
               std::uint64_t seed, TrainConfig config);

  const AlState& state() const;
  void resolve(std::string_view sentence_id, Resolution resolution);
  /// Merges the previous round (if any), retrains, records history and
  /// stages the next sample. Throws QueueNotEmpty. Returns a summary.
  std::string advance(std::size_t sample_size);
  void commit();
  /// Drops uncommitted changes by reloading from disk.
  void reload();

 private:
  const ProjectStore& store_;
  std::shared_ptr<const EmbeddingTable> table_;
  std::uint64_t seed_;
  TrainConfig config_;
  std::unique_ptr<CrfModel> crf_;
  std::unique_ptr<ClassifierEnvironment> env_;
  std::unique_ptr<AlSession> session_;
  std::vector<std::string> committed_lines_;
  std::vector<std::string> pending_lines_;
  std::optional<MlpClassifier> trained_model_;
  std::vector<TrainingRecord> merged_clean_;
};

}  // namespace cetk::app
