#pragma once

// Linear-chain CRF over the three IO tags. Each token contributes a dense
// feature vector (its embedding, optionally neighbours' embeddings) followed
// by three discrete slots: is_lower, is_digit and the clamped, scaled word
// length. Emission score for tag y at position t is emission_weights[y] . x_t.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cetk/embeddings.hpp"
#include "cetk/lbfgs.hpp"
#include "cetk/tagging.hpp"
#include "cetk/text.hpp"

namespace cetk {

inline constexpr double kDefaultCrfL1 = 0.1;
inline constexpr double kDefaultCrfL2 = 0.1;
inline constexpr double kWordLengthScale = 20.0;
inline constexpr std::size_t kDiscreteFeatures = 3;

struct TokenFeatures {
  Vector dense;
  bool is_lower = false;
  bool is_digit = false;
  std::size_t word_length = 0;
};

TokenFeatures token_features(std::string_view token, const EmbeddingTable& table);

/// Throws EmptySentence.
std::vector<TokenFeatures> extract_features(const Sentence& sentence,
                                            const EmbeddingTable& table);

/// Row-major T x F matrix of per-position feature vectors.
struct SequenceFeatures {
  std::size_t length = 0;
  std::size_t width = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t t) const {
    return {values.data() + t * width, width};
  }
};

/// Width of the feature vector for a given dense dimension and context window.
constexpr std::size_t feature_width(std::size_t dim_dense, std::size_t window) {
  return (2 * window + 1) * dim_dense + kDiscreteFeatures;
}

/// Lays out dense features for positions t-window..t+window (zeros past the
/// sentence edges), then the discrete slots.
SequenceFeatures feature_matrix(std::span<const TokenFeatures> tokens, std::size_t window = 0);

class CrfModel {
 public:
  CrfModel() = default;
  CrfModel(std::size_t dim_dense, std::size_t window);

  std::size_t dim_dense() const noexcept { return dim_dense_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t width() const noexcept { return feature_width(dim_dense_, window_); }

  double& emission(std::size_t tag, std::size_t feature) {
    return emission_[tag * width() + feature];
  }
  double emission(std::size_t tag, std::size_t feature) const {
    return emission_[tag * width() + feature];
  }
  double& transition(std::size_t from, std::size_t to) { return transition_[from * kNumTags + to]; }
  double transition(std::size_t from, std::size_t to) const {
    return transition_[from * kNumTags + to];
  }
  std::array<double, kNumTags>& start() { return start_; }
  const std::array<double, kNumTags>& start() const { return start_; }
  std::array<double, kNumTags>& end() { return end_; }
  const std::array<double, kNumTags>& end() const { return end_; }

  double reg_l1 = kDefaultCrfL1;
  double reg_l2 = kDefaultCrfL2;

  /// Layout: emission (tag-major), transition (from-major), start, end.
  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const CrfModel&, const CrfModel&) = default;

 private:
  std::size_t dim_dense_ = 0;
  std::size_t window_ = 0;
  std::vector<double> emission_;
  std::array<double, kNumTags * kNumTags> transition_{};
  std::array<double, kNumTags> start_{};
  std::array<double, kNumTags> end_{};
};

double emission_score(const CrfModel& model, const SequenceFeatures& feats, std::size_t t,
                      std::size_t tag);

/// All the functions below throw LengthMismatch when the sequence is empty,
/// the feature width disagrees with the model, or tags and features differ
/// in length.
double score_sequence(const CrfModel& model, const SequenceFeatures& feats,
                      std::span<const IOTag> tags);

double log_partition(const CrfModel& model, const SequenceFeatures& feats);

struct Marginals {
  /// node[t][y] = P(y_t = y | x)
  std::vector<std::array<double, kNumTags>> node;
  /// edge[t][j * 3 + k] = P(y_t = j, y_{t+1} = k | x), for t < T-1
  std::vector<std::array<double, kNumTags * kNumTags>> edge;
  double log_z = 0.0;
};

Marginals marginals(const CrfModel& model, const SequenceFeatures& feats);

/// Highest-scoring tag sequence. Ties resolve to the lowest tag index at
/// every backtracking step (I-C before I-E before O).
std::vector<IOTag> viterbi(const CrfModel& model, const SequenceFeatures& feats);

struct TrainingSequence {
  SequenceFeatures features;
  std::vector<IOTag> tags;
};

struct NllResult {
  /// Full objective including both penalties.
  double loss = 0.0;
  /// Negative log-likelihood plus the L2 term; what the gradient differentiates.
  double smooth_loss = 0.0;
  /// Gradient of smooth_loss, in CrfModel::flatten layout.
  std::vector<double> gradient;
};

/// loss = sum[log Z - score(gold)] + c1 * |w|_1 + (c2 / 2) * |w|^2 with
/// c1, c2 taken from the model. Throws EmptyBatch.
NllResult nll_and_grad(const CrfModel& model, std::span<const TrainingSequence> batch);

struct CrfTrainConfig {
  double c1 = kDefaultCrfL1;
  double c2 = kDefaultCrfL2;
  std::size_t max_iterations = 200;
  double tolerance = 1e-5;
  std::size_t window = 0;
  std::size_t memory = 6;
  /// Seeds the train/test split in the CLI; the optimizer itself starts
  /// from zero weights and is deterministic.
  std::uint64_t seed = 42;
};

struct CrfTrainResult {
  CrfModel model;
  LbfgsResult optimizer;
};

struct TaggedSentence {
  Sentence sentence;
  std::vector<IOTag> tags;
};

/// Throws EmptyDataset.
CrfTrainResult train_crf(std::span<const TrainingSequence> data, std::size_t dim_dense,
                         const CrfTrainConfig& config);
CrfTrainResult train_crf(std::span<const TaggedSentence> data, const EmbeddingTable& table,
                         const CrfTrainConfig& config);

TrainingSequence make_training_sequence(const TaggedSentence& tagged,
                                        const EmbeddingTable& table, std::size_t window);

std::vector<IOTag> predict_tags(const CrfModel& model, const Sentence& sentence,
                                const EmbeddingTable& table);
std::vector<Span> predict_spans(const CrfModel& model, const Sentence& sentence,
                                const EmbeddingTable& table);

std::string crf_to_json(const CrfModel& model);
CrfModel crf_from_json(std::string_view json);

}  // namespace cetk
