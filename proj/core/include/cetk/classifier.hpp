#pragma once

// Binary causal-sentence detector: two fully connected layers (rectifier
// hidden layer, inverted dropout) feeding a two-way softmax, trained with
// class-weighted categorical cross entropy and Adam under a linearly
// decaying learning rate.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cetk/embeddings.hpp"
#include "cetk/metrics.hpp"
#include "cetk/random.hpp"

namespace cetk {

inline constexpr double kDefaultDropout = 0.3;

using Probabilities = std::array<double, 2>;
using ClassWeights = std::array<double, 2>;

enum class CausalLabel : int { NonCausal = 0, Causal = 1 };

struct MlpClassifier {
  std::size_t dim_in = 0;
  std::size_t dim_hidden = 0;
  std::vector<double> w1;  // dim_hidden x dim_in, row-major
  std::vector<double> b1;  // dim_hidden
  std::vector<double> w2;  // 2 x dim_hidden, row-major
  std::vector<double> b2;  // 2
  double dropout_p = kDefaultDropout;
  ClassWeights class_weights = {1.0, 1.0};

  /// All-zero parameters.
  static MlpClassifier zeros(std::size_t dim_in, std::size_t dim_hidden);
  /// He-uniform first layer, Glorot-uniform output layer, zero biases.
  static MlpClassifier initialized(std::size_t dim_in, std::size_t dim_hidden,
                                   std::uint64_t seed);

  std::size_t parameter_count() const;
  /// Flat views in the order w1, b1, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  friend bool operator==(const MlpClassifier&, const MlpClassifier&) = default;
};

/// In train mode hidden units are dropped with probability dropout_p using
/// `rng` (required then); eval mode is deterministic and ignores `rng`.
Probabilities forward(const MlpClassifier& model, std::span<const double> x,
                      bool train_mode = false, Rng* rng = nullptr);

/// class_weights[label] * -ln(max(probs[label], 1e-12)).
double weighted_ce_loss(const Probabilities& probs, int label, const ClassWeights& weights);

/// Inverse frequency: w_k = N / (2 * n_k). Throws EmptyClass.
ClassWeights compute_class_weights(std::array<std::size_t, 2> counts);

/// Accumulates the gradient of weighted_ce_loss(forward(x)) into `grad`
/// (flat layout of MlpClassifier::flatten) and returns the loss.
double accumulate_gradient(const MlpClassifier& model, std::span<const double> x, int label,
                           std::span<double> grad, bool train_mode = false,
                           Rng* rng = nullptr);

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adaptive_eps = 1e-8;
  std::size_t epochs = 35;
  std::size_t early_stopping_patience = 5;
  std::size_t batch_size_train = 16;
  std::size_t batch_size_eval = 32;
  std::uint64_t seed = 42;
  /// 0 means "same as the input dimension".
  std::size_t dim_hidden = 0;
  double dropout_p = kDefaultDropout;
  bool use_class_weights = true;
  double test_fraction = 0.1;
  double validation_fraction = 0.2;
};

struct LabeledVector {
  Vector x;
  int label = 0;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Per-class stratified hold-out: round(test_fraction * n_c) of each class
/// goes to test, then round(validation_fraction * rest_c) to validation.
/// Index lists come back sorted.
DatasetSplit stratified_split(std::span<const int> labels, double test_fraction,
                              double validation_fraction, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;
  double learning_rate = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  ClassWeights class_weights = {1.0, 1.0};
  /// Present when the test split is non-empty.
  std::optional<ConfusionMatrix> test_matrix;
};

struct TrainResult {
  MlpClassifier model;
  TrainHistory history;
};

/// Throws InsufficientData (< 2 examples) and EmptyClass.
TrainResult train_classifier(std::span<const LabeledVector> dataset, const TrainConfig& config);

struct CausalPrediction {
  CausalLabel label = CausalLabel::NonCausal;
  double probability = 0.5;
};

/// Argmax of the eval-mode forward pass; an exact tie is non-causal.
CausalPrediction predict_causal(const MlpClassifier& model, std::span<const double> x);

/// Confusion matrix over labels {"non_causal", "causal"}.
ConfusionMatrix evaluate_classifier(const MlpClassifier& model,
                                    std::span<const LabeledVector> data);

std::string classifier_to_json(const MlpClassifier& model);
MlpClassifier classifier_from_json(std::string_view json);

}  // namespace cetk
