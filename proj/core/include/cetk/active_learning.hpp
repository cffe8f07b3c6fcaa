#pragma once

// Human-in-the-loop training-set growth. Every mutation of AlState is an
// event; applying the same event stream to the same initial state always
// yields the same state, which is how the JSONL log is replayed.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cetk/classifier.hpp"
#include "cetk/crf.hpp"
#include "cetk/tagging.hpp"
#include "cetk/text.hpp"

namespace cetk {

inline constexpr std::size_t kDefaultRoundSample = 2000;

enum class Provenance { Clean, Noisy };

struct TrainingRecord {
  std::string sentence_id;
  bool causal = false;
  Provenance provenance = Provenance::Clean;
  std::vector<Span> spans;

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

enum class ResolutionKind { Pending, ConfirmedCausal, RejectedNonCausal };

struct Resolution {
  ResolutionKind kind = ResolutionKind::Pending;
  /// Corrected spans; only meaningful for ConfirmedCausal.
  std::vector<Span> spans;

  static Resolution confirm(std::vector<Span> spans) {
    return {ResolutionKind::ConfirmedCausal, std::move(spans)};
  }
  static Resolution reject() { return {ResolutionKind::RejectedNonCausal, {}}; }

  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// A model's view of one sampled sentence.
struct PredictedSentence {
  std::string sentence_id;
  std::string text;
  std::vector<std::string> tokens;
  bool causal = false;
  double probability = 0.0;
  std::optional<std::vector<Span>> spans;

  friend bool operator==(const PredictedSentence&, const PredictedSentence&) = default;
};

struct AnnotationItem {
  PredictedSentence prediction;
  Resolution resolution;

  const std::string& sentence_id() const { return prediction.sentence_id; }
  friend bool operator==(const AnnotationItem&, const AnnotationItem&) = default;
};

struct HistoryRow {
  std::size_t round = 0;
  /// Training-set size before the trainer's own train/validation split.
  std::size_t n_train = 0;
  /// Examples the classifier was actually fitted on after that split.
  std::size_t n_fit = 0;
  std::size_t n_noisy = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

struct AlState {
  std::size_t round = 0;
  std::vector<TrainingRecord> training_set;
  std::set<std::string> unlabeled_pool;
  /// Pending items, probability descending (ties by id).
  std::vector<AnnotationItem> pending_queue;
  /// Resolved items waiting for the merge, in resolution order.
  std::vector<TrainingRecord> staged_resolved;
  /// Predicted-non-causal sentences of the current round, sorted by id.
  std::vector<TrainingRecord> staged_noisy;
  std::vector<HistoryRow> history;
  bool exhausted = false;

  /// True when training set, pool, queue and staged records share no id.
  bool ids_disjoint() const;
  std::size_t pending_count() const;
  const AnnotationItem* find_item(std::string_view sentence_id) const;

  friend bool operator==(const AlState&, const AlState&) = default;
};

/// Uniform draw without replacement; the whole pool when n exceeds it.
/// Deterministic for a given pool and seed. Throws EmptyPool.
std::vector<std::string> sample_unlabeled(const AlState& state, std::size_t n,
                                          std::uint64_t seed);

struct Partition {
  std::vector<AnnotationItem> queue;
  std::vector<TrainingRecord> noisy;
};

/// Predicted-causal sentences become Pending items (probability descending);
/// the rest become noisy negatives (sorted by id).
Partition partition_predictions(std::span<const PredictedSentence> predictions);

// ---- events ---------------------------------------------------------------

struct InitializedEvent {
  std::vector<TrainingRecord> training_set;
  std::vector<std::string> pool;
  friend bool operator==(const InitializedEvent&, const InitializedEvent&) = default;
};

struct SampledEvent {
  std::size_t round = 0;
  std::uint64_t seed = 0;
  std::size_t requested = 0;
  std::vector<PredictedSentence> predictions;
  friend bool operator==(const SampledEvent&, const SampledEvent&) = default;
};

struct ResolvedEvent {
  std::string sentence_id;
  Resolution resolution;
  friend bool operator==(const ResolvedEvent&, const ResolvedEvent&) = default;
};

struct MergedEvent {
  /// Round number after the merge.
  std::size_t round = 0;
  friend bool operator==(const MergedEvent&, const MergedEvent&) = default;
};

struct TrainedEvent {
  HistoryRow row;
  friend bool operator==(const TrainedEvent&, const TrainedEvent&) = default;
};

struct ExhaustedEvent {
  std::size_t round = 0;
  friend bool operator==(const ExhaustedEvent&, const ExhaustedEvent&) = default;
};

using AlEvent = std::variant<InitializedEvent, SampledEvent, ResolvedEvent, MergedEvent,
                             TrainedEvent, ExhaustedEvent>;

std::string_view event_type(const AlEvent& event);

/// Validates and applies one event. Errors: UnknownItem, AlreadyResolved,
/// QueueNotEmpty, EmptyPool, SchemaError for events out of sequence.
void apply_event(AlState& state, const AlEvent& event);

std::string event_to_json(const AlEvent& event);
/// Throws SchemaError.
AlEvent event_from_json(std::string_view json);

/// Rebuilds a state from a JSONL event log. Throws SchemaError(line).
AlState replay_events(std::istream& in);

// ---- operations ------------------------------------------------------------

/// Receives each serialized event after it has been applied.
using EventSink = std::function<void(const std::string&)>;

/// State plus an optional log; each operation validates, applies and logs one
/// event.
class AlSession {
 public:
  /// Starts a fresh loop: `pool` minus the training-set ids forms the pool.
  AlSession(std::vector<TrainingRecord> training_set, std::span<const std::string> pool,
            EventSink sink = {});
  /// Resumes from an existing state without logging anything.
  explicit AlSession(AlState state, EventSink sink = {});

  const AlState& state() const noexcept { return state_; }

  /// Removes the predicted ids from the pool and stages them.
  void stage(std::uint64_t seed, std::size_t requested,
             std::vector<PredictedSentence> predictions);
  void resolve(std::string_view sentence_id, Resolution resolution);
  /// Appends staged records to the training set and advances the round.
  void merge_round();
  void record_history(const HistoryRow& row);
  void mark_exhausted();

 private:
  void emit(const AlEvent& event);

  AlState state_;
  EventSink sink_;
};

struct EvalSummary {
  std::size_t n_fit = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// Model side of the loop.
class AlEnvironment {
 public:
  virtual ~AlEnvironment() = default;
  /// Retrains on the state's training set and evaluates on held-out data.
  virtual EvalSummary train_and_evaluate(const AlState& state) = 0;
  /// Predictions for the given ids, using the most recently trained model.
  virtual std::vector<PredictedSentence> predict(std::span<const std::string> ids) = 0;
};

using Resolver = std::function<Resolution(const AnnotationItem&)>;

struct AlRoundConfig {
  std::size_t sample_size = kDefaultRoundSample;
  std::uint64_t seed = 42;
};

/// Alternates train, sample, partition, resolve and merge `k` times. History
/// ends with k + 1 rows unless the pool runs dry, in which case an exhausted
/// event is recorded and the loop stops. Round r uses configs[min(r, size-1)]
/// or the default config when `configs` is empty.
void run_rounds(AlSession& session, std::size_t k, std::span<const AlRoundConfig> configs,
                AlEnvironment& env, const Resolver& resolver);

HistoryRow make_history_row(const AlState& state, const EvalSummary& eval);

/// Classifier (and optionally CRF) backed environment over an in-memory corpus.
/// An empty `test_set` means "report the trainer's own stratified hold-out".
class ClassifierEnvironment : public AlEnvironment {
 public:
  struct Entry {
    Sentence sentence;
    Vector pooled;
  };

  ClassifierEnvironment(std::map<std::string, Entry> corpus, std::vector<LabeledVector> test_set,
                        TrainConfig config, const CrfModel* crf = nullptr,
                        const EmbeddingTable* table = nullptr);

  EvalSummary train_and_evaluate(const AlState& state) override;
  std::vector<PredictedSentence> predict(std::span<const std::string> ids) override;

  const MlpClassifier& model() const noexcept { return model_; }
  /// Installs an already trained model so predict() works without retraining.
  void set_model(MlpClassifier model);

 private:
  std::map<std::string, Entry> corpus_;
  std::vector<LabeledVector> test_set_;
  TrainConfig config_;
  const CrfModel* crf_;
  const EmbeddingTable* table_;
  MlpClassifier model_;
  bool trained_ = false;
};

}  // namespace cetk
