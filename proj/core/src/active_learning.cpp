#include "cetk/active_learning.hpp"

#include <algorithm>
#include <istream>
#include <unordered_set>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

using ojson = nlohmann::ordered_json;

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

bool contains_id(const std::vector<TrainingRecord>& records, std::string_view id) {
  return std::any_of(records.begin(), records.end(),
                     [&](const TrainingRecord& r) { return r.sentence_id == id; });
}

std::string_view provenance_name(Provenance p) {
  return p == Provenance::Clean ? "clean" : "noisy";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "clean") return Provenance::Clean;
  if (name == "noisy") return Provenance::Noisy;
  throw Error(ErrorCode::SchemaError, "unknown provenance '" + std::string(name) + "'");
}

std::string_view resolution_name(ResolutionKind kind) {
  switch (kind) {
    case ResolutionKind::Pending:
      return "pending";
    case ResolutionKind::ConfirmedCausal:
      return "confirm";
    case ResolutionKind::RejectedNonCausal:
      return "reject";
  }
  return "pending";
}

ResolutionKind parse_resolution(std::string_view name) {
  if (name == "confirm") return ResolutionKind::ConfirmedCausal;
  if (name == "reject") return ResolutionKind::RejectedNonCausal;
  if (name == "pending") return ResolutionKind::Pending;
  throw Error(ErrorCode::SchemaError, "unknown resolution '" + std::string(name) + "'");
}

ojson spans_json(const std::vector<Span>& spans) {
  ojson arr = ojson::array();
  for (const Span& s : spans) {
    ojson o;
    o["role"] = role_name(s.role);
    o["start"] = s.start;
    o["end"] = s.end;
    arr.push_back(std::move(o));
  }
  return arr;
}

std::vector<Span> spans_from(const ojson& arr) {
  std::vector<Span> out;
  for (const auto& s : arr) {
    out.push_back({parse_role(s.at("role").get<std::string>()), s.at("start").get<std::size_t>(),
                   s.at("end").get<std::size_t>()});
  }
  return out;
}

ojson record_json(const TrainingRecord& r) {
  ojson o;
  o["sentence_id"] = r.sentence_id;
  o["causal"] = r.causal;
  o["provenance"] = provenance_name(r.provenance);
  o["spans"] = spans_json(r.spans);
  return o;
}

TrainingRecord record_from(const ojson& o) {
  return {o.at("sentence_id").get<std::string>(), o.at("causal").get<bool>(),
          parse_provenance(o.at("provenance").get<std::string>()), spans_from(o.at("spans"))};
}

ojson prediction_json(const PredictedSentence& p) {
  ojson o;
  o["sentence_id"] = p.sentence_id;
  o["text"] = p.text;
  o["tokens"] = p.tokens;
  o["causal"] = p.causal;
  o["probability"] = p.probability;
  if (p.spans) o["spans"] = spans_json(*p.spans);
  return o;
}

PredictedSentence prediction_from(const ojson& o) {
  PredictedSentence p;
  p.sentence_id = o.at("sentence_id").get<std::string>();
  p.text = o.at("text").get<std::string>();
  p.tokens = o.at("tokens").get<std::vector<std::string>>();
  p.causal = o.at("causal").get<bool>();
  p.probability = o.at("probability").get<double>();
  if (auto it = o.find("spans"); it != o.end()) p.spans = spans_from(*it);
  return p;
}

ojson row_json(const HistoryRow& r) {
  ojson o;
  o["round"] = r.round;
  o["n_train"] = r.n_train;
  o["n_fit"] = r.n_fit;
  o["n_noisy"] = r.n_noisy;
  o["n_test"] = r.n_test;
  o["accuracy"] = r.accuracy;
  o["macro_precision"] = r.macro_precision;
  o["macro_recall"] = r.macro_recall;
  o["macro_f1"] = r.macro_f1;
  return o;
}

HistoryRow row_from(const ojson& o) {
  HistoryRow r;
  r.round = o.at("round").get<std::size_t>();
  r.n_train = o.at("n_train").get<std::size_t>();
  r.n_fit = o.at("n_fit").get<std::size_t>();
  r.n_noisy = o.at("n_noisy").get<std::size_t>();
  r.n_test = o.at("n_test").get<std::size_t>();
  r.accuracy = o.at("accuracy").get<double>();
  r.macro_precision = o.at("macro_precision").get<double>();
  r.macro_recall = o.at("macro_recall").get<double>();
  r.macro_f1 = o.at("macro_f1").get<double>();
  return r;
}

void apply(AlState& state, const InitializedEvent& e) {
  if (state.round != 0 || !state.training_set.empty() || !state.unlabeled_pool.empty() ||
      !state.history.empty()) {
    throw Error(ErrorCode::SchemaError, "initialized event on a non-empty state");
  }
  std::unordered_set<std::string> seen;
  for (const auto& r : e.training_set) {
    if (!seen.insert(r.sentence_id).second) {
      throw Error(ErrorCode::SchemaError, "duplicate training id " + r.sentence_id);
    }
  }
  state.training_set = e.training_set;
  for (const auto& id : e.pool) {
    if (!seen.count(id)) state.unlabeled_pool.insert(id);
  }
}

void apply(AlState& state, const SampledEvent& e) {
  if (e.round != state.round) {
    throw Error(ErrorCode::SchemaError, "sample recorded for round " + std::to_string(e.round) +
                                            " but state is at round " +
                                            std::to_string(state.round));
  }
  if (state.pending_count() > 0 || !state.staged_resolved.empty() || !state.staged_noisy.empty()) {
    throw Error(ErrorCode::QueueNotEmpty, "previous sample has not been merged");
  }
  auto expected = sample_unlabeled(state, e.requested, e.seed);
  std::vector<std::string> got;
  got.reserve(e.predictions.size());
  for (const auto& p : e.predictions) got.push_back(p.sentence_id);
  std::sort(expected.begin(), expected.end());
  std::sort(got.begin(), got.end());
  if (expected != got) {
    throw Error(ErrorCode::SchemaError, "predictions do not match the seeded sample");
  }
  for (const auto& id : got) state.unlabeled_pool.erase(id);
  Partition part = partition_predictions(e.predictions);
  state.pending_queue = std::move(part.queue);
  state.staged_noisy = std::move(part.noisy);
}

void apply(AlState& state, const ResolvedEvent& e) {
  if (e.resolution.kind == ResolutionKind::Pending) {
    throw Error(ErrorCode::SchemaError, "a resolution must be terminal");
  }
  auto it = std::find_if(state.pending_queue.begin(), state.pending_queue.end(),
                         [&](const AnnotationItem& i) { return i.sentence_id() == e.sentence_id; });
  if (it == state.pending_queue.end()) {
    if (contains_id(state.staged_resolved, e.sentence_id) ||
        contains_id(state.training_set, e.sentence_id)) {
      throw Error(ErrorCode::AlreadyResolved, e.sentence_id);
    }
    throw Error(ErrorCode::UnknownItem, e.sentence_id);
  }
  const bool causal = e.resolution.kind == ResolutionKind::ConfirmedCausal;
  if (causal) {
    // Rejects out-of-range and overlapping spans before anything changes.
    encode_io(it->prediction.tokens.size(), e.resolution.spans);
  }
  state.staged_resolved.push_back(
      {e.sentence_id, causal, Provenance::Clean, causal ? e.resolution.spans : std::vector<Span>{}});
  state.pending_queue.erase(it);
}

void apply(AlState& state, const MergedEvent& e) {
  if (state.pending_count() > 0) {
    throw Error(ErrorCode::QueueNotEmpty,
                std::to_string(state.pending_count()) + " items still pending");
  }
  if (e.round != state.round + 1) {
    throw Error(ErrorCode::SchemaError, "merge out of sequence");
  }
  for (auto& r : state.staged_resolved) state.training_set.push_back(std::move(r));
  for (auto& r : state.staged_noisy) state.training_set.push_back(std::move(r));
  state.staged_resolved.clear();
  state.staged_noisy.clear();
  state.round += 1;
}

void apply(AlState& state, const TrainedEvent& e) {
  if (e.row.round != state.round) {
    throw Error(ErrorCode::SchemaError, "history row for the wrong round");
  }
  state.history.push_back(e.row);
}

void apply(AlState& state, const ExhaustedEvent& e) {
  if (e.round != state.round) throw Error(ErrorCode::SchemaError, "exhausted out of sequence");
  state.exhausted = true;
}

}  // namespace

bool AlState::ids_disjoint() const {
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& id) { return seen.insert(id).second; };
  for (const auto& r : training_set) {
    if (!add(r.sentence_id)) return false;
  }
  for (const auto& id : unlabeled_pool) {
    if (!add(id)) return false;
  }
  for (const auto& i : pending_queue) {
    if (!add(i.sentence_id())) return false;
  }
  for (const auto& r : staged_resolved) {
    if (!add(r.sentence_id)) return false;
  }
  for (const auto& r : staged_noisy) {
    if (!add(r.sentence_id)) return false;
  }
  return true;
}

std::size_t AlState::pending_count() const { return pending_queue.size(); }

const AnnotationItem* AlState::find_item(std::string_view sentence_id) const {
  for (const auto& i : pending_queue) {
    if (i.sentence_id() == sentence_id) return &i;
  }
  return nullptr;
}

std::vector<std::string> sample_unlabeled(const AlState& state, std::size_t n,
                                          std::uint64_t seed) {
  if (state.unlabeled_pool.empty()) throw Error(ErrorCode::EmptyPool, "unlabeled pool is empty");
  std::vector<std::string> ids(state.unlabeled_pool.begin(), state.unlabeled_pool.end());
  if (n >= ids.size()) return ids;
  // Partial Fisher-Yates: the first n slots end up as a uniform sample.
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  return ids;
}

Partition partition_predictions(std::span<const PredictedSentence> predictions) {
  Partition part;
  for (const auto& p : predictions) {
    if (p.causal) {
      part.queue.push_back({p, {}});
    } else {
      part.noisy.push_back({p.sentence_id, false, Provenance::Noisy, {}});
    }
  }
  std::sort(part.queue.begin(), part.queue.end(),
            [](const AnnotationItem& a, const AnnotationItem& b) {
              if (a.prediction.probability != b.prediction.probability) {
                return a.prediction.probability > b.prediction.probability;
              }
              return a.sentence_id() < b.sentence_id();
            });
  std::sort(part.noisy.begin(), part.noisy.end(),
            [](const TrainingRecord& a, const TrainingRecord& b) {
              return a.sentence_id < b.sentence_id;
            });
  return part;
}

std::string_view event_type(const AlEvent& event) {
  return std::visit(Overloaded{
                        [](const InitializedEvent&) { return std::string_view("initialized"); },
                        [](const SampledEvent&) { return std::string_view("sampled"); },
                        [](const ResolvedEvent&) { return std::string_view("resolved"); },
                        [](const MergedEvent&) { return std::string_view("merged"); },
                        [](const TrainedEvent&) { return std::string_view("trained"); },
                        [](const ExhaustedEvent&) { return std::string_view("exhausted"); },
                    },
                    event);
}

void apply_event(AlState& state, const AlEvent& event) {
  // Apply to a copy so a rejected event leaves the state untouched.
  AlState next = state;
  std::visit([&](const auto& e) { apply(next, e); }, event);
  state = std::move(next);
}

std::string event_to_json(const AlEvent& event) {
  ojson o;
  o["type"] = event_type(event);
  std::visit(Overloaded{
                 [&](const InitializedEvent& e) {
                   ojson records = ojson::array();
                   for (const auto& r : e.training_set) records.push_back(record_json(r));
                   o["training_set"] = std::move(records);
                   o["pool"] = e.pool;
                 },
                 [&](const SampledEvent& e) {
                   o["round"] = e.round;
                   o["seed"] = e.seed;
                   o["requested"] = e.requested;
                   ojson preds = ojson::array();
                   for (const auto& p : e.predictions) preds.push_back(prediction_json(p));
                   o["predictions"] = std::move(preds);
                 },
                 [&](const ResolvedEvent& e) {
                   o["sentence_id"] = e.sentence_id;
                   o["resolution"] = resolution_name(e.resolution.kind);
                   o["spans"] = spans_json(e.resolution.spans);
                 },
                 [&](const MergedEvent& e) { o["round"] = e.round; },
                 [&](const TrainedEvent& e) { o["row"] = row_json(e.row); },
                 [&](const ExhaustedEvent& e) { o["round"] = e.round; },
             },
             event);
  return o.dump();
}

AlEvent event_from_json(std::string_view text) {
  try {
    const auto o = ojson::parse(text);
    const auto type = o.at("type").get<std::string>();
    if (type == "initialized") {
      InitializedEvent e;
      for (const auto& r : o.at("training_set")) e.training_set.push_back(record_from(r));
      e.pool = o.at("pool").get<std::vector<std::string>>();
      return e;
    }
    if (type == "sampled") {
      SampledEvent e;
      e.round = o.at("round").get<std::size_t>();
      e.seed = o.at("seed").get<std::uint64_t>();
      e.requested = o.at("requested").get<std::size_t>();
      for (const auto& p : o.at("predictions")) e.predictions.push_back(prediction_from(p));
      return e;
    }
    if (type == "resolved") {
      ResolvedEvent e;
      e.sentence_id = o.at("sentence_id").get<std::string>();
      e.resolution.kind = parse_resolution(o.at("resolution").get<std::string>());
      e.resolution.spans = spans_from(o.at("spans"));
      return e;
    }
    if (type == "merged") return MergedEvent{o.at("round").get<std::size_t>()};
    if (type == "trained") return TrainedEvent{row_from(o.at("row"))};
    if (type == "exhausted") return ExhaustedEvent{o.at("round").get<std::size_t>()};
    throw Error(ErrorCode::SchemaError, "unknown event type '" + type + "'");
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

AlState replay_events(std::istream& in) {
  AlState state;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      apply_event(state, event_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), e.detail(), line_no);
    }
  }
  return state;
}

AlSession::AlSession(std::vector<TrainingRecord> training_set, std::span<const std::string> pool,
                     EventSink sink)
    : sink_(std::move(sink)) {
  emit(InitializedEvent{std::move(training_set), {pool.begin(), pool.end()}});
}

AlSession::AlSession(AlState state, EventSink sink)
    : state_(std::move(state)), sink_(std::move(sink)) {}

void AlSession::emit(const AlEvent& event) {
  apply_event(state_, event);
  if (sink_) sink_(event_to_json(event));
}

void AlSession::stage(std::uint64_t seed, std::size_t requested,
                      std::vector<PredictedSentence> predictions) {
  emit(SampledEvent{state_.round, seed, requested, std::move(predictions)});
}

void AlSession::resolve(std::string_view sentence_id, Resolution resolution) {
  emit(ResolvedEvent{std::string(sentence_id), std::move(resolution)});
}

void AlSession::merge_round() { emit(MergedEvent{state_.round + 1}); }

void AlSession::record_history(const HistoryRow& row) { emit(TrainedEvent{row}); }

void AlSession::mark_exhausted() { emit(ExhaustedEvent{state_.round}); }

HistoryRow make_history_row(const AlState& state, const EvalSummary& eval) {
  HistoryRow row;
  row.round = state.round;
  row.n_train = state.training_set.size();
  row.n_noisy = static_cast<std::size_t>(
      std::count_if(state.training_set.begin(), state.training_set.end(),
                    [](const TrainingRecord& r) { return r.provenance == Provenance::Noisy; }));
  row.n_fit = eval.n_fit;
  row.n_test = eval.n_test;
  row.accuracy = eval.accuracy;
  row.macro_precision = eval.macro_precision;
  row.macro_recall = eval.macro_recall;
  row.macro_f1 = eval.macro_f1;
  return row;
}

void run_rounds(AlSession& session, std::size_t k, std::span<const AlRoundConfig> configs,
                AlEnvironment& env, const Resolver& resolver) {
  auto train = [&] {
    const EvalSummary eval = env.train_and_evaluate(session.state());
    session.record_history(make_history_row(session.state(), eval));
  };
  const auto& st = session.state();
  if (st.history.empty() || st.history.back().round != st.round) train();

  for (std::size_t i = 0; i < k; ++i) {
    if (st.exhausted) break;
    if (st.unlabeled_pool.empty()) {
      session.mark_exhausted();
      break;
    }
    AlRoundConfig cfg;
    if (!configs.empty()) cfg = configs[std::min(i, configs.size() - 1)];
    const auto ids = sample_unlabeled(st, cfg.sample_size, cfg.seed);
    session.stage(cfg.seed, cfg.sample_size, env.predict(ids));
    while (!st.pending_queue.empty()) {
      const AnnotationItem item = st.pending_queue.front();
      session.resolve(item.sentence_id(), resolver(item));
    }
    session.merge_round();
    train();
  }
}

ClassifierEnvironment::ClassifierEnvironment(std::map<std::string, Entry> corpus,
                                             std::vector<LabeledVector> test_set,
                                             TrainConfig config, const CrfModel* crf,
                                             const EmbeddingTable* table)
    : corpus_(std::move(corpus)),
      test_set_(std::move(test_set)),
      config_(config),
      crf_(crf),
      table_(table) {}

EvalSummary ClassifierEnvironment::train_and_evaluate(const AlState& state) {
  std::vector<LabeledVector> data;
  data.reserve(state.training_set.size());
  for (const auto& r : state.training_set) {
    auto it = corpus_.find(r.sentence_id);
    if (it == corpus_.end()) throw Error(ErrorCode::UnknownItem, r.sentence_id);
    data.push_back({it->second.pooled, r.causal ? 1 : 0});
  }
  TrainConfig cfg = config_;
  // With a fixed external test set the whole training set is used for
  // fitting; otherwise the stratified hold-out of the trainer is reported.
  if (!test_set_.empty()) cfg.test_fraction = 0.0;
  TrainResult result = train_classifier(data, cfg);
  model_ = std::move(result.model);
  trained_ = true;

  std::optional<ConfusionMatrix> matrix;
  if (!test_set_.empty()) {
    matrix = evaluate_classifier(model_, test_set_);
  } else {
    matrix = std::move(result.history.test_matrix);
  }
  EvalSummary out;
  out.n_fit = result.history.n_train;
  if (matrix && matrix->total() > 0) {
    const auto m = macro(*matrix);
    out.n_test = matrix->total();
    out.accuracy = m.accuracy;
    out.macro_precision = m.precision;
    out.macro_recall = m.recall;
    out.macro_f1 = m.f1;
  }
  return out;
}

void ClassifierEnvironment::set_model(MlpClassifier model) {
  model_ = std::move(model);
  trained_ = true;
}

std::vector<PredictedSentence> ClassifierEnvironment::predict(std::span<const std::string> ids) {
  if (!trained_) throw Error(ErrorCode::MissingModel, "classifier has not been trained yet");
  std::vector<PredictedSentence> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = corpus_.find(id);
    if (it == corpus_.end()) throw Error(ErrorCode::UnknownItem, id);
    const Entry& e = it->second;
    const CausalPrediction pred = predict_causal(model_, e.pooled);
    const Probabilities probs = forward(model_, e.pooled);
    PredictedSentence p;
    p.sentence_id = id;
    p.text = e.sentence.text;
    p.tokens = e.sentence.token_texts();
    p.causal = pred.label == CausalLabel::Causal;
    p.probability = probs[1];
    if (p.causal && crf_ != nullptr && table_ != nullptr) {
      p.spans = predict_spans(*crf_, e.sentence, *table_);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cetk
