#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cetk/clustering.hpp"
#include "cetk/error.hpp"
#include "cetk/metrics.hpp"
#include "cetk/network.hpp"
#include "cetk/random.hpp"
#include "cetk/tagging.hpp"
#include "cetk/text.hpp"
#include "json.hpp"

namespace cetk::app {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> nonblank_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

std::vector<Sentence> load_sentences(const ProjectStore& store) {
  if (!store.exists(files::kSentences)) {
    throw Error(ErrorCode::IoError, "store has no sentences; run ingest first");
  }
  std::vector<Sentence> out;
  for (const auto& line : store.read_lines(files::kSentences)) out.push_back(sentence_from_json(line));
  return out;
}

std::vector<Sentence> kept_only(std::vector<Sentence> all) {
  std::erase_if(all, [](const Sentence& s) { return s.status != SentenceStatus::Kept; });
  return all;
}

std::vector<AnnotationRecord> read_annotation_lines(const std::vector<std::string>& lines) {
  std::vector<AnnotationRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : lines) {
    ++line_no;
    try {
      out.push_back(annotation_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), e.detail(), line_no);
    }
  }
  return out;
}

std::vector<AnnotationRecord> load_annotations(const ProjectStore& store) {
  return read_annotation_lines(store.read_lines(files::kAnnotations));
}

ojson spans_json(std::span<const Span> spans) {
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

std::string phrase_text(const Sentence& s, const Span& span) {
  const std::size_t b = s.tokens[span.start].start;
  const std::size_t e = s.tokens[span.end - 1].end;
  return s.text.substr(b, e - b);
}

ojson report(const ConfusionMatrix& m) { return ojson::parse(metrics_report_json(m)); }

ojson cluster_rows(const std::vector<ClusterReportRow>& rows) {
  ojson arr = ojson::array();
  for (const auto& r : rows) {
    ojson o;
    o["id"] = r.id;
    o["parent"] = r.parent;
    o["label"] = r.label;
    o["count"] = r.count;
    arr.push_back(std::move(o));
  }
  return arr;
}

MlpClassifier load_classifier(const ProjectStore& store) {
  const auto text = store.read(files::kClassifier);
  if (!text) throw Error(ErrorCode::MissingModel, "no classifier at " + store.path_of(files::kClassifier).string());
  return classifier_from_json(*text);
}

CrfModel load_crf(const ProjectStore& store) {
  const auto text = store.read(files::kCrf);
  if (!text) throw Error(ErrorCode::MissingModel, "no CRF at " + store.path_of(files::kCrf).string());
  return crf_from_json(*text);
}

TrainConfig classifier_config(const ClassifierOptions& o, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.hidden) cfg.dim_hidden = *o.hidden;
  cfg.use_class_weights = !o.no_class_weights;
  return cfg;
}

struct Prediction {
  std::string sentence_id;
  bool causal = false;
  std::vector<std::string> causes;
  std::vector<std::string> effects;
};

std::vector<Prediction> load_predictions(const ProjectStore& store) {
  if (!store.exists(files::kPredictions)) {
    throw Error(ErrorCode::IoError, "store has no predictions; run extract first");
  }
  std::vector<Prediction> out;
  for (const auto& line : store.read_lines(files::kPredictions)) {
    try {
      const auto o = ojson::parse(line);
      Prediction p;
      p.sentence_id = o.at("sentence_id").get<std::string>();
      p.causal = o.at("causal").get<bool>();
      p.causes = o.value("causes", std::vector<std::string>{});
      p.effects = o.value("effects", std::vector<std::string>{});
      out.push_back(std::move(p));
    } catch (const ojson::exception& e) {
      throw Error(ErrorCode::SchemaError, std::string("predictions: ") + e.what());
    }
  }
  return out;
}

std::string write_predictions(const GlobalOptions& g, bool with_spans) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  const MlpClassifier clf = load_classifier(store);
  std::optional<CrfModel> crf;
  if (with_spans) crf = load_crf(store);
  const EmbeddingTable table = resolve_embeddings(g, store);
  const auto sentences = kept_only(load_sentences(store));

  std::vector<std::string> lines;
  std::size_t n_causal = 0;
  std::size_t n_pairs = 0;
  for (const auto& s : sentences) {
    const Vector x = mean_pool(s, table);
    const CausalPrediction pred = predict_causal(clf, x);
    const bool causal = pred.label == CausalLabel::Causal;
    ojson o;
    o["sentence_id"] = s.id;
    o["causal"] = causal;
    o["probability"] = forward(clf, x)[1];
    if (causal) ++n_causal;
    if (with_spans) {
      // The classifier gates extraction: non-causal sentences are not tagged.
      std::vector<Span> spans;
      if (causal) spans = predict_spans(*crf, s, table);
      std::vector<std::string> causes;
      std::vector<std::string> effects;
      for (const Span& sp : spans) {
        (sp.role == Role::Cause ? causes : effects).push_back(phrase_text(s, sp));
      }
      n_pairs += causes.size() * effects.size();
      o["spans"] = spans_json(spans);
      o["causes"] = causes;
      o["effects"] = effects;
    }
    lines.push_back(o.dump());
  }
  ProjectStore::Transaction tx(store);
  tx.put(files::kPredictions, join_lines(lines));
  tx.commit();

  ojson out;
  out["command"] = with_spans ? "extract" : "predict";
  out["sentences"] = sentences.size();
  out["causal"] = n_causal;
  if (with_spans) out["pairs"] = n_pairs;
  out["output"] = std::string(files::kPredictions);
  return out.dump();
}

}  // namespace

EmbeddingTable resolve_embeddings(const GlobalOptions& g, const ProjectStore& store) {
  std::string path = g.embeddings.value_or(store.manifest().embeddings);
  if (path.empty()) throw Error(ErrorCode::IoError, "no embeddings given (use --embeddings)");
  return load_embeddings(fs::path(path));
}

std::uint64_t resolve_seed(const GlobalOptions& g, const ProjectStore& store) {
  return g.seed.value_or(store.manifest().seed);
}

std::string cmd_ingest(const GlobalOptions& g, const fs::path& input,
                       const std::optional<fs::path>& annotations) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  std::ifstream in(input, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + input.string());
  const auto tweets = read_tweets(in);

  std::vector<std::string> sentence_lines;
  std::map<std::string, std::size_t> token_counts;
  std::size_t kept = 0, short_n = 0, question_n = 0;
  for (const auto& t : tweets) {
    for (const auto& s : process_tweet(t)) {
      sentence_lines.push_back(sentence_to_json(s));
      switch (s.status) {
        case SentenceStatus::Kept:
          ++kept;
          token_counts[s.id] = s.tokens.size();
          break;
        case SentenceStatus::DroppedTooShort:
          ++short_n;
          break;
        case SentenceStatus::DroppedQuestion:
          ++question_n;
          break;
      }
    }
  }

  ProjectStore::Transaction tx(store);
  tx.put(files::kSentences, join_lines(sentence_lines));

  std::size_t n_annotations = 0;
  if (annotations) {
    const auto records = read_annotation_lines(nonblank_lines(read_file(*annotations)));
    std::vector<std::string> lines;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    for (const auto& r : records) {
      ++line_no;
      auto it = token_counts.find(r.sentence_id);
      if (it == token_counts.end()) {
        throw Error(ErrorCode::UnknownItem, "annotation for unknown or dropped sentence " + r.sentence_id, line_no);
      }
      if (!seen.insert(r.sentence_id).second) {
        throw Error(ErrorCode::SchemaError, "duplicate annotation for " + r.sentence_id, line_no);
      }
      encode_io(it->second, r.spans);
      lines.push_back(annotation_to_json(r));
    }
    n_annotations = lines.size();
    tx.put(files::kAnnotations, join_lines(lines));
  }

  Manifest m = store.manifest();
  if (g.seed) m.seed = *g.seed;
  if (g.embeddings) m.embeddings = fs::absolute(*g.embeddings).string();
  tx.put(files::kManifest, m.to_json());
  tx.commit();

  ojson out;
  out["command"] = "ingest";
  out["tweets"] = tweets.size();
  out["sentences"] = sentence_lines.size();
  out["kept"] = kept;
  out["dropped_too_short"] = short_n;
  out["dropped_question"] = question_n;
  out["annotations"] = n_annotations;
  return out.dump();
}

std::string cmd_train_classifier(const GlobalOptions& g, const ClassifierOptions& o) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  const EmbeddingTable table = resolve_embeddings(g, store);
  std::map<std::string, Sentence> by_id;
  for (auto& s : kept_only(load_sentences(store))) by_id.emplace(s.id, std::move(s));

  std::vector<LabeledVector> data;
  for (const auto& r : load_annotations(store)) {
    auto it = by_id.find(r.sentence_id);
    if (it == by_id.end()) continue;
    data.push_back({mean_pool(it->second, table), r.causal ? 1 : 0});
  }
  if (data.empty()) throw Error(ErrorCode::InsufficientData, "no labelled sentences in the store");

  const TrainResult result = train_classifier(data, classifier_config(o, resolve_seed(g, store)));
  ProjectStore::Transaction tx(store);
  tx.put(files::kClassifier, classifier_to_json(result.model) + "\n");
  tx.commit();

  const auto& h = result.history;
  ojson out;
  out["command"] = "train-classifier";
  out["model"] = std::string(files::kClassifier);
  out["n_train"] = h.n_train;
  out["n_validation"] = h.n_validation;
  out["n_test"] = h.n_test;
  out["epochs_run"] = h.epochs.size();
  out["best_epoch"] = h.best_epoch;
  out["stopped_early"] = h.stopped_early;
  out["class_weights"] = h.class_weights;
  out["metrics"] = h.test_matrix ? report(*h.test_matrix) : ojson(nullptr);
  return out.dump();
}

std::string cmd_train_crf(const GlobalOptions& g, const CrfOptions& o) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  const EmbeddingTable table = resolve_embeddings(g, store);
  std::map<std::string, Sentence> by_id;
  for (auto& s : kept_only(load_sentences(store))) by_id.emplace(s.id, std::move(s));

  std::vector<TaggedSentence> data;
  for (const auto& r : load_annotations(store)) {
    if (!r.causal || r.spans.empty()) continue;
    auto it = by_id.find(r.sentence_id);
    if (it == by_id.end()) continue;
    data.push_back({it->second, encode_io(it->second.tokens.size(), r.spans)});
  }
  if (data.empty()) throw Error(ErrorCode::InsufficientData, "no span annotations in the store");

  const std::uint64_t seed = resolve_seed(g, store);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_hold = static_cast<std::size_t>(
      std::llround(o.holdout * static_cast<double>(data.size())));
  std::vector<TaggedSentence> train;
  std::vector<TaggedSentence> held;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_hold && n_hold < data.size() ? held : train).push_back(data[order[i]]);
  }

  CrfTrainConfig cfg;
  cfg.c1 = o.c1;
  cfg.c2 = o.c2;
  cfg.max_iterations = o.max_iterations;
  cfg.window = o.window;
  cfg.seed = seed;
  const CrfTrainResult result = train_crf(train, table, cfg);

  ojson metrics = nullptr;
  if (!held.empty()) {
    std::vector<IOTag> gold;
    std::vector<IOTag> pred;
    for (const auto& ts : held) {
      const auto p = predict_tags(result.model, ts.sentence, table);
      gold.insert(gold.end(), ts.tags.begin(), ts.tags.end());
      pred.insert(pred.end(), p.begin(), p.end());
    }
    metrics = report(confusion(gold, pred));
  }

  ProjectStore::Transaction tx(store);
  tx.put(files::kCrf, crf_to_json(result.model) + "\n");
  tx.commit();

  ojson out;
  out["command"] = "train-crf";
  out["model"] = std::string(files::kCrf);
  out["n_train"] = train.size();
  out["n_heldout"] = held.size();
  out["iterations"] = result.optimizer.iterations;
  out["objective"] = result.optimizer.objective;
  out["stop"] = stop_reason_name(result.optimizer.stop);
  out["metrics"] = std::move(metrics);
  return out.dump();
}

std::string cmd_predict(const GlobalOptions& g) { return write_predictions(g, false); }

std::string cmd_extract(const GlobalOptions& g) { return write_predictions(g, true); }

std::string cmd_al_round(const GlobalOptions& g, const AlOptions& o) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  auto table = std::make_shared<const EmbeddingTable>(resolve_embeddings(g, store));
  const std::uint64_t seed = resolve_seed(g, store);
  ClassifierOptions co;
  co.epochs = o.epochs;
  AlController ctl(store, table, seed, classifier_config(co, seed));

  std::size_t applied = 0;
  if (o.resolutions) {
    for (const auto& line : nonblank_lines(read_file(*o.resolutions))) {
      auto [id, res] = parse_resolution_request(line);
      ctl.resolve(id, std::move(res));
      ++applied;
    }
  }
  ojson out;
  if (ctl.state().pending_count() > 0) {
    if (applied == 0) {
      throw Error(ErrorCode::QueueNotEmpty,
                  std::to_string(ctl.state().pending_count()) + " items await review");
    }
    out["command"] = "al-round";
    out["resolved"] = applied;
    out["pending"] = ctl.state().pending_count();
    out["round"] = ctl.state().round;
  } else {
    out = ojson::parse(ctl.advance(o.sample));
    out["resolved"] = applied;
  }
  ctl.commit();
  return out.dump();
}

std::string cmd_cluster(const GlobalOptions& g, const ClusterOptions& o) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  ClusterConfig cfg;
  cfg.similarity_threshold = o.threshold;
  cfg.min_count = o.min_count;
  cfg.validate();

  std::string seed_text;
  if (o.seeds) {
    seed_text = read_file(*o.seeds);
  } else {
    seed_text = store.read(files::kSeeds).value_or("");
  }
  std::istringstream seed_in(seed_text);
  const auto seeds = read_seeds(seed_in);
  const EmbeddingTable table = resolve_embeddings(g, store);
  ClusterSet clusters = seed_clusters(seeds, table);

  const auto predictions = load_predictions(store);
  std::vector<std::string> phrases;
  for (const auto& p : predictions) {
    phrases.insert(phrases.end(), p.causes.begin(), p.causes.end());
    phrases.insert(phrases.end(), p.effects.begin(), p.effects.end());
  }
  std::map<std::string, std::size_t> phrase_cluster;
  for (const auto& [phrase, n] : canonical_phrase_order(phrases)) {
    phrase_cluster[phrase] = assign(phrase, clusters, table, cfg, n).cluster_id;
  }
  const std::size_t before = clusters.size();
  const ClusterSet kept = prune(clusters, cfg);

  std::vector<std::string> record_lines;
  std::map<std::size_t, std::size_t> as_cause;
  std::map<std::size_t, std::size_t> as_effect;
  for (const auto& p : predictions) {
    for (const auto& c : p.causes) as_cause[phrase_cluster[c]] += 1;
    for (const auto& e : p.effects) as_effect[phrase_cluster[e]] += 1;
    for (const auto& [c, e] : cause_effect_pairs(p.causes, p.effects)) {
      CauseEffectRecord r{p.sentence_id, c, e, phrase_cluster[c], phrase_cluster[e]};
      // Records touching a pruned cluster do not reach the graph.
      if (!kept.find(r.cause_cluster) || !kept.find(r.effect_cluster)) continue;
      record_lines.push_back(record_to_json(r));
    }
  }

  auto role_rows = [&](const std::map<std::size_t, std::size_t>& counts) {
    std::vector<ClusterReportRow> rows;
    for (const auto& [id, n] : counts) {
      if (const Cluster* c = kept.find(id)) rows.push_back({id, c->parent, c->label, n});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.count > b.count;
    });
    if (rows.size() > o.top) rows.resize(o.top);
    return cluster_rows(rows);
  };

  std::ostringstream cluster_out;
  write_clusters(kept, cluster_out);
  Manifest m = store.manifest();
  m.similarity_threshold = cfg.similarity_threshold;
  m.min_count = cfg.min_count;

  ProjectStore::Transaction tx(store);
  if (o.seeds) tx.put(files::kSeeds, seed_text);
  tx.put(files::kClusters, cluster_out.str());
  tx.put(files::kRecords, join_lines(record_lines));
  tx.put(files::kManifest, m.to_json());
  tx.commit();

  ojson header;
  header["similarity_threshold"] = cfg.similarity_threshold;
  header["min_count"] = cfg.min_count;
  ojson out;
  out["command"] = "cluster";
  out["header"] = std::move(header);
  out["phrases"] = phrases.size();
  out["clusters_before_prune"] = before;
  out["clusters"] = kept.size();
  out["records"] = record_lines.size();
  out["top_clusters"] = cluster_rows(cluster_report(kept, o.top));
  out["top_causes"] = role_rows(as_cause);
  out["top_effects"] = role_rows(as_effect);
  return out.dump();
}

std::string cmd_network(const GlobalOptions& g, const NetworkOptions& o) {
  ProjectStore store(g.store);
  StoreLock lock(store.root());
  const EmbeddingTable table = resolve_embeddings(g, store);
  const auto cluster_text = store.read(files::kClusters);
  if (!cluster_text) throw Error(ErrorCode::IoError, "store has no clusters; run cluster first");
  std::istringstream cin_(*cluster_text);
  const ClusterSet clusters = read_clusters(cin_, table);
  std::istringstream rin(store.read(files::kRecords).value_or(""));
  const auto records = read_records(rin);

  const CauseEffectGraph full = build_graph(records, clusters);
  const CauseEffectGraph graph = filter_graph(full, o.min_edge);

  ProjectStore::Transaction tx(store);
  tx.put(files::kGraph, graph_to_json(graph) + "\n");
  tx.commit();

  const Manifest m = store.manifest();
  ojson header;
  header["similarity_threshold"] = m.similarity_threshold.value_or(kDefaultSimilarityThreshold);
  header["min_count"] = m.min_count.value_or(kDefaultMinClusterCount);
  header["min_edge"] = o.min_edge;
  ojson pairs = ojson::array();
  for (const auto& p : top_pairs(graph, o.top, o.exclude)) {
    ojson r;
    r["cause"] = p.cause_label;
    r["effect"] = p.effect_label;
    r["count"] = p.count;
    pairs.push_back(std::move(r));
  }
  ojson out;
  out["command"] = "network";
  out["header"] = std::move(header);
  out["nodes"] = graph.nodes.size();
  out["edges"] = graph.edges.size();
  out["edges_before_filter"] = full.edges.size();
  out["top_pairs"] = std::move(pairs);
  out["output"] = std::string(files::kGraph);
  return out.dump();
}

std::string cmd_eval(const GlobalOptions& g, const std::optional<fs::path>& gold_path,
                     const std::optional<fs::path>& pred_path) {
  ProjectStore store(g.store);
  const auto gold = gold_path ? read_annotation_lines(nonblank_lines(read_file(*gold_path)))
                              : load_annotations(store);
  const auto pred = pred_path ? read_annotation_lines(nonblank_lines(read_file(*pred_path)))
                              : read_annotation_lines(store.read_lines(files::kPredictions));
  std::map<std::string, const AnnotationRecord*> pred_by_id;
  for (const auto& p : pred) pred_by_id[p.sentence_id] = &p;

  std::map<std::string, std::size_t> token_counts;
  if (store.exists(files::kSentences)) {
    for (const auto& s : load_sentences(store)) token_counts[s.id] = s.tokens.size();
  }

  std::vector<std::string> gl, pl;
  std::vector<IOTag> gt, pt;
  for (const auto& r : gold) {
    auto it = pred_by_id.find(r.sentence_id);
    if (it == pred_by_id.end()) continue;
    gl.emplace_back(r.causal ? "causal" : "non_causal");
    pl.emplace_back(it->second->causal ? "causal" : "non_causal");
    auto tc = token_counts.find(r.sentence_id);
    if (r.causal && !r.spans.empty() && tc != token_counts.end()) {
      const auto g_tags = encode_io(tc->second, r.spans);
      const auto p_tags = encode_io(tc->second, it->second->spans);
      gt.insert(gt.end(), g_tags.begin(), g_tags.end());
      pt.insert(pt.end(), p_tags.begin(), p_tags.end());
    }
  }
  if (gl.empty()) throw Error(ErrorCode::EmptyInput, "no sentence appears in both files");
  ojson out;
  out["command"] = "eval";
  out["sentences"] = gl.size();
  out["classification"] = report(confusion(gl, pl, {"non_causal", "causal"}));
  out["tagging"] = gt.empty() ? ojson(nullptr) : report(confusion(gt, pt));
  return out.dump();
}

std::string cmd_kappa(const fs::path& a, const fs::path& b) {
  const auto ra = read_annotation_lines(nonblank_lines(read_file(a)));
  const auto rb = read_annotation_lines(nonblank_lines(read_file(b)));
  std::map<std::string, bool> bl;
  for (const auto& r : rb) bl[r.sentence_id] = r.causal;
  std::vector<std::string> la, lb;
  for (const auto& r : ra) {
    auto it = bl.find(r.sentence_id);
    if (it == bl.end()) continue;
    la.emplace_back(r.causal ? "causal" : "non_causal");
    lb.emplace_back(it->second ? "causal" : "non_causal");
  }
  const KappaDetail d = cohen_kappa_detail(la, lb);
  ojson out;
  out["command"] = "kappa";
  out["items"] = la.size();
  out["kappa"] = d.kappa;
  out["observed_agreement"] = d.observed;
  out["chance_agreement"] = d.chance;
  return out.dump();
}

std::pair<std::string, Resolution> parse_resolution_request(std::string_view text) {
  try {
    const auto o = ojson::parse(text);
    std::string id = o.at("sentence_id").get<std::string>();
    const auto kind = o.at("resolution").get<std::string>();
    Resolution res;
    if (kind == "confirm") {
      res.kind = ResolutionKind::ConfirmedCausal;
      if (auto it = o.find("spans"); it != o.end()) {
        for (const auto& s : *it) {
          res.spans.push_back({parse_role(s.at("role").get<std::string>()),
                               s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()});
        }
      }
    } else if (kind == "reject") {
      res.kind = ResolutionKind::RejectedNonCausal;
    } else {
      throw Error(ErrorCode::SchemaError, "resolution must be confirm or reject");
    }
    return {std::move(id), std::move(res)};
  } catch (const ojson::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

std::string history_row_json(const HistoryRow& r) {
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
  return o.dump();
}

std::string annotation_item_json(const AnnotationItem& item) {
  const auto& p = item.prediction;
  ojson o;
  o["sentence_id"] = p.sentence_id;
  o["text"] = p.text;
  o["tokens"] = p.tokens;
  o["predicted_causal"] = p.causal;
  o["predicted_probability"] = p.probability;
  o["spans_predicted"] = p.spans ? spans_json(*p.spans) : ojson(nullptr);
  o["resolution"] = "pending";
  return o.dump();
}

// ---- AlController ----------------------------------------------------------

AlController::AlController(const ProjectStore& store, std::shared_ptr<const EmbeddingTable> table,
                           std::uint64_t seed, TrainConfig config)
    : store_(store), table_(std::move(table)), seed_(seed), config_(config) {
  std::map<std::string, ClassifierEnvironment::Entry> corpus;
  for (auto& s : kept_only(load_sentences(store_))) {
    Vector pooled = mean_pool(s, *table_);
    std::string id = s.id;
    corpus.emplace(std::move(id), ClassifierEnvironment::Entry{std::move(s), std::move(pooled)});
  }
  if (store_.exists(files::kCrf)) crf_ = std::make_unique<CrfModel>(load_crf(store_));
  env_ = std::make_unique<ClassifierEnvironment>(std::move(corpus), std::vector<LabeledVector>{},
                                                 config_, crf_.get(), table_.get());
  reload();
}

void AlController::reload() {
  pending_lines_.clear();
  merged_clean_.clear();
  trained_model_.reset();
  committed_lines_ = store_.read_lines(files::kEvents);
  auto sink = [this](const std::string& line) { pending_lines_.push_back(line); };
  if (!committed_lines_.empty()) {
    std::istringstream in(join_lines(committed_lines_));
    session_ = std::make_unique<AlSession>(replay_events(in), sink);
    if (store_.exists(files::kClassifier)) env_->set_model(load_classifier(store_));
    return;
  }
  std::vector<TrainingRecord> training;
  std::set<std::string> labelled;
  for (const auto& r : load_annotations(store_)) {
    training.push_back({r.sentence_id, r.causal, Provenance::Clean, r.spans});
    labelled.insert(r.sentence_id);
  }
  std::vector<std::string> pool;
  for (const auto& s : kept_only(load_sentences(store_))) {
    if (!labelled.count(s.id)) pool.push_back(s.id);
  }
  session_ = std::make_unique<AlSession>(std::move(training), pool, sink);
}

const AlState& AlController::state() const { return session_->state(); }

void AlController::resolve(std::string_view sentence_id, Resolution resolution) {
  session_->resolve(sentence_id, std::move(resolution));
}

std::string AlController::advance(std::size_t sample_size) {
  const AlState& st = session_->state();
  if (st.pending_count() > 0) {
    throw Error(ErrorCode::QueueNotEmpty, std::to_string(st.pending_count()) + " items await review");
  }
  ojson out;
  out["command"] = "al-round";
  bool merged = false;
  if (!st.exhausted) {
    auto train = [&] {
      const EvalSummary eval = env_->train_and_evaluate(st);
      trained_model_ = env_->model();
      session_->record_history(make_history_row(st, eval));
    };
    if (!st.staged_resolved.empty() || !st.staged_noisy.empty()) {
      for (const auto& r : st.staged_resolved) merged_clean_.push_back(r);
      session_->merge_round();
      merged = true;
      train();
    } else if (st.history.empty() || st.history.back().round != st.round) {
      train();
    }
    if (st.unlabeled_pool.empty()) {
      session_->mark_exhausted();
    } else {
      const std::uint64_t round_seed = seed_ + st.round;
      const auto ids = sample_unlabeled(st, sample_size, round_seed);
      session_->stage(round_seed, sample_size, env_->predict(ids));
    }
  }
  out["merged"] = merged;
  out["round"] = st.round;
  out["training_set"] = st.training_set.size();
  out["pool"] = st.unlabeled_pool.size();
  out["queued"] = st.pending_count();
  out["noisy"] = st.staged_noisy.size();
  out["exhausted"] = st.exhausted;
  ojson rows = ojson::array();
  for (const auto& r : st.history) rows.push_back(ojson::parse(history_row_json(r)));
  out["history"] = std::move(rows);
  return out.dump();
}

void AlController::commit() {
  if (pending_lines_.empty() && !trained_model_) return;
  ProjectStore::Transaction tx(store_);
  std::vector<std::string> all = committed_lines_;
  all.insert(all.end(), pending_lines_.begin(), pending_lines_.end());
  tx.put(files::kEvents, join_lines(all));
  if (trained_model_) tx.put(files::kClassifier, classifier_to_json(*trained_model_) + "\n");
  if (!merged_clean_.empty()) {
    // Reviewed sentences become gold annotations for the CRF as well.
    std::vector<AnnotationRecord> records = load_annotations(store_);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) index[records[i].sentence_id] = i;
    for (const auto& r : merged_clean_) {
      AnnotationRecord a{r.sentence_id, r.causal, r.spans};
      if (auto it = index.find(r.sentence_id); it != index.end()) {
        records[it->second] = a;
      } else {
        index[r.sentence_id] = records.size();
        records.push_back(a);
      }
    }
    std::vector<std::string> lines;
    for (const auto& r : records) lines.push_back(annotation_to_json(r));
    tx.put(files::kAnnotations, join_lines(lines));
  }
  tx.commit();
  committed_lines_ = std::move(all);
  pending_lines_.clear();
  merged_clean_.clear();
  trained_model_.reset();
}

}  // namespace cetk::app
