// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Links only the core library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cetk/active_learning.hpp"
#include "cetk/classifier.hpp"
#include "cetk/clustering.hpp"
#include "cetk/crf.hpp"
#include "cetk/embeddings.hpp"
#include "cetk/error.hpp"
#include "cetk/metrics.hpp"
#include "cetk/network.hpp"
#include "cetk/synthetic.hpp"
#include "cetk/tagging.hpp"
#include "cetk/text.hpp"
#include "oracles.hpp"

using namespace cetk;
namespace orc = cetk::oracle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void run(const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s  %s  (%s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

// ---- CRF oracle cases -------------------------------------------------------

struct OracleCase {
  CrfModel model;
  SequenceFeatures features;
};

// Half continuous weights, half small integers that produce exact ties.
std::vector<OracleCase> oracle_cases(std::size_t n) {
  Rng rng(2024);
  std::vector<OracleCase> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t T = 1 + rng.below(5);
    if (i % 2 == 0) {
      auto m = orc::random_model(rng, 1 + rng.below(4), 1.5);
      auto f = orc::random_features(rng, T, m.width());
      out.push_back({std::move(m), std::move(f)});
    } else {
      auto m = orc::integer_model(rng, 1 + rng.below(2));
      auto f = orc::integer_features(rng, T, m.width());
      out.push_back({std::move(m), std::move(f)});
    }
  }
  return out;
}

Outcome crf_inference_oracle() {
  Timer timer;
  Outcome o;
  const auto cases = oracle_cases(200);
  double worst = 0.0;
  std::size_t ties = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& [m, f] = cases[i];
    const auto ref = orc::enumerate(m, f);
    const double dz = std::abs(log_partition(m, f) - ref.log_z);
    worst = std::max(worst, dz);
    o.require(dz <= 1e-8, "log Z off by " + fmt("%.3g", dz) + " in case " + std::to_string(i));
    o.require(viterbi(m, f) == ref.best, "Viterbi differs from brute force in case " + std::to_string(i));
    std::size_t n_best = 0;
    for (const auto& p : orc::all_paths(f.length)) n_best += orc::path_score(m, f, p) == ref.best_score;
    ties += n_best > 1;
  }
  const double secs = timer.seconds();
  o.require(secs < 10.0, "took " + fmt("%.2f", secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(cases.size()) + " cases, " + std::to_string(ties) +
               " with tied optima, max |dlogZ| " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s";
  }
  return o;
}

Outcome crf_gradient_check() {
  Timer timer;
  Outcome o;
  Rng rng(99);
  double worst = 0.0;
  const std::size_t configs = 25;
  for (std::size_t c = 0; c < configs; ++c) {
    auto m = orc::random_model(rng, 1 + rng.below(3), 0.8);
    m.reg_l2 = rng.uniform(0.0, 0.3);
    m.reg_l1 = rng.uniform(0.0, 0.3);
    std::vector<TrainingSequence> batch;
    for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) {
      const std::size_t T = 1 + rng.below(6);
      batch.push_back({orc::random_features(rng, T, m.width()), orc::random_tags(rng, T)});
    }
    const auto analytic = nll_and_grad(m, batch).gradient;
    const auto numeric = orc::finite_difference(
        [&](const std::vector<double>& w) {
          CrfModel probe = m;
          probe.assign(w);
          return nll_and_grad(probe, batch).smooth_loss;
        },
        m.flatten(), 1e-5);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double err = orc::relative_error(analytic[i], numeric[i]);
      worst = std::max(worst, err);
      o.require(err <= 1e-4, "config " + std::to_string(c) + " param " + std::to_string(i) +
                                 " relative error " + fmt("%.3g", err));
    }
  }
  const double secs = timer.seconds();
  o.require(secs < 30.0, "took " + fmt("%.2f", secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(configs) + " configurations, max relative error " + fmt("%.2e", worst) +
               ", " + fmt("%.2f", secs) + " s";
  }
  return o;
}

Outcome marginal_consistency() {
  Outcome o;
  double worst = 0.0;
  const auto cases = oracle_cases(200);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& [m, f] = cases[i];
    const auto mg = marginals(m, f);
    const std::size_t T = f.length;
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (double p : mg.node[t]) s += p;
      worst = std::max(worst, std::abs(s - 1.0));
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (std::size_t j = 0; j < kNumTags; ++j) {
        double row = 0.0, col = 0.0;
        for (std::size_t k = 0; k < kNumTags; ++k) {
          row += mg.edge[t][j * kNumTags + k];
          col += mg.edge[t][k * kNumTags + j];
        }
        worst = std::max(worst, std::abs(row - mg.node[t][j]));
        worst = std::max(worst, std::abs(col - mg.node[t + 1][j]));
      }
    }
  }
  o.require(worst <= 1e-9, "max deviation " + fmt("%.3g", worst));
  if (o.pass) o.detail = "200 oracle cases, max deviation " + fmt("%.2e", worst);
  return o;
}

// ---- classifier -------------------------------------------------------------

Outcome classifier_gradient_check() {
  Outcome o;
  Rng rng(5);
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    auto m = MlpClassifier::initialized(3 + rng.below(4), 2 + rng.below(6), 700 + c);
    m.dropout_p = 0.0;
    auto p = m.flatten();
    for (double& v : p) v += 0.05 * rng.uniform(-1.0, 1.0);
    m.assign(p);
    m.class_weights = {rng.uniform(0.3, 2.0), rng.uniform(0.3, 5.0)};
    std::vector<double> x(m.dim_in);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const int label = static_cast<int>(rng.below(2));
    std::vector<double> grad(m.parameter_count(), 0.0);
    accumulate_gradient(m, x, label, grad);
    const auto num = orc::finite_difference(
        [&](const std::vector<double>& w) {
          MlpClassifier probe = m;
          probe.assign(w);
          return weighted_ce_loss(forward(probe, x), label, probe.class_weights);
        },
        p, 1e-5);
    for (std::size_t i = 0; i < num.size(); ++i) {
      const double err = orc::relative_error(grad[i], num[i]);
      worst = std::max(worst, err);
      o.require(err <= 1e-4, "config " + std::to_string(c) + " param " + std::to_string(i) +
                                 " relative error " + fmt("%.3g", err));
    }
  }
  // Unit class weights must reduce to plain cross entropy exactly.
  std::size_t exact = 0;
  for (int c = 0; c < 50; ++c) {
    auto m = MlpClassifier::initialized(4, 5, 900 + c);
    m.class_weights = {1.0, 1.0};
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const int label = c % 2;
    const Probabilities probs = forward(m, x);
    const double plain = -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-12));
    std::vector<double> grad(m.parameter_count(), 0.0);
    const bool same = weighted_ce_loss(probs, label, m.class_weights) == plain &&
                      accumulate_gradient(m, x, label, grad) == plain;
    exact += same;
    o.require(same, "weighted loss with (1,1) differs from cross entropy in case " + std::to_string(c));
  }
  if (o.pass) {
    o.detail = "20 configurations, max relative error " + fmt("%.2e", worst) + "; " +
               std::to_string(exact) + "/50 unit-weight losses bit-identical";
  }
  return o;
}

Outcome imbalance_behaviour() {
  Outcome o;
  // 7,218 majority vs 1,017 minority examples, overlapping Gaussian classes.
  Rng rng(17);
  const std::size_t dim = 12;
  std::vector<LabeledVector> data;
  for (std::size_t i = 0; i < 7218 + 1017; ++i) {
    LabeledVector ex;
    ex.label = i < 7218 ? 0 : 1;
    ex.x.resize(dim);
    for (double& v : ex.x) v = rng.normal();
    ex.x[0] += ex.label ? 1.0 : -1.0;
    ex.x[1] += ex.label ? 0.5 : -0.5;
    data.push_back(std::move(ex));
  }
  TrainConfig cfg;
  cfg.seed = 11;
  auto minority_recall = [&](bool weighted, double& secs) {
    TrainConfig c = cfg;
    c.use_class_weights = weighted;
    Timer t;
    const auto r = train_classifier(data, c);
    secs = t.seconds();
    return prf(*r.history.test_matrix, "causal").recall;
  };
  double t_w = 0.0, t_u = 0.0;
  const double weighted = minority_recall(true, t_w);
  const double unweighted = minority_recall(false, t_u);
  o.require(weighted >= unweighted, "weighted minority recall " + fmt("%.3f", weighted) +
                                        " below unweighted " + fmt("%.3f", unweighted));
  o.require(t_w < 60.0 && t_u < 60.0, "runs took " + fmt("%.1f", t_w) + " s and " + fmt("%.1f", t_u) + " s");
  if (o.pass) {
    o.detail = "minority recall weighted " + fmt("%.3f", weighted) + " vs unweighted " +
               fmt("%.3f", unweighted) + ", runs " + fmt("%.1f", t_w) + " s / " + fmt("%.1f", t_u) + " s";
  }
  return o;
}

// ---- synthetic end to end ---------------------------------------------------

std::string phrase_text(const Sentence& s, const Span& span) {
  const std::size_t b = s.tokens[span.start].start;
  return s.text.substr(b, s.tokens[span.end - 1].end - b);
}

Outcome synthetic_end_to_end() {
  Timer timer;
  Outcome o;
  const SyntheticCorpus corpus = generate_synthetic();
  const EmbeddingTable& table = corpus.embeddings;

  std::vector<Sentence> kept;
  for (const auto& t : corpus.tweets) {
    for (auto& s : process_tweet(t)) {
      if (s.status == SentenceStatus::Kept) kept.push_back(std::move(s));
    }
  }
  o.require(kept.size() == 2000, "kept " + std::to_string(kept.size()) + " sentences, designed 2000");
  std::map<std::string, const AnnotationRecord*> gold;
  for (const auto& a : corpus.annotations) gold[a.sentence_id] = &a;

  std::vector<int> labels;
  for (const auto& s : kept) labels.push_back(gold.at(s.id)->causal ? 1 : 0);
  const auto split = stratified_split(labels, 0.2, 0.0, 1234);
  std::set<std::size_t> heldout(split.test.begin(), split.test.end());

  std::vector<LabeledVector> train_vecs, test_vecs;
  std::vector<TaggedSentence> crf_train, crf_test;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& a = *gold.at(kept[i].id);
    LabeledVector v{mean_pool(kept[i], table), labels[i]};
    (heldout.count(i) ? test_vecs : train_vecs).push_back(std::move(v));
    if (a.causal) {
      (heldout.count(i) ? crf_test : crf_train)
          .push_back({kept[i], encode_io(kept[i].tokens.size(), a.spans)});
    }
  }

  TrainConfig cfg;
  cfg.test_fraction = 0.0;
  const auto clf = train_classifier(train_vecs, cfg).model;
  const double f1 = macro(evaluate_classifier(clf, test_vecs)).f1;
  o.require(f1 >= 0.90, "held-out macro-F1 " + fmt("%.4f", f1));

  const auto crf = train_crf(crf_train, table, CrfTrainConfig{}).model;
  std::vector<IOTag> gt, pt;
  for (const auto& ts : crf_test) {
    const auto p = predict_tags(crf, ts.sentence, table);
    gt.insert(gt.end(), ts.tags.begin(), ts.tags.end());
    pt.insert(pt.end(), p.begin(), p.end());
  }
  const double token_acc = macro(confusion(gt, pt)).accuracy;
  o.require(token_acc >= 0.95, "held-out token accuracy " + fmt("%.4f", token_acc));

  // Extraction over the whole corpus, gated by the classifier.
  struct Extracted {
    std::string id;
    std::vector<std::string> causes, effects;
  };
  std::vector<Extracted> extracted;
  std::vector<std::string> phrases;
  for (const auto& s : kept) {
    if (predict_causal(clf, mean_pool(s, table)).label != CausalLabel::Causal) continue;
    Extracted e{s.id, {}, {}};
    for (const auto& sp : predict_spans(crf, s, table)) {
      (sp.role == Role::Cause ? e.causes : e.effects).push_back(phrase_text(s, sp));
    }
    phrases.insert(phrases.end(), e.causes.begin(), e.causes.end());
    phrases.insert(phrases.end(), e.effects.begin(), e.effects.end());
    extracted.push_back(std::move(e));
  }

  ClusterConfig ccfg;  // 0.55 and 10
  ClusterSet clusters = seed_clusters(corpus.seeds, table);
  std::map<std::string, std::size_t> phrase_cluster;
  for (const auto& [phrase, n] : canonical_phrase_order(phrases)) {
    phrase_cluster[phrase] = assign(phrase, clusters, table, ccfg, n).cluster_id;
  }
  const ClusterSet pruned = prune(clusters, ccfg);
  std::map<std::string, std::size_t> got_clusters;
  for (const auto& c : pruned.clusters()) got_clusters[c.label] = c.count;
  o.require(got_clusters == corpus.expected_cluster_counts,
            "cluster counts differ from the design (" + std::to_string(got_clusters.size()) + " vs " +
                std::to_string(corpus.expected_cluster_counts.size()) + " clusters)");

  std::vector<CauseEffectRecord> records;
  for (const auto& e : extracted) {
    for (const auto& [c, f] : cause_effect_pairs(e.causes, e.effects)) {
      CauseEffectRecord r{e.id, c, f, phrase_cluster.at(c), phrase_cluster.at(f)};
      if (pruned.find(r.cause_cluster) && pruned.find(r.effect_cluster)) records.push_back(r);
    }
  }
  const auto full = build_graph(records, pruned);
  const auto graph = filter_graph(full, corpus.min_edge);
  std::map<std::pair<std::string, std::string>, std::size_t> got_edges;
  for (const auto& e : graph.edges) {
    got_edges[{graph.node(e.source)->label, graph.node(e.target)->label}] = e.count;
  }
  o.require(got_edges == corpus.expected_edges, "graph edges differ from the design");

  const double secs = timer.seconds();
  o.require(secs < 300.0, "took " + fmt("%.1f", secs) + " s");
  if (o.pass) {
    o.detail = "macro-F1 " + fmt("%.4f", f1) + ", token accuracy " + fmt("%.4f", token_acc) + ", " +
               std::to_string(got_clusters.size()) + " clusters and " + std::to_string(got_edges.size()) +
               " edges at min_edge " + std::to_string(corpus.min_edge) + " match exactly, " +
               fmt("%.1f", secs) + " s";
  }
  return o;
}

// ---- active learning --------------------------------------------------------

Outcome active_learning_replay() {
  Timer timer;
  Outcome o;
  SyntheticConfig sc;
  sc.pair_scale = 5;
  sc.non_causal = 10500;
  const SyntheticCorpus corpus = generate_synthetic(sc);
  const EmbeddingTable& table = corpus.embeddings;

  std::map<std::string, ClassifierEnvironment::Entry> entries;
  std::vector<std::string> ids;
  for (const auto& t : corpus.tweets) {
    for (auto& s : process_tweet(t)) {
      if (s.status != SentenceStatus::Kept) continue;
      ids.push_back(s.id);
      Vector v = mean_pool(s, table);
      entries.emplace(ids.back(), ClassifierEnvironment::Entry{std::move(s), std::move(v)});
    }
  }
  std::map<std::string, const AnnotationRecord*> gold;
  for (const auto& a : corpus.annotations) gold[a.sentence_id] = &a;

  // Tweets are generated in shuffled order, so contiguous slices are random.
  const std::size_t n_initial = 5000, n_test = 1000;
  std::vector<TrainingRecord> initial;
  std::vector<LabeledVector> test;
  std::vector<TaggedSentence> crf_data;
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& a = *gold.at(ids[i]);
    if (i < n_initial) {
      initial.push_back({a.sentence_id, a.causal, Provenance::Clean, a.spans});
      if (a.causal && crf_data.size() < 500) {
        const auto& s = entries.at(a.sentence_id).sentence;
        crf_data.push_back({s, encode_io(s.tokens.size(), a.spans)});
      }
    } else if (i < n_initial + n_test) {
      test.push_back({entries.at(a.sentence_id).pooled, a.causal ? 1 : 0});
    } else {
      pool.push_back(a.sentence_id);
    }
  }
  o.require(pool.size() >= 4 * 2000, "pool too small: " + std::to_string(pool.size()));

  const auto crf = train_crf(crf_data, table, CrfTrainConfig{}).model;
  TrainConfig tc;
  tc.epochs = 10;
  ClassifierEnvironment env(entries, test, tc, &crf, &table);

  std::ostringstream log;
  AlSession session(initial, pool, [&](const std::string& line) { log << line << '\n'; });
  const Resolver resolver = [&](const AnnotationItem& item) {
    const auto& a = *gold.at(item.sentence_id());
    return a.causal ? Resolution::confirm(a.spans) : Resolution::reject();
  };
  const std::vector<AlRoundConfig> cfgs = {{2000, 101}, {2000, 102}, {2000, 103}, {2000, 104}};

  const std::size_t before = session.state().training_set.size();
  run_rounds(session, 1, std::span(cfgs).subspan(0, 1), env, resolver);
  const std::size_t growth = session.state().training_set.size() - before;
  o.require(growth == 2000, "round 1 grew the training set by " + std::to_string(growth));
  run_rounds(session, 3, std::span(cfgs).subspan(1), env, resolver);

  const AlState& final_state = session.state();
  o.require(final_state.round == 4, "finished at round " + std::to_string(final_state.round));
  o.require(final_state.history.size() == 5, "history has " + std::to_string(final_state.history.size()) + " rows");
  o.require(final_state.ids_disjoint(), "id sets overlap");

  std::istringstream in(log.str());
  const AlState replayed = replay_events(in);
  o.require(replayed == final_state, "replayed state differs");
  // Bit-identical: re-serializing the replayed history gives the same bytes.
  for (std::size_t i = 0; i < final_state.history.size() && i < replayed.history.size(); ++i) {
    o.require(event_to_json(TrainedEvent{replayed.history[i]}) ==
                  event_to_json(TrainedEvent{final_state.history[i]}),
              "history row " + std::to_string(i) + " serializes differently");
  }
  const double secs = timer.seconds();
  if (o.pass) {
    std::ostringstream d;
    d << "4 rounds of 2000, training set " << before << " -> " << final_state.training_set.size()
      << " (round 1 +" << growth << "), accuracy by round";
    for (const auto& r : final_state.history) d << ' ' << fmt("%.3f", r.accuracy);
    d << ", replay identical, " << fmt("%.1f", secs) << " s";
    o.detail = d.str();
  }
  return o;
}

// ---- metrics fixtures -------------------------------------------------------

Outcome metrics_fixtures() {
  Outcome o;
  ConfusionMatrix m({"0", "1"});
  m.add(0, 0, 20);
  m.add(0, 1, 5);
  m.add(1, 0, 10);
  m.add(1, 1, 15);
  auto near = [&](double got, double want, const std::string& what) {
    o.require(std::abs(got - want) <= 1e-12, what + " = " + fmt("%.17g", got));
  };
  const auto p0 = prf(m, std::size_t{0});
  const auto p1 = prf(m, std::size_t{1});
  near(p0.precision, 20.0 / 30.0, "precision(0)");
  near(p0.recall, 20.0 / 25.0, "recall(0)");
  near(p1.precision, 15.0 / 20.0, "precision(1)");
  near(p1.recall, 15.0 / 25.0, "recall(1)");
  near(p0.f1, 2.0 * (2.0 / 3.0) * 0.8 / (2.0 / 3.0 + 0.8), "f1(0)");
  const auto mac = macro(m);
  near(mac.accuracy, 0.7, "accuracy");
  near(mac.precision, (20.0 / 30.0 + 0.75) / 2.0, "macro precision");
  near(mac.recall, 0.7, "macro recall");

  std::vector<std::string> a, b;
  auto add = [&](const char* x, const char* y, int n) {
    for (int i = 0; i < n; ++i) {
      a.emplace_back(x);
      b.emplace_back(y);
    }
  };
  add("0", "0", 20);
  add("0", "1", 5);
  add("1", "0", 10);
  add("1", "1", 15);
  near(cohen_kappa(a, b), 0.4, "kappa");
  o.require(cohen_kappa(a, a) == 1.0, "identical annotators give kappa " + fmt("%.17g", cohen_kappa(a, a)));
  if (o.pass) o.detail = "P/R/F1, accuracy 0.7 and kappa 0.4 within 1e-12; identical annotators give 1.0";
  return o;
}

// ---- schema round trips -----------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome schema_round_trips() {
  Outcome o;
  const auto dir = fs::temp_directory_path() / "cetk_acceptance_schema";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const SyntheticCorpus corpus = generate_synthetic();

  // Embeddings.
  save_embeddings(corpus.embeddings, dir / "a.txt");
  save_embeddings(load_embeddings(dir / "a.txt"), dir / "b.txt");
  o.require(slurp(dir / "a.txt") == slurp(dir / "b.txt"), "embedding file changed");

  // Models.
  auto clf = MlpClassifier::initialized(corpus.embeddings.dim(), 7, 3);
  clf.class_weights = compute_class_weights({7218, 1017});
  const auto clf_text = classifier_to_json(clf);
  o.require(classifier_to_json(classifier_from_json(clf_text)) == clf_text, "classifier file changed");
  Rng rng(8);
  CrfModel crf(corpus.embeddings.dim(), 1);
  std::vector<double> w(crf.parameter_count());
  for (double& v : w) v = rng.normal() * 1e-3;
  crf.assign(w);
  const auto crf_text = crf_to_json(crf);
  o.require(crf_to_json(crf_from_json(crf_text)) == crf_text, "CRF file changed");

  // Annotations.
  std::string ann_a, ann_b;
  for (const auto& r : corpus.annotations) ann_a += annotation_to_json(r) + "\n";
  std::istringstream ann_in(ann_a);
  for (std::string line; std::getline(ann_in, line);) ann_b += annotation_to_json(annotation_from_json(line)) + "\n";
  o.require(ann_a == ann_b, "annotation lines changed");

  // Clusters and graph.
  ClusterSet clusters = seed_clusters(corpus.seeds, corpus.embeddings);
  std::vector<std::string> phrases;
  for (const auto& f : corpus.families) phrases.insert(phrases.end(), f.phrases.begin(), f.phrases.end());
  std::map<std::string, std::size_t> at;
  for (const auto& [p, n] : canonical_phrase_order(phrases)) {
    at[p] = assign(p, clusters, corpus.embeddings, ClusterConfig{}, n).cluster_id;
  }
  std::ostringstream c1, c2;
  write_clusters(clusters, c1);
  std::istringstream cin(c1.str());
  write_clusters(read_clusters(cin, corpus.embeddings), c2);
  o.require(c1.str() == c2.str(), "cluster file changed");

  std::vector<CauseEffectRecord> records;
  for (const auto& p : corpus.pairs) {
    const auto& cf = *std::find_if(corpus.families.begin(), corpus.families.end(),
                                   [&](const SyntheticFamily& f) { return f.label == p.cause; });
    const auto& ef = *std::find_if(corpus.families.begin(), corpus.families.end(),
                                   [&](const SyntheticFamily& f) { return f.label == p.effect; });
    for (std::size_t i = 0; i < p.count; ++i) {
      records.push_back({"r", cf.phrases[0], ef.phrases[0], at[cf.phrases[0]], at[ef.phrases[0]]});
    }
  }
  const auto graph = filter_graph(build_graph(records, clusters), 5);
  export_graph(graph, dir / "g1.json");
  export_graph(import_graph(dir / "g1.json"), dir / "g2.json");
  o.require(slurp(dir / "g1.json") == slurp(dir / "g2.json"), "graph file changed");

  fs::remove_all(dir);
  if (o.pass) o.detail = "embeddings, classifier, CRF, annotations, clusters and graph byte-identical";
  return o;
}

}  // namespace

int main() {
  run("crf-inference-oracle", crf_inference_oracle);
  run("crf-gradient-check", crf_gradient_check);
  run("crf-marginal-consistency", marginal_consistency);
  run("classifier-gradient-check", classifier_gradient_check);
  run("class-imbalance-weighting", imbalance_behaviour);
  run("synthetic-end-to-end", synthetic_end_to_end);
  run("active-learning-replay", active_learning_replay);
  run("metrics-fixtures", metrics_fixtures);
  run("schema-round-trips", schema_round_trips);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
