#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cetk/error.hpp"
#include "commands.hpp"
#include "corpus_files.hpp"
#include "json.hpp"
#include "store.hpp"

using namespace cetk;
using namespace cetk::app;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == files::kLock) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class CommandsTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new SyntheticCorpus(generate_synthetic());
    dir_ = new fs::path(fixtures::scratch_dir("commands"));
    files_ = new fixtures::CorpusFiles(fixtures::write_corpus(*corpus_, *dir_ / "input"));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete files_;
    delete dir_;
    delete corpus_;
  }

  GlobalOptions fresh_store(const std::string& name) {
    GlobalOptions g;
    g.store = *dir_ / name;
    fs::remove_all(g.store);
    g.embeddings = files_->embeddings.string();
    g.seed = 42;
    return g;
  }

  static ClassifierOptions quick() {
    ClassifierOptions o;
    o.epochs = 10;
    return o;
  }

  static SyntheticCorpus* corpus_;
  static fs::path* dir_;
  static fixtures::CorpusFiles* files_;
};

SyntheticCorpus* CommandsTest::corpus_ = nullptr;
fs::path* CommandsTest::dir_ = nullptr;
fixtures::CorpusFiles* CommandsTest::files_ = nullptr;

}  // namespace

TEST(Manifest, RoundTripAndVersionCheck) {
  Manifest m;
  m.seed = 9;
  m.embeddings = "/x/e.txt";
  m.similarity_threshold = 0.6;
  const auto back = Manifest::from_json(m.to_json());
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.embeddings, "/x/e.txt");
  EXPECT_EQ(back.similarity_threshold, 0.6);
  EXPECT_FALSE(back.min_count.has_value());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(code_of([] { Manifest::from_json(R"({"schema_version":2})"); }), ErrorCode::SchemaError);
}

TEST(Store, TransactionsAreAllOrNothingAndLockIsExclusive) {
  const auto root = fixtures::scratch_dir("store");
  ProjectStore store(root);
  {
    ProjectStore::Transaction tx(store);
    tx.put("a.txt", "one");
    tx.put("models/b.txt", "two");
    EXPECT_FALSE(store.exists("a.txt"));
    tx.commit();
  }
  EXPECT_EQ(store.read("models/b.txt"), "two");
  EXPECT_EQ(store.read_lines("missing.jsonl").size(), 0u);
  {
    StoreLock lock(root);
    EXPECT_EQ(code_of([&] { StoreLock second(root); }), ErrorCode::StoreLocked);
  }
  StoreLock again(root);  // released with the first holder
  fs::remove_all(root);
}

TEST_F(CommandsTest, PipelineProducesTheDesignedGraph) {
  const auto g = fresh_store("pipeline");
  const auto ingest = json::parse(cmd_ingest(g, files_->tweets, files_->annotations));
  EXPECT_EQ(ingest["kept"], 2000);
  EXPECT_EQ(ingest["dropped_too_short"].get<int>() + ingest["dropped_question"].get<int>(), 20);
  EXPECT_EQ(ingest["annotations"], 2000);

  const auto clf = json::parse(cmd_train_classifier(g, quick()));
  EXPECT_GE(clf["metrics"]["macro"]["f1"].get<double>(), 0.9);
  const auto crf = json::parse(cmd_train_crf(g, CrfOptions{}));
  EXPECT_GT(crf["n_train"].get<int>(), 0);

  const auto extract = json::parse(cmd_extract(g));
  EXPECT_EQ(extract["sentences"], 2000);

  ClusterOptions co;
  co.seeds = files_->seeds;
  const auto cluster = json::parse(cmd_cluster(g, co));
  EXPECT_EQ(cluster["header"]["similarity_threshold"], 0.55);
  EXPECT_EQ(cluster["header"]["min_count"], 10);
  EXPECT_EQ(cluster["clusters"].get<std::size_t>(), corpus_->expected_cluster_counts.size());

  NetworkOptions defaults;
  const auto net250 = json::parse(cmd_network(g, defaults));
  EXPECT_EQ(net250["header"]["min_edge"], 250);
  EXPECT_EQ(net250["header"]["similarity_threshold"], 0.55);
  EXPECT_EQ(net250["header"]["min_count"], 10);

  NetworkOptions all;
  all.min_edge = 1;
  const auto net1 = json::parse(cmd_network(g, all));
  EXPECT_EQ(net1["edges"], net1["edges_before_filter"]);

  NetworkOptions designed;
  designed.min_edge = corpus_->min_edge;
  designed.top = 100;
  const auto net = json::parse(cmd_network(g, designed));
  EXPECT_EQ(net["edges"].get<std::size_t>(), corpus_->expected_edges.size());
  for (const auto& row : net["top_pairs"]) {
    const std::pair<std::string, std::string> key{row["cause"], row["effect"]};
    ASSERT_TRUE(corpus_->expected_edges.count(key)) << row.dump();
    EXPECT_EQ(row["count"].get<std::size_t>(), corpus_->expected_edges.at(key));
  }

  const auto eval = json::parse(cmd_eval(g, std::nullopt, std::nullopt));
  EXPECT_EQ(eval["sentences"], 2000);
  EXPECT_GE(eval["tagging"]["accuracy"].get<double>(), 0.95);
}

TEST_F(CommandsTest, TrainingIsReproducibleByteForByte) {
  const auto g = fresh_store("repro");
  cmd_ingest(g, files_->tweets, files_->annotations);
  cmd_train_classifier(g, quick());
  const auto first = ProjectStore(g.store).read(files::kClassifier);
  cmd_train_classifier(g, quick());
  EXPECT_EQ(ProjectStore(g.store).read(files::kClassifier), first);
  cmd_train_crf(g, CrfOptions{});
  const auto crf = ProjectStore(g.store).read(files::kCrf);
  cmd_train_crf(g, CrfOptions{});
  EXPECT_EQ(ProjectStore(g.store).read(files::kCrf), crf);
}

TEST_F(CommandsTest, FailuresLeaveTheStoreUntouched) {
  const auto g = fresh_store("failures");
  cmd_ingest(g, files_->tweets, std::nullopt);
  const auto before = snapshot(g.store);

  EXPECT_EQ(code_of([&] { cmd_train_classifier(g, quick()); }), ErrorCode::InsufficientData);
  EXPECT_EQ(code_of([&] { cmd_predict(g); }), ErrorCode::MissingModel);
  EXPECT_EQ(code_of([&] { cmd_extract(g); }), ErrorCode::MissingModel);
  EXPECT_EQ(code_of([&] { cmd_cluster(g, ClusterOptions{}); }), ErrorCode::EmptySeed);

  const auto bad = *dir_ / "bad_annotations.jsonl";
  write_text(bad, R"({"sentence_id":"nope:0","causal":false})" "\n");
  EXPECT_EQ(code_of([&] { cmd_ingest(g, files_->tweets, bad); }), ErrorCode::UnknownItem);
  write_text(bad, R"({"sentence_id":"syn0001:0","causal":true,"spans":[{"role":"cause","start":0,"end":99}]})" "\n");
  EXPECT_EQ(code_of([&] { cmd_ingest(g, files_->tweets, bad); }), ErrorCode::OutOfBounds);
  const auto broken = *dir_ / "broken.jsonl";
  write_text(broken, "{\"id\":\"1\",\"text\":\"fine\"}\nnot json\n");
  EXPECT_EQ(code_of([&] { cmd_ingest(g, broken, std::nullopt); }), ErrorCode::ParseError);

  {
    StoreLock held(g.store);
    EXPECT_EQ(code_of([&] { cmd_ingest(g, files_->tweets, std::nullopt); }),
              ErrorCode::StoreLocked);
  }
  EXPECT_EQ(snapshot(g.store), before);
}

TEST_F(CommandsTest, ActiveLearningRoundsThroughTheStore) {
  auto g = fresh_store("al");
  const auto partial = *dir_ / "partial.jsonl";
  {
    std::ofstream out(partial);
    for (std::size_t i = 0; i < 1200; ++i) out << annotation_to_json(corpus_->annotations[i]) << '\n';
  }
  cmd_ingest(g, files_->tweets, partial);
  cmd_train_crf(g, CrfOptions{});

  AlOptions o;
  o.sample = 150;
  o.epochs = 5;
  const auto r0 = json::parse(cmd_al_round(g, o));
  EXPECT_EQ(r0["round"], 0);
  EXPECT_EQ(r0["merged"], false);
  EXPECT_EQ(r0["training_set"], 1200);
  EXPECT_EQ(r0["pool"], 800 - 150);
  EXPECT_EQ(r0["history"].size(), 1u);
  const std::size_t queued = r0["queued"];
  ASSERT_GT(queued, 0u);

  // Pending items block the next round and the failure changes nothing.
  const auto before = snapshot(g.store);
  EXPECT_EQ(code_of([&] { cmd_al_round(g, o); }), ErrorCode::QueueNotEmpty);
  EXPECT_EQ(snapshot(g.store), before);

  ProjectStore store(g.store);
  std::istringstream log(join_lines(store.read_lines(files::kEvents)));
  const AlState state = replay_events(log);
  std::map<std::string, const AnnotationRecord*> gold;
  for (const auto& a : corpus_->annotations) gold[a.sentence_id] = &a;
  std::ostringstream res;
  for (const auto& item : state.pending_queue) {
    const auto& a = *gold.at(item.sentence_id());
    json line = {{"sentence_id", a.sentence_id}, {"resolution", a.causal ? "confirm" : "reject"}};
    if (a.causal) {
      line["spans"] = json::array();
      for (const auto& s : a.spans) {
        line["spans"].push_back({{"role", role_name(s.role)}, {"start", s.start}, {"end", s.end}});
      }
    }
    res << line.dump() << '\n';
  }
  o.resolutions = *dir_ / "resolutions.jsonl";
  write_text(*o.resolutions, res.str());
  const auto r1 = json::parse(cmd_al_round(g, o));
  EXPECT_EQ(r1["merged"], true);
  EXPECT_EQ(r1["round"], 1);
  EXPECT_EQ(r1["resolved"], queued);
  EXPECT_EQ(r1["training_set"], 1200 + 150);
  EXPECT_EQ(r1["history"].size(), 2u);

  // Reviewed sentences are now part of the gold annotations.
  EXPECT_EQ(store.read_lines(files::kAnnotations).size(), 1200 + queued);

  // Replaying the committed log gives the same round and training set.
  std::istringstream log2(join_lines(store.read_lines(files::kEvents)));
  const AlState after = replay_events(log2);
  EXPECT_EQ(after.round, 1u);
  EXPECT_EQ(after.training_set.size(), 1350u);
  EXPECT_TRUE(after.ids_disjoint());
}

TEST_F(CommandsTest, KappaAndEvalOnFiles) {
  const auto a = *dir_ / "kappa_a.jsonl";
  const auto b = *dir_ / "kappa_b.jsonl";
  std::ostringstream sa, sb;
  // 50 items laid out like the 2x2 fixture: kappa 0.4.
  for (int i = 0; i < 50; ++i) {
    const bool ga = i >= 25;
    const bool gb = (i < 20) ? false : (i < 25 ? true : (i < 35 ? false : true));
    sa << annotation_to_json({"k" + std::to_string(i), ga, {}}) << '\n';
    sb << annotation_to_json({"k" + std::to_string(i), gb, {}}) << '\n';
  }
  write_text(a, sa.str());
  write_text(b, sb.str());
  const auto k = json::parse(cmd_kappa(a, b));
  EXPECT_EQ(k["items"], 50);
  EXPECT_NEAR(k["kappa"].get<double>(), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(k["observed_agreement"].get<double>(), 0.7);

  auto g = fresh_store("eval");
  const auto e = json::parse(cmd_eval(g, a, b));
  EXPECT_DOUBLE_EQ(e["classification"]["accuracy"].get<double>(), 0.7);
  EXPECT_TRUE(e["tagging"].is_null());
}

TEST(ResolutionRequests, Parse) {
  auto [id, r] = parse_resolution_request(
      R"({"sentence_id":"x","resolution":"confirm","spans":[{"role":"effect","start":1,"end":2}]})");
  EXPECT_EQ(id, "x");
  EXPECT_EQ(r, Resolution::confirm({{Role::Effect, 1, 2}}));
  EXPECT_EQ(parse_resolution_request(R"({"sentence_id":"y","resolution":"reject"})").second,
            Resolution::reject());
  EXPECT_EQ(code_of([] { parse_resolution_request(R"({"sentence_id":"y","resolution":"maybe"})"); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_resolution_request("{"); }), ErrorCode::SchemaError);
}
