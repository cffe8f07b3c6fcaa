// Writes the synthetic demo corpus and checks a finished store against the
// frequency tables the corpus was designed to produce.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "cetk/clustering.hpp"
#include "cetk/embeddings.hpp"
#include "cetk/error.hpp"
#include "cetk/network.hpp"
#include "cetk/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw cetk::Error(cetk::ErrorCode::IoError, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cetk::Error(cetk::ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int generate(const fs::path& out_dir, const cetk::SyntheticConfig& cfg) {
  const auto corpus = cetk::generate_synthetic(cfg);
  fs::create_directories(out_dir);
  std::string tweets, annotations, seeds;
  for (const auto& t : corpus.tweets) tweets += cetk::tweet_to_json(t) + "\n";
  for (const auto& a : corpus.annotations) annotations += cetk::annotation_to_json(a) + "\n";
  for (const auto& s : corpus.seeds) seeds += cetk::seed_to_json(s) + "\n";
  write_text(out_dir / "tweets.jsonl", tweets);
  write_text(out_dir / "annotations.jsonl", annotations);
  write_text(out_dir / "seeds.jsonl", seeds);
  cetk::save_embeddings(corpus.embeddings, out_dir / "embeddings.txt");

  ojson expected;
  expected["min_edge"] = corpus.min_edge;
  expected["kept_sentences"] = corpus.kept_sentences();
  ojson clusters = ojson::object();
  for (const auto& [label, n] : corpus.expected_cluster_counts) clusters[label] = n;
  expected["clusters"] = std::move(clusters);
  ojson edges = ojson::array();
  for (const auto& [key, n] : corpus.expected_edges) {
    edges.push_back({{"cause", key.first}, {"effect", key.second}, {"count", n}});
  }
  expected["edges"] = std::move(edges);
  write_text(out_dir / "expected.json", expected.dump(2) + "\n");
  std::cout << "wrote " << corpus.tweets.size() << " tweets to " << out_dir.string() << "\n";
  return 0;
}

int check(const fs::path& expected_path, const fs::path& store) {
  const auto expected = ojson::parse(read_text(expected_path));
  int failures = 0;

  std::map<std::string, std::size_t> got_clusters;
  std::map<std::size_t, std::string> labels;
  {
    std::istringstream in(read_text(store / "clusters.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto o = ojson::parse(line);
      got_clusters[o["label"].get<std::string>()] = o["count"].get<std::size_t>();
    }
  }
  std::map<std::string, std::size_t> want_clusters;
  for (const auto& [label, n] : expected["clusters"].items()) want_clusters[label] = n.get<std::size_t>();
  if (got_clusters != want_clusters) {
    std::cerr << "cluster counts differ from the design\n";
    for (const auto& [l, n] : got_clusters) std::cerr << "  got  " << l << " " << n << "\n";
    for (const auto& [l, n] : want_clusters) std::cerr << "  want " << l << " " << n << "\n";
    ++failures;
  }

  const auto graph = cetk::import_graph(store / "graph.json");
  std::map<std::pair<std::string, std::string>, std::size_t> got_edges, want_edges;
  for (const auto& e : graph.edges) {
    got_edges[{graph.node(e.source)->label, graph.node(e.target)->label}] = e.count;
  }
  for (const auto& e : expected["edges"]) {
    want_edges[{e["cause"].get<std::string>(), e["effect"].get<std::string>()}] =
        e["count"].get<std::size_t>();
  }
  if (got_edges != want_edges) {
    std::cerr << "graph edges differ from the design\n";
    for (const auto& [k, n] : got_edges) std::cerr << "  got  " << k.first << " -> " << k.second << " " << n << "\n";
    for (const auto& [k, n] : want_edges) std::cerr << "  want " << k.first << " -> " << k.second << " " << n << "\n";
    ++failures;
  }
  std::cout << (failures == 0 ? "store matches the designed counts" : "store does not match") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cetk-synth: synthetic corpus generator and checker"};
  app.require_subcommand(1);

  cetk::SyntheticConfig cfg;
  std::string out_dir;
  auto* gen = app.add_subcommand("generate", "Write tweets, gold annotations, seeds and embeddings");
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", cfg.seed)->capture_default_str();
  gen->add_option("--scale", cfg.pair_scale, "Multiplier for designed pair counts")->capture_default_str();
  gen->add_option("--non-causal", cfg.non_causal, "Distractor sentences")->capture_default_str();

  std::string expected, store;
  auto* chk = app.add_subcommand("check", "Compare a store's clusters and graph with expected.json");
  chk->add_option("--expected", expected)->required();
  chk->add_option("--store", store)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return generate(out_dir, cfg);
    return check(expected, store);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
