#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "app/commands.hpp"
#include "app/service.hpp"
#include "cetk/error.hpp"

namespace {

cetk::app::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cetk::app;
  CLI::App app{"cetk: causal sentence detection, cause/effect extraction and graph building"};
  app.require_subcommand(1);

  GlobalOptions g;
  std::string store = ".";
  std::uint64_t seed = 0;
  std::string embeddings;
  app.add_option("--store", store, "Project store directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized steps (default: manifest)");
  auto* emb_opt = app.add_option("--embeddings", embeddings, "Word-vector text file");

  std::string input;
  std::string annotations;
  auto* ingest = app.add_subcommand("ingest", "Split, filter and store a JSONL tweet corpus");
  ingest->add_option("--input", input, "Tweet JSONL file")->required();
  auto* ann_opt = ingest->add_option("--annotations", annotations, "Gold annotation JSONL to import");

  ClassifierOptions co;
  std::size_t epochs = 0, hidden = 0;
  auto* tc = app.add_subcommand("train-classifier", "Train the causal sentence classifier");
  auto* ep_opt = tc->add_option("--epochs", epochs, "Maximum epochs");
  auto* hid_opt = tc->add_option("--hidden", hidden, "Hidden units (default: input dimension)");
  tc->add_flag("--no-class-weights", co.no_class_weights, "Disable inverse-frequency weighting");

  CrfOptions crf;
  auto* tcrf = app.add_subcommand("train-crf", "Train the cause/effect span tagger");
  tcrf->add_option("--c1", crf.c1, "L1 coefficient")->capture_default_str();
  tcrf->add_option("--c2", crf.c2, "L2 coefficient")->capture_default_str();
  tcrf->add_option("--max-iterations", crf.max_iterations)->capture_default_str();
  tcrf->add_option("--window", crf.window, "Neighbouring token vectors per side")->capture_default_str();
  tcrf->add_option("--holdout", crf.holdout, "Fraction held out for evaluation")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Write causal probabilities for kept sentences");
  auto* extract = app.add_subcommand("extract", "Predict and tag cause/effect spans");

  AlOptions al;
  std::string resolutions;
  std::size_t al_epochs = 0;
  auto* alr = app.add_subcommand("al-round", "Apply reviews and advance the active-learning loop");
  alr->add_option("--sample", al.sample, "Sentences drawn per round")->capture_default_str();
  auto* res_opt = alr->add_option("--resolutions", resolutions, "JSONL of review decisions");
  auto* al_ep_opt = alr->add_option("--epochs", al_epochs, "Maximum epochs per retraining");

  ClusterOptions clo;
  std::string seeds;
  auto* cluster = app.add_subcommand("cluster", "Group extracted phrases around seed clusters");
  cluster->add_option("--threshold", clo.threshold, "Similarity threshold")->capture_default_str();
  cluster->add_option("--min-count", clo.min_count, "Minimum cluster size")->capture_default_str();
  auto* seeds_opt = cluster->add_option("--seeds", seeds, "Seed phrase JSONL (stored for reuse)");
  cluster->add_option("--top", clo.top, "Rows per report table")->capture_default_str();

  NetworkOptions no;
  std::string exclude;
  auto* network = app.add_subcommand("network", "Build, filter and export the cause-effect graph");
  network->add_option("--min-edge", no.min_edge, "Minimum edge count")->capture_default_str();
  network->add_option("--top", no.top, "Pairs in the report")->capture_default_str();
  auto* excl_opt = network->add_option("--exclude", exclude, "Skip pairs touching this cluster label");

  std::string gold, pred;
  auto* eval = app.add_subcommand("eval", "Score predictions against gold annotations");
  auto* gold_opt = eval->add_option("--gold", gold, "Gold JSONL (default: store annotations)");
  auto* pred_opt = eval->add_option("--pred", pred, "Prediction JSONL (default: store predictions)");

  std::string ka, kb;
  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa between two annotation files");
  kappa->add_option("a", ka, "First annotator JSONL")->required();
  kappa->add_option("b", kb, "Second annotator JSONL")->required();

  ServiceOptions so;
  std::size_t serve_epochs = 0;
  auto* serve = app.add_subcommand("serve", "Run the HTTP annotation and exploration service");
  serve->add_option("--host", so.host)->capture_default_str();
  serve->add_option("--port", so.port)->capture_default_str();
  serve->add_option("--sample", so.sample, "Sentences drawn per round")->capture_default_str();
  auto* serve_ep_opt = serve->add_option("--epochs", serve_epochs, "Maximum epochs per retraining");

  CLI11_PARSE(app, argc, argv);

  g.store = store;
  if (*seed_opt) g.seed = seed;
  if (*emb_opt) g.embeddings = embeddings;

  try {
    std::string out;
    if (*ingest) {
      out = cmd_ingest(g, input, *ann_opt ? std::optional<std::filesystem::path>(annotations) : std::nullopt);
    } else if (*tc) {
      if (*ep_opt) co.epochs = epochs;
      if (*hid_opt) co.hidden = hidden;
      out = cmd_train_classifier(g, co);
    } else if (*tcrf) {
      out = cmd_train_crf(g, crf);
    } else if (*predict) {
      out = cmd_predict(g);
    } else if (*extract) {
      out = cmd_extract(g);
    } else if (*alr) {
      if (*res_opt) al.resolutions = resolutions;
      if (*al_ep_opt) al.epochs = al_epochs;
      out = cmd_al_round(g, al);
    } else if (*cluster) {
      if (*seeds_opt) clo.seeds = seeds;
      out = cmd_cluster(g, clo);
    } else if (*network) {
      if (*excl_opt) no.exclude = exclude;
      out = cmd_network(g, no);
    } else if (*eval) {
      out = cmd_eval(g, *gold_opt ? std::optional<std::filesystem::path>(gold) : std::nullopt,
                     *pred_opt ? std::optional<std::filesystem::path>(pred) : std::nullopt);
    } else if (*kappa) {
      out = cmd_kappa(ka, kb);
    } else if (*serve) {
      if (*serve_ep_opt) so.epochs = serve_epochs;
      Service service(g, so);
      service.bind();
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << so.host << ":" << service.port() << std::endl;
      service.listen();
      g_service = nullptr;
      return 0;
    }
    std::cout << out << std::endl;
  } catch (const cetk::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
