#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cetk/classifier.hpp"
#include "cetk/error.hpp"
#include "oracles.hpp"

using namespace cetk;
namespace orc = cetk::oracle;

namespace {

std::vector<double> random_input(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

double loss_at(const MlpClassifier& base, const std::vector<double>& params,
               const std::vector<double>& x, int label, bool train, std::uint64_t seed) {
  MlpClassifier m = base;
  m.assign(params);
  Rng rng(seed);
  return weighted_ce_loss(forward(m, x, train, &rng), label, m.class_weights);
}

// Two well separated Gaussian blobs in `dim` dimensions.
std::vector<LabeledVector> blobs(Rng& rng, std::size_t n0, std::size_t n1, std::size_t dim,
                                 double sep) {
  std::vector<LabeledVector> out;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    LabeledVector ex;
    ex.label = i < n0 ? 0 : 1;
    ex.x.resize(dim);
    for (double& v : ex.x) v = 0.3 * rng.normal();
    ex.x[0] += ex.label ? sep : -sep;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST(Classifier, ClassWeightsFixture) {
  const auto w = compute_class_weights({7218, 1017});
  EXPECT_DOUBLE_EQ(w[0], 8235.0 / 14436.0);
  EXPECT_DOUBLE_EQ(w[1], 8235.0 / 2034.0);
  try {
    compute_class_weights({5, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyClass);
  }
}

TEST(Classifier, UnitWeightsReduceToPlainCrossEntropy) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform(1e-6, 1.0);
    const Probabilities probs = {p, 1.0 - p};
    EXPECT_EQ(weighted_ce_loss(probs, 0, {1.0, 1.0}), -std::log(p));
    EXPECT_EQ(weighted_ce_loss(probs, 1, {1.0, 1.0}), -std::log(1.0 - p));
  }
  // The floor keeps a zero probability finite.
  EXPECT_DOUBLE_EQ(weighted_ce_loss({1.0, 0.0}, 1, {1.0, 2.0}), -2.0 * std::log(1e-12));
}

TEST(Classifier, ZeroModelIsUndecided) {
  const auto m = MlpClassifier::zeros(3, 4);
  const std::vector<double> x = {1, 2, 3};
  EXPECT_EQ(forward(m, x), (Probabilities{0.5, 0.5}));
  const auto pred = predict_causal(m, x);
  EXPECT_EQ(pred.label, CausalLabel::NonCausal);
  EXPECT_EQ(pred.probability, 0.5);
  EXPECT_THROW(forward(m, std::vector<double>{1, 2}), Error);
}

TEST(Classifier, GradientMatchesFiniteDifferencesInEvalMode) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = MlpClassifier::initialized(4, 5, 100 + trial);
    std::vector<double> p = m.flatten();
    for (double& v : p) v += 0.1 * rng.uniform(-1.0, 1.0);  // non-zero biases too
    m.assign(p);
    m.class_weights = {rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0)};
    const auto x = random_input(rng, 4);
    const int label = static_cast<int>(rng.below(2));
    std::vector<double> grad(m.parameter_count(), 0.0);
    accumulate_gradient(m, x, label, grad);
    const auto num = orc::finite_difference(
        [&](const std::vector<double>& w) { return loss_at(m, w, x, label, false, 0); }, p, 1e-6);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      ASSERT_LT(orc::relative_error(grad[i], num[i]), 1e-6) << "trial " << trial << " param " << i;
    }
  }
}

TEST(Classifier, GradientMatchesFiniteDifferencesUnderAFixedDropoutMask) {
  Rng rng(78);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = MlpClassifier::initialized(3, 8, 300 + trial);
    m.dropout_p = 0.5;
    const auto x = random_input(rng, 3);
    const int label = static_cast<int>(rng.below(2));
    const std::uint64_t mask_seed = 900 + trial;
    std::vector<double> grad(m.parameter_count(), 0.0);
    Rng mask_rng(mask_seed);
    accumulate_gradient(m, x, label, grad, true, &mask_rng);
    const auto num = orc::finite_difference(
        [&](const std::vector<double>& w) { return loss_at(m, w, x, label, true, mask_seed); },
        m.flatten(), 1e-6);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      ASSERT_LT(orc::relative_error(grad[i], num[i]), 1e-6) << "trial " << trial << " param " << i;
    }
  }
}

TEST(Classifier, GradientAccumulates) {
  const auto m = MlpClassifier::initialized(2, 3, 5);
  const std::vector<double> x = {0.3, -0.7};
  std::vector<double> once(m.parameter_count(), 0.0), twice(m.parameter_count(), 0.0);
  accumulate_gradient(m, x, 1, once);
  accumulate_gradient(m, x, 1, twice);
  accumulate_gradient(m, x, 1, twice);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_DOUBLE_EQ(twice[i], 2.0 * once[i]);
  std::vector<double> wrong(3);
  EXPECT_THROW(accumulate_gradient(m, x, 1, wrong), Error);
}

TEST(Classifier, DropoutOnlyInTrainMode) {
  auto m = MlpClassifier::initialized(3, 16, 1);
  m.dropout_p = 0.5;
  const std::vector<double> x = {0.5, -0.2, 0.9};
  Rng a(1), b(2);
  EXPECT_EQ(forward(m, x, false, &a), forward(m, x, false, &b));
  EXPECT_EQ(forward(m, x, false), forward(m, x, false, &a));
  bool differs = false;
  for (int i = 0; i < 20 && !differs; ++i) differs = forward(m, x, true, &a) != forward(m, x);
  EXPECT_TRUE(differs);
  m.dropout_p = 0.0;
  EXPECT_EQ(forward(m, x, true, &a), forward(m, x));
}

TEST(Classifier, StratifiedSplitProperties) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(2 + rng.below(200));
    for (int& l : labels) l = rng.bernoulli(0.2) ? 1 : 0;
    const auto s = stratified_split(labels, 0.1, 0.2, trial);
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      ASSERT_TRUE(std::is_sorted(part->begin(), part->end()));
      all.insert(part->begin(), part->end());
    }
    ASSERT_EQ(all.size(), labels.size());
    ASSERT_EQ(s.train.size() + s.validation.size() + s.test.size(), labels.size());
    for (int cls = 0; cls < 2; ++cls) {
      const auto n = static_cast<double>(std::count(labels.begin(), labels.end(), cls));
      std::size_t in_test = 0;
      for (auto i : s.test) in_test += labels[i] == cls;
      ASSERT_EQ(in_test, static_cast<std::size_t>(std::llround(0.1 * n)));
    }
    ASSERT_EQ(stratified_split(labels, 0.1, 0.2, trial).train, s.train);
  }
}

TEST(Classifier, TrainsOnSeparableData) {
  Rng rng(4);
  const auto data = blobs(rng, 150, 50, 4, 1.5);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.01;
  const auto r = train_classifier(data, cfg);
  ASSERT_TRUE(r.history.test_matrix.has_value());
  EXPECT_EQ(r.history.test_matrix->total(), 20u);
  EXPECT_DOUBLE_EQ(macro(*r.history.test_matrix).accuracy, 1.0);
  EXPECT_EQ(r.history.n_train + r.history.n_validation + r.history.n_test, data.size());
  EXPECT_DOUBLE_EQ(r.history.class_weights[1], 200.0 / 100.0);
  EXPECT_LE(r.history.best_epoch, r.history.epochs.size());
  EXPECT_GT(r.history.epochs.front().learning_rate, r.history.epochs.back().learning_rate);

  const auto again = train_classifier(data, cfg);
  EXPECT_EQ(again.model, r.model);

  cfg.use_class_weights = false;
  EXPECT_EQ(train_classifier(data, cfg).history.class_weights, (ClassWeights{1.0, 1.0}));
}

TEST(Classifier, EarlyStoppingRestoresTheBestEpoch) {
  Rng rng(6);
  // Heavily overlapping classes so validation loss starts rising quickly.
  const auto data = blobs(rng, 60, 60, 20, 0.05);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.05;
  cfg.early_stopping_patience = 3;
  const auto r = train_classifier(data, cfg);
  ASSERT_TRUE(r.history.stopped_early);
  EXPECT_EQ(r.history.epochs.size(), r.history.best_epoch + 3);
}

TEST(Classifier, TrainingInputErrors) {
  TrainConfig cfg;
  std::vector<LabeledVector> one = {{{1.0}, 0}};
  EXPECT_THROW(train_classifier(one, cfg), Error);
  std::vector<LabeledVector> same = {{{1.0}, 0}, {{2.0}, 0}};
  try {
    train_classifier(same, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyClass);
  }
  std::vector<LabeledVector> bad = {{{1.0}, 0}, {{2.0}, 3}};
  EXPECT_THROW(train_classifier(bad, cfg), Error);
}

TEST(Classifier, JsonRoundTripIsByteIdentical) {
  auto m = MlpClassifier::initialized(5, 3, 9);
  m.class_weights = compute_class_weights({7218, 1017});
  const auto text = classifier_to_json(m);
  const auto back = classifier_from_json(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(classifier_to_json(back), text);
  EXPECT_THROW(classifier_from_json("[]"), Error);
  EXPECT_THROW(classifier_from_json(R"({"schema_version":1,"kind":"crf"})"), Error);
}
