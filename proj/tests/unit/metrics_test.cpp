#include <gtest/gtest.h>

#include "json.hpp"

#include "cetk/error.hpp"
#include "cetk/metrics.hpp"
#include "cetk/random.hpp"

using namespace cetk;

namespace {

ConfusionMatrix two_by_two() {
  ConfusionMatrix m({"neg", "pos"});
  m.add(0, 0, 20);
  m.add(0, 1, 5);
  m.add(1, 0, 10);
  m.add(1, 1, 15);
  return m;
}

std::vector<std::string> repeat(std::initializer_list<std::pair<const char*, int>> runs) {
  std::vector<std::string> out;
  for (const auto& [label, n] : runs) out.insert(out.end(), n, label);
  return out;
}

}  // namespace

TEST(Metrics, TwoByTwoFixture) {
  const auto m = two_by_two();
  const auto p0 = prf(m, "neg");
  const auto p1 = prf(m, "pos");
  EXPECT_DOUBLE_EQ(p0.precision, 20.0 / 30.0);
  EXPECT_DOUBLE_EQ(p0.recall, 20.0 / 25.0);
  EXPECT_DOUBLE_EQ(p1.precision, 15.0 / 20.0);
  EXPECT_DOUBLE_EQ(p1.recall, 15.0 / 25.0);
  const auto mac = macro(m);
  EXPECT_DOUBLE_EQ(mac.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(mac.precision, (20.0 / 30.0 + 15.0 / 20.0) / 2.0);
  EXPECT_DOUBLE_EQ(mac.f1, (p0.f1 + p1.f1) / 2.0);
  EXPECT_NE(mac.f1, 2 * mac.precision * mac.recall / (mac.precision + mac.recall));
}

TEST(Metrics, KappaFixtures) {
  // Same 50 items as the 2x2 fixture, viewed as two annotators.
  const auto a = repeat({{"neg", 20}, {"neg", 5}, {"pos", 10}, {"pos", 15}});
  const auto b = repeat({{"neg", 20}, {"pos", 5}, {"neg", 10}, {"pos", 15}});
  const auto d = cohen_kappa_detail(a, b);
  EXPECT_NEAR(d.kappa, 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(d.observed, 0.7);
  EXPECT_DOUBLE_EQ(d.chance, 0.5);
  EXPECT_EQ(d.n, 50u);

  EXPECT_DOUBLE_EQ(cohen_kappa(a, a), 1.0);
  const std::vector<std::string> zeros(10, "0"), ones(10, "1");
  EXPECT_DOUBLE_EQ(cohen_kappa(zeros, ones), 0.0);
  EXPECT_DOUBLE_EQ(cohen_kappa(zeros, zeros), 1.0);
  EXPECT_THROW(cohen_kappa(std::vector<std::string>{}, std::vector<std::string>{}), Error);
  EXPECT_THROW(cohen_kappa(zeros, std::vector<std::string>(3, "0")), Error);
}

TEST(Metrics, ZeroDenominatorsAreZero) {
  ConfusionMatrix m({"a", "b", "c"});
  m.add(0, 0, 4);
  const auto pb = prf(m, "b");
  EXPECT_EQ(pb.precision, 0.0);
  EXPECT_EQ(pb.recall, 0.0);
  EXPECT_EQ(pb.f1, 0.0);
  EXPECT_THROW(macro(ConfusionMatrix({"a", "b"})), Error);
  EXPECT_THROW(m.index_of("zzz"), Error);
}

TEST(Metrics, TokenConfusionUsesCanonicalOrder) {
  const std::vector<IOTag> g = {IOTag::InsideCause, IOTag::Outside, IOTag::InsideEffect};
  const std::vector<IOTag> p = {IOTag::InsideCause, IOTag::InsideEffect, IOTag::InsideEffect};
  const auto m = confusion(g, p);
  EXPECT_EQ(m.labels(), (std::vector<std::string>{"I-C", "I-E", "O"}));
  EXPECT_EQ(m.at(2, 1), 1u);
  EXPECT_EQ(m.trace(), 2u);
  EXPECT_THROW(confusion(g, std::vector<IOTag>{IOTag::Outside}), Error);
}

TEST(Metrics, PropertiesOnRandomMatrices) {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng.below(3);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < k; ++i) labels.push_back("L" + std::to_string(i));
    std::vector<std::string> g, p;
    const std::size_t n = 1 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      g.push_back(labels[rng.below(k)]);
      p.push_back(rng.bernoulli(0.6) ? g.back() : labels[rng.below(k)]);
    }
    const auto m = confusion(g, p, labels);
    ASSERT_EQ(m.total(), n);
    const auto mac = macro(m);
    for (double v : {mac.precision, mac.recall, mac.f1, mac.accuracy}) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    const double kappa = cohen_kappa(g, p);
    ASSERT_LE(kappa, 1.0 + 1e-12);
    ASSERT_NEAR(cohen_kappa(p, g), kappa, 1e-12);
    ASSERT_DOUBLE_EQ(cohen_kappa(g, g), 1.0);
  }
}

TEST(Metrics, ReportJsonShape) {
  const auto j = nlohmann::json::parse(metrics_report_json(two_by_two()));
  EXPECT_TRUE(j.contains("per_label"));
  EXPECT_TRUE(j.contains("macro"));
  EXPECT_DOUBLE_EQ(j.at("accuracy").get<double>(), 0.7);
  EXPECT_DOUBLE_EQ(j.at("per_label").at("pos").at("precision").get<double>(), 0.75);
}
