#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cetk/embeddings.hpp"
#include "cetk/error.hpp"
#include "cetk/random.hpp"

using namespace cetk;

namespace {

ErrorCode load_error(const std::string& text, std::optional<std::size_t>* line = nullptr) {
  std::istringstream in(text);
  try {
    load_embeddings(in);
  } catch (const Error& e) {
    if (line) *line = e.line();
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ErrorCode::IoError;
}

}  // namespace

TEST(Embeddings, LoadAndLookup) {
  std::istringstream in("3 2\nthe 0.5 -1\nStress 1e-3 2\n#tag 0 0.25\n");
  const auto table = load_embeddings(in);
  EXPECT_EQ(table.dim(), 2u);
  EXPECT_EQ(table.size(), 3u);
  EXPECT_EQ(lookup(table, "the").vector, (Vector{0.5, -1.0}));
  EXPECT_FALSE(lookup(table, "the").oov);
  // exact match first, lowercase fallback only applies to the query
  EXPECT_TRUE(lookup(table, "stress").oov);
  EXPECT_FALSE(lookup(table, "THE").oov);
  const auto miss = lookup(table, "zzz");
  EXPECT_TRUE(miss.oov);
  EXPECT_EQ(miss.vector, (Vector{0.0, 0.0}));
}

TEST(Embeddings, MalformedInputs) {
  EXPECT_EQ(load_error(""), ErrorCode::MalformedHeader);
  EXPECT_EQ(load_error("2\n"), ErrorCode::MalformedHeader);
  EXPECT_EQ(load_error("1 0\n"), ErrorCode::MalformedHeader);
  EXPECT_EQ(load_error("2 2\na 1 2\n"), ErrorCode::MalformedHeader);
  std::optional<std::size_t> line;
  EXPECT_EQ(load_error("2 2\na 1 2\nb 1\n", &line), ErrorCode::DimensionMismatch);
  EXPECT_EQ(line, 3u);
  EXPECT_EQ(load_error("2 2\na 1 2\na 3 4\n", &line), ErrorCode::DuplicateToken);
  EXPECT_EQ(line, 3u);
  EXPECT_EQ(load_error("1 2\na nan 4\n"), ErrorCode::NonFiniteValue);
  EXPECT_EQ(load_error("1 2\na inf 4\n"), ErrorCode::NonFiniteValue);
  EXPECT_EQ(load_error("1 2\na x 4\n"), ErrorCode::DimensionMismatch);
}

TEST(Embeddings, SaveLoadIsByteIdentical) {
  Rng rng(5);
  EmbeddingTable t(4);
  for (int i = 0; i < 50; ++i) {
    Vector v(4);
    for (double& x : v) x = rng.normal() * std::pow(10.0, static_cast<double>(rng.below(9)) - 4.0);
    t.add("tok" + std::to_string(i), v);
  }
  std::ostringstream a;
  save_embeddings(t, a);
  std::istringstream in(a.str());
  const auto back = load_embeddings(in);
  ASSERT_EQ(back.tokens(), t.tokens());
  for (const auto& tok : t.tokens()) EXPECT_EQ(*back.find(tok), *t.find(tok));
  std::ostringstream b;
  save_embeddings(back, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Embeddings, CosineAndPooling) {
  EXPECT_DOUBLE_EQ(cosine(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine(Vector{2, 0}, Vector{3, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine(Vector{0, 0}, Vector{3, 0}), 0.0);
  EXPECT_THROW(cosine(Vector{1}, Vector{1, 2}), Error);

  EmbeddingTable t(2);
  t.add("a", {2.0, 0.0});
  t.add("b", {0.0, 4.0});
  const auto s = make_sentence("x", "x", "a b zzz");
  // OOV tokens contribute zeros but still count in the denominator.
  EXPECT_EQ(mean_pool(s, t), (Vector{2.0 / 3.0, 4.0 / 3.0}));
  const Sentence empty;
  EXPECT_THROW(mean_pool(empty, t), Error);
}

TEST(Embeddings, AddRejectsBadRows) {
  EmbeddingTable t(2);
  t.add("a", {1, 2});
  EXPECT_THROW(t.add("a", {1, 2}), Error);
  EXPECT_THROW(t.add("b", {1}), Error);
  EXPECT_THROW(t.add("c", {1, std::nan("")}), Error);
}
