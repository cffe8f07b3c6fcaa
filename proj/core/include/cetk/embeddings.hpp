#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cetk/text.hpp"

namespace cetk {

using Vector = std::vector<double>;

/// Static token vectors read from the "N D" header + rows text format.
/// Immutable once loaded; row order is kept so the table re-serializes
/// exactly as read.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return order_.size(); }

  /// Throws DuplicateToken, DimensionMismatch or NonFiniteValue.
  void add(std::string token, Vector values);

  const Vector* find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token) != nullptr; }

  const std::vector<std::string>& tokens() const noexcept { return order_; }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, Vector> entries_;
  std::vector<std::string> order_;
};

struct Lookup {
  Vector vector;
  bool oov = false;
};

EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// Writes the table with shortest round-trip decimal formatting.
void save_embeddings(const EmbeddingTable& table, std::ostream& out);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

/// Exact match, then ASCII-lowercase fallback, else a zero vector flagged oov.
Lookup lookup(const EmbeddingTable& table, std::string_view token);

double cosine(std::span<const double> u, std::span<const double> v);

/// Mean of the lookup vectors of all tokens, OOV zeros included.
Vector mean_pool(std::span<const Token> tokens, const EmbeddingTable& table);
Vector mean_pool(const Sentence& sentence, const EmbeddingTable& table);

}  // namespace cetk
