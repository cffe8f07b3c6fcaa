#include "cetk/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cetk/error.hpp"

namespace cetk {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) {
      ++pos;
    }
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') {
      ++end;
    }
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// from_chars accepts "inf"/"nan", which callers reject via NonFiniteValue.
bool parse_double(std::string_view s, double& out) {
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec == std::errc::result_out_of_range) {
    out = HUGE_VAL;
    return ptr == last;
  }
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::MalformedHeader, "embedding dimension must be positive");
}

void EmbeddingTable::add(std::string token, Vector values) {
  if (values.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "token '" + token + "' has " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "token '" + token + "'");
  }
  if (entries_.contains(token)) throw Error(ErrorCode::DuplicateToken, token);
  order_.push_back(token);
  entries_.emplace(std::move(token), std::move(values));
}

const Vector* EmbeddingTable::find(std::string_view token) const {
  auto it = entries_.find(std::string(token));
  return it == entries_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedHeader, "missing header line", 1);
  const auto header = split_fields(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (header.size() != 2 || !parse_size(header[0], count) || !parse_size(header[1], dim) ||
      dim == 0) {
    throw Error(ErrorCode::MalformedHeader, "expected 'N D' header", 1);
  }

  EmbeddingTable table(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1) {
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(dim) + " values, got " +
                      std::to_string(fields.size() - 1),
                  line_no);
    }
    Vector values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(fields[k + 1], values[k])) {
        throw Error(ErrorCode::DimensionMismatch,
                    "unparseable value '" + std::string(fields[k + 1]) + "'", line_no);
      }
      if (!std::isfinite(values[k])) throw Error(ErrorCode::NonFiniteValue, "", line_no);
    }
    std::string token(fields[0]);
    if (table.contains(token)) throw Error(ErrorCode::DuplicateToken, token, line_no);
    table.add(std::move(token), std::move(values));
  }
  if (table.size() != count) {
    throw Error(ErrorCode::MalformedHeader,
                "header declares " + std::to_string(count) + " rows, file has " +
                    std::to_string(table.size()),
                1);
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return load_embeddings(in);
}

void save_embeddings(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dim() << '\n';
  for (const auto& token : table.tokens()) {
    out << token;
    for (double v : *table.find(token)) out << ' ' << format_double(v);
    out << '\n';
  }
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  save_embeddings(table, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Lookup lookup(const EmbeddingTable& table, std::string_view token) {
  if (const Vector* v = table.find(token)) return {*v, false};
  if (const Vector* v = table.find(ascii_lower(token))) return {*v, false};
  return {Vector(table.dim(), 0.0), true};
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  const double c = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

Vector mean_pool(std::span<const Token> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw Error(ErrorCode::EmptySentence, "cannot pool an empty sentence");
  Vector acc(table.dim(), 0.0);
  for (const auto& t : tokens) {
    const Lookup l = lookup(table, t.text);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += l.vector[k];
  }
  const double n = static_cast<double>(tokens.size());
  for (double& a : acc) a /= n;
  return acc;
}

Vector mean_pool(const Sentence& sentence, const EmbeddingTable& table) {
  return mean_pool(std::span<const Token>(sentence.tokens), table);
}

}  // namespace cetk
