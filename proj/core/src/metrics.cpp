#include "cetk/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "cetk/error.hpp"
#include "json.hpp"

namespace cetk {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

std::size_t ConfusionMatrix::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  throw Error(ErrorCode::UnknownLabel, std::string(label));
}

void ConfusionMatrix::add(std::size_t gold, std::size_t pred, std::uint64_t n) {
  counts_.at(gold * labels_.size() + pred) += n;
}

std::uint64_t ConfusionMatrix::at(std::size_t gold, std::size_t pred) const {
  return counts_.at(gold * labels_.size() + pred);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) t += at(i, i);
  return t;
}

std::uint64_t ConfusionMatrix::gold_support(std::size_t label) const {
  std::uint64_t t = 0;
  for (std::size_t p = 0; p < labels_.size(); ++p) t += at(label, p);
  return t;
}

std::uint64_t ConfusionMatrix::predicted_count(std::size_t label) const {
  std::uint64_t t = 0;
  for (std::size_t g = 0; g < labels_.size(); ++g) t += at(g, label);
  return t;
}

ConfusionMatrix confusion(std::span<const std::string> golds,
                          std::span<const std::string> preds,
                          std::vector<std::string> labels) {
  if (golds.size() != preds.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(golds.size()) + " golds vs " +
                                               std::to_string(preds.size()) + " predictions");
  }
  ConfusionMatrix m(std::move(labels));
  for (std::size_t i = 0; i < golds.size(); ++i) {
    m.add(m.index_of(golds[i]), m.index_of(preds[i]));
  }
  return m;
}

ConfusionMatrix confusion(std::span<const IOTag> golds, std::span<const IOTag> preds) {
  if (golds.size() != preds.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(golds.size()) + " golds vs " +
                                               std::to_string(preds.size()) + " predictions");
  }
  ConfusionMatrix m(tag_names(kAllTags));
  for (std::size_t i = 0; i < golds.size(); ++i) m.add(tag_index(golds[i]), tag_index(preds[i]));
  return m;
}

Prf prf(const ConfusionMatrix& matrix, std::size_t label) {
  const auto tp = static_cast<double>(matrix.at(label, label));
  const auto predicted = static_cast<double>(matrix.predicted_count(label));
  const auto support = static_cast<double>(matrix.gold_support(label));
  Prf out;
  out.precision = ratio(tp, predicted);
  out.recall = ratio(tp, support);
  out.f1 = ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
  return out;
}

Prf prf(const ConfusionMatrix& matrix, std::string_view label) {
  return prf(matrix, matrix.index_of(label));
}

MacroScores macro(const ConfusionMatrix& matrix) {
  const std::uint64_t total = matrix.total();
  if (matrix.size() == 0 || total == 0) {
    throw Error(ErrorCode::EmptyMatrix, "no items counted");
  }
  MacroScores out;
  for (std::size_t k = 0; k < matrix.size(); ++k) {
    const Prf p = prf(matrix, k);
    out.precision += p.precision;
    out.recall += p.recall;
    out.f1 += p.f1;
  }
  const auto n = static_cast<double>(matrix.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  out.accuracy = static_cast<double>(matrix.trace()) / static_cast<double>(total);
  return out;
}

KappaDetail cohen_kappa_detail(std::span<const std::string> a,
                               std::span<const std::string> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "kappa needs at least one item");

  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    if (a[i] == b[i]) ++agree;
  }
  const auto n = static_cast<double>(a.size());
  KappaDetail d;
  d.n = a.size();
  d.observed = static_cast<double>(agree) / n;
  for (const auto& [label, counts] : marginals) {
    d.chance += (static_cast<double>(counts.first) / n) * (static_cast<double>(counts.second) / n);
  }
  if (d.chance == 1.0) {
    d.kappa = d.observed == 1.0 ? 1.0 : 0.0;
  } else {
    d.kappa = (d.observed - d.chance) / (1.0 - d.chance);
  }
  return d;
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  return cohen_kappa_detail(a, b).kappa;
}

std::string metrics_report_json(const ConfusionMatrix& matrix) {
  using json = nlohmann::ordered_json;
  json per_label = json::object();
  for (std::size_t k = 0; k < matrix.size(); ++k) {
    const Prf p = prf(matrix, k);
    per_label[matrix.labels()[k]] = {{"precision", p.precision},
                                     {"recall", p.recall},
                                     {"f1", p.f1},
                                     {"support", matrix.gold_support(k)}};
  }
  const MacroScores m = macro(matrix);
  json report = {{"per_label", std::move(per_label)},
                 {"macro", {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}}},
                 {"accuracy", m.accuracy},
                 {"support", matrix.total()}};
  return report.dump();
}

}  // namespace cetk
