#pragma once

// Confusion matrices, per-label and macro precision/recall/F1, accuracy and
// Cohen's kappa. Every 0/0 ratio evaluates to 0.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cetk/tagging.hpp"

namespace cetk {

/// Rows are gold labels, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  /// Throws UnknownLabel.
  std::size_t index_of(std::string_view label) const;

  void add(std::size_t gold, std::size_t pred, std::uint64_t n = 1);
  std::uint64_t at(std::size_t gold, std::size_t pred) const;

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t gold_support(std::size_t label) const;
  std::uint64_t predicted_count(std::size_t label) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const std::string> golds,
                          std::span<const std::string> preds,
                          std::vector<std::string> labels);

/// Token-level matrix over the three IO labels in canonical order.
ConfusionMatrix confusion(std::span<const IOTag> golds, std::span<const IOTag> preds);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf prf(const ConfusionMatrix& matrix, std::size_t label);
Prf prf(const ConfusionMatrix& matrix, std::string_view label);

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  /// Mean of per-label F1, not the F1 of the mean precision and recall.
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Throws EmptyMatrix when nothing has been counted.
MacroScores macro(const ConfusionMatrix& matrix);

struct KappaDetail {
  double kappa = 0.0;
  double observed = 0.0;
  double chance = 0.0;
  std::size_t n = 0;
};

/// Chance agreement uses the product of the two annotators' marginals. When
/// chance agreement is exactly 1 the statistic is undefined; 1.0 is returned
/// if observed agreement is also 1, else 0.0.
KappaDetail cohen_kappa_detail(std::span<const std::string> a,
                               std::span<const std::string> b);
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

/// {"per_label": {...}, "macro": {...}, "accuracy", "support"}.
std::string metrics_report_json(const ConfusionMatrix& matrix);

}  // namespace cetk
