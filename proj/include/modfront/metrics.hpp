#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modfront/core.hpp"

namespace modfront {

// Multi-label prediction table: one column per class, one row per example.
// labels hold 0/1; scores are arbitrary reals (higher = more positive).
struct PredictionTable {
  std::vector<std::string> class_names;
  Matrix scores;
  Matrix labels;

  std::size_t num_examples() const { return scores.rows; }
  std::size_t num_classes() const { return scores.cols; }
};

// Area under the ROC curve as the Mann-Whitney statistic: the probability
// that a random positive outscores a random negative, ties counted 1/2.
// Undefined (nullopt) when either class is absent.
std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels);

// Area under the precision-recall curve as average precision: a descending
// sweep over distinct score thresholds, summing precision * delta-recall.
// Examples sharing a score enter together. Undefined without positives.
std::optional<double> pr_auc(const std::vector<double>& scores,
                             const std::vector<int>& labels);

enum class MetricKind { roc, pr };

struct ClassMetric {
  std::string name;
  double value = 0.0;
  bool defined = false;
};

struct MacroResult {
  double value = 0.0;  // mean over defined classes
  int num_defined = 0;
  std::vector<ClassMetric> per_class;
};

// Per-class metric plus the mean over classes where it is defined; classes
// with an undefined metric are flagged and excluded. No defined class at all
// is an error.
MacroResult macro_average(const PredictionTable& table, MetricKind kind);

}  // namespace modfront
