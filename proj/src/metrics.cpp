#include "modfront/metrics.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>

#include "modfront/errors.hpp"

namespace modfront {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ConfigError("metrics: " + std::to_string(scores.size()) + " scores vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw ConfigError("metrics: empty input");
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("metrics: non-finite score");
  }
}

std::vector<std::size_t> order_by_score(const std::vector<double>& scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  check_inputs(scores, labels);
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;

  // Rank-sum form of the Mann-Whitney U statistic; tied scores share the
  // average of their 1-based rank range, which credits tied pairs 1/2. All
  // intermediate values are half-integers, exact in doubles.
  const std::vector<std::size_t> idx = order_by_score(scores, /*descending=*/false);
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[idx[t]] != 0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::optional<double> pr_auc(const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  check_inputs(scores, labels);
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0 ? 1 : 0;
  if (pos == 0) return std::nullopt;

  const std::vector<std::size_t> idx = order_by_score(scores, /*descending=*/true);
  const double p = static_cast<double>(pos);
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    std::size_t group_tp = 0;
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[idx[t]] != 0) ++group_tp;
    }
    seen += j - i + 1;
    tp += group_tp;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += precision * (static_cast<double>(group_tp) / p);
    }
    i = j + 1;
  }
  return ap;
}

MacroResult macro_average(const PredictionTable& table, MetricKind kind) {
  if (table.num_examples() == 0 || table.num_classes() == 0) {
    throw ConfigError("macro_average: empty prediction table");
  }
  MacroResult res;
  res.per_class.reserve(table.num_classes());
  double sum = 0.0;
  for (std::size_t c = 0; c < table.num_classes(); ++c) {
    std::vector<double> s(table.num_examples());
    std::vector<int> l(table.num_examples());
    for (std::size_t r = 0; r < table.num_examples(); ++r) {
      s[r] = table.scores(r, c);
      l[r] = table.labels(r, c) > 0.5 ? 1 : 0;
    }
    const std::optional<double> v = kind == MetricKind::roc ? roc_auc(s, l) : pr_auc(s, l);
    ClassMetric cm;
    cm.name = c < table.class_names.size() ? table.class_names[c] : std::to_string(c);
    cm.defined = v.has_value();
    cm.value = v.value_or(0.0);
    if (cm.defined) {
      sum += cm.value;
      ++res.num_defined;
    }
    res.per_class.push_back(std::move(cm));
  }
  if (res.num_defined == 0) {
    throw ConfigError("macro_average: metric undefined for every class");
  }
  res.value = sum / res.num_defined;
  return res;
}

}  // namespace modfront
