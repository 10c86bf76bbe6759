#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lungx {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct MetricReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;  // false when the denominator was zero
  bool recall_defined = true;
  bool f1_defined = true;
  std::optional<double> auc;  // empty when the score set was single-class
  ConfusionCounts counts;
};

/// Threshold scores at `threshold` (predict positive iff p >= threshold).
inline ConfusionCounts confusion(const std::vector<double>& probs, const std::vector<int>& labels,
                                 double threshold = 0.5) {
  if (probs.size() != labels.size())
    throw std::invalid_argument("confusion: " + std::to_string(probs.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("confusion: labels must be 0 or 1");
    bool pred = probs[i] >= threshold;
    if (pred && labels[i] == 1)
      ++c.tp;
    else if (pred && labels[i] == 0)
      ++c.fp;
    else if (!pred && labels[i] == 0)
      ++c.tn;
    else
      ++c.fn;
  }
  return c;
}

/// Accuracy/precision/recall/F1 from confusion counts. Zero denominators
/// yield 0 with the corresponding defined-flag cleared. AUC is not filled
/// here; see auc_rank.
inline MetricReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("compute_metrics: no scored samples");
  MetricReport r;
  r.counts = c;
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp > 0) {
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    r.precision = 0.0;
    r.precision_defined = false;
  }
  if (c.tp + c.fn > 0) {
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    r.recall = 0.0;
    r.recall_defined = false;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.f1 = 0.0;
    r.f1_defined = false;
  }
  return r;
}

/// AUC as the Mann-Whitney rank statistic with midrank tie handling:
/// the fraction of (positive, negative) pairs ranked correctly, ties 0.5.
/// O(n log n); rejects single-class inputs.
inline double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auc: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    if (l == 1)
      ++pos;
    else
      ++neg;
  }
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("auc: needs both classes, got " + std::to_string(pos) +
                                " positives and " + std::to_string(neg) + " negatives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t i = 0, n = order.size();
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

}  // namespace lungx
