#pragma once

#include <cstdint>
#include <vector>

#include "safnet/core.hpp"

namespace safnet {

// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
  int class_count = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(int classes = 0)
      : class_count(classes), counts(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {}

  std::uint64_t& at(int gt, int pred) { return counts[static_cast<std::size_t>(gt) * class_count + pred]; }
  std::uint64_t at(int gt, int pred) const { return counts[static_cast<std::size_t>(gt) * class_count + pred]; }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& pred, const std::vector<int>& gt, int class_count) {
  if (pred.size() != gt.size())
    throw ArgumentError("confusion: prediction has " + std::to_string(pred.size()) + " labels, ground truth has " +
                        std::to_string(gt.size()));
  if (class_count < 1) throw ArgumentError("confusion: class_count must be positive");
  ConfusionMatrix cm(class_count);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (gt[i] < 0 || gt[i] >= class_count || pred[i] < 0 || pred[i] >= class_count)
      throw ArgumentError("confusion: class id out of range at index " + std::to_string(i));
    ++cm.at(gt[i], pred[i]);
  }
  return cm;
}

struct IouReport {
  std::vector<double> per_class;  // 0 for absent classes
  std::vector<bool> present;      // TP + FP + FN > 0
  double miou = 0.0;              // mean over present classes
};

inline IouReport iou_scores(const ConfusionMatrix& cm) {
  IouReport r;
  const int n = cm.class_count;
  r.per_class.assign(n, 0.0);
  r.present.assign(n, false);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < n; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row + col - tp;
    if (denom == 0) continue;
    r.present[c] = true;
    r.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
    sum += r.per_class[c];
    ++present;
  }
  r.miou = present ? sum / present : 0.0;
  return r;
}

inline IouReport evaluate_labels(const std::vector<int>& pred, const std::vector<int>& gt, int class_count) {
  return iou_scores(confusion(pred, gt, class_count));
}

}  // namespace safnet
