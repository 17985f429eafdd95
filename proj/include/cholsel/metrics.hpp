#pragma once

#include <cmath>

#include "pattern.hpp"

namespace cholsel {

// Support-recovery summary of an estimate against the truth.
struct MetricsRow {
  double ppv = 0.0;
  double tpr = 0.0;
  double mcc = 0.0;
  ConfusionCounts counts;
};

// PPV = TP/(TP+FP), TPR = TP/(TP+FN) and the Matthews correlation
//   (TP TN - FP FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)).
// Any zero denominator yields 0.
inline MetricsRow metrics(const ConfusionCounts& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  MetricsRow row;
  row.counts = c;
  row.ppv = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  row.tpr = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  row.mcc = denom > 0 ? (tp * tn - fp * fn) / std::sqrt(denom) : 0.0;
  return row;
}

}  // namespace cholsel
