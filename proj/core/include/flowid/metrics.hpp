#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace flowid {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // true count
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;  // mean of per-class F1, not F1 of the macro means
  ConfusionMatrix confusion;
};

/// confusion[t][p] = number of samples with truth t predicted as p.
/// Throws ConfigError on a length mismatch or an index outside [0, classes).
ConfusionMatrix confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& truth,
                                 std::size_t classes);

/// Per-class precision/recall/F1 with 0/0 taken as 0, unweighted macro means and
/// accuracy = trace / total. Throws ConfigError on an empty or non-square matrix.
MetricsReport macro_metrics(const ConfusionMatrix& confusion);

/// Scores only entries whose truth is >= 0.
MetricsReport evaluate_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                                   std::size_t classes);

/// {"accuracy","macro_precision","macro_recall","macro_f1","per_class":[{"class","precision","recall","f1","support"}],"confusion":[[...]]}
std::string report_to_json(const MetricsReport& report, int indent = 2);
/// Aligned table, one row per class followed by the macro row and accuracy.
std::string report_to_text(const MetricsReport& report);

}  // namespace flowid
