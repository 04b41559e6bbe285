#include "flowid/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "flowid/error.hpp"
#include <nlohmann/json.hpp>

namespace flowid {

ConfusionMatrix confusion_matrix(const std::vector<int>& predicted, const std::vector<int>& truth,
                                 std::size_t classes) {
  if (predicted.size() != truth.size())
    throw ConfigError("confusion_matrix: prediction and truth lengths differ");
  ConfusionMatrix m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes ||
        static_cast<std::size_t>(p) >= classes)
      throw ConfigError("confusion_matrix: class index out of range at sample " + std::to_string(i));
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

namespace {
double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }
}  // namespace

MetricsReport macro_metrics(const ConfusionMatrix& confusion) {
  const std::size_t c = confusion.size();
  if (c == 0) throw ConfigError("macro_metrics: empty confusion matrix");
  for (const auto& row : confusion)
    if (row.size() != c) throw ConfigError("macro_metrics: confusion matrix must be square");
  MetricsReport r;
  r.confusion = confusion;
  r.per_class.resize(c);
  double total = 0.0, correct = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    double tp = static_cast<double>(confusion[k][k]);
    double true_count = 0.0, predicted_count = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      true_count += static_cast<double>(confusion[k][j]);
      predicted_count += static_cast<double>(confusion[j][k]);
    }
    auto& m = r.per_class[k];
    m.support = static_cast<std::size_t>(true_count);
    m.precision = ratio(tp, predicted_count);
    m.recall = ratio(tp, true_count);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    total += true_count;
    correct += tp;
  }
  for (const auto& m : r.per_class) {
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  r.macro_precision /= static_cast<double>(c);
  r.macro_recall /= static_cast<double>(c);
  r.macro_f1 /= static_cast<double>(c);
  r.accuracy = ratio(correct, total);
  return r;
}

MetricsReport evaluate_predictions(const std::vector<int>& predicted, const std::vector<int>& truth,
                                   std::size_t classes) {
  if (predicted.size() != truth.size())
    throw ConfigError("evaluate_predictions: prediction and truth lengths differ");
  std::vector<int> p, t;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0) continue;
    p.push_back(predicted[i]);
    t.push_back(truth[i]);
  }
  return macro_metrics(confusion_matrix(p, t, classes));
}

std::string report_to_json(const MetricsReport& report, int indent) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  auto classes = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& m = report.per_class[k];
    classes.push_back({{"class", k},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support}});
  }
  j["per_class"] = std::move(classes);
  j["confusion"] = report.confusion;
  return j.dump(indent);
}

std::string report_to_text(const MetricsReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(8) << "class" << std::right << std::setw(11) << "precision"
      << std::setw(11) << "recall" << std::setw(11) << "f1" << std::setw(10) << "support" << '\n';
  std::size_t total = 0;
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& m = report.per_class[k];
    total += m.support;
    out << std::left << std::setw(8) << k << std::right << std::setw(11) << m.precision
        << std::setw(11) << m.recall << std::setw(11) << m.f1 << std::setw(10) << m.support << '\n';
  }
  out << std::left << std::setw(8) << "macro" << std::right << std::setw(11)
      << report.macro_precision << std::setw(11) << report.macro_recall << std::setw(11)
      << report.macro_f1 << std::setw(10) << total << '\n';
  out << "accuracy " << report.accuracy << '\n';
  return out.str();
}

}  // namespace flowid
