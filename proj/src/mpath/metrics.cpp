#include "mpath/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mpath/error.hpp"

namespace mpath {

double roc_auc(std::span<const double> scores, std::span<const int> positive) {
  require(scores.size() == positive.size(), ErrorKind::dimension,
          "roc_auc: " + std::to_string(scores.size()) + " scores for " +
              std::to_string(positive.size()) + " labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending score order; every positive beats all
  // negatives below its group and ties half of those inside it.
  double wins = 0;
  std::size_t neg_below = 0, pos_total = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? pos : neg) += 1;
      ++j;
    }
    wins += double(pos) * double(neg_below) + 0.5 * double(pos) * double(neg);
    neg_below += neg;
    pos_total += pos;
    i = j;
  }
  require(pos_total > 0 && neg_below > 0, ErrorKind::degenerate,
          "AUC is undefined when only one class is present");
  return wins / (double(pos_total) * double(neg_below));
}

double macro_auc(std::span<const double> probs, std::span<const int> labels,
                 std::size_t classes) {
  require(probs.size() == labels.size() * classes, ErrorKind::dimension,
          "macro_auc: probability matrix does not match labels");
  std::vector<double> column(labels.size());
  std::vector<int> positive(labels.size());
  double total = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = probs[i * classes + k];
      positive[i] = labels[i] == static_cast<int>(k);
      pos += positive[i];
    }
    if (pos == 0 || pos == labels.size()) continue;
    total += roc_auc(column, positive);
    ++used;
  }
  require(used > 0, ErrorKind::degenerate,
          "AUC is undefined when only one class is present");
  return total / double(used);
}

ClassificationScores prf1(std::span<const int> predicted,
                          std::span<const int> labels, std::size_t classes) {
  require(predicted.size() == labels.size(), ErrorKind::dimension,
          "prf1: prediction and label counts differ");
  require(!labels.empty(), ErrorKind::contract, "prf1 of an empty set");
  std::vector<std::size_t> tp(classes, 0), pred_count(classes, 0), support(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto y = static_cast<std::size_t>(labels[i]);
    require(p < classes && y < classes, ErrorKind::index, "prf1: class out of range");
    ++pred_count[p];
    ++support[y];
    if (p == y) {
      ++tp[y];
      ++correct;
    }
  }
  ClassificationScores s;
  const double n = double(labels.size());
  for (std::size_t k = 0; k < classes; ++k) {
    if (support[k] == 0) continue;
    const double prec = pred_count[k] ? double(tp[k]) / double(pred_count[k]) : 0.0;
    const double rec = double(tp[k]) / double(support[k]);
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    const double w = double(support[k]) / n;
    s.precision += w * prec;
    s.f1 += w * f1;
  }
  // support-weighted recall sums to correct / n; use that form so it is
  // exactly the accuracy
  s.accuracy = double(correct) / n;
  s.recall = s.accuracy;
  return s;
}

nlohmann::json Metrics::to_json() const {
  return {{"auc", auc}, {"accuracy", accuracy}, {"precision", precision},
          {"recall", recall}, {"f1", f1}};
}

Metrics evaluate_predictions(std::span<const double> probs,
                             std::span<const int> labels, std::size_t classes) {
  require(probs.size() == labels.size() * classes, ErrorKind::dimension,
          "evaluate: probability matrix does not match labels");
  std::vector<int> predicted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = probs.subspan(i * classes, classes);
    predicted[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  const auto s = prf1(predicted, labels, classes);
  Metrics m;
  m.auc = macro_auc(probs, labels, classes);
  m.accuracy = s.accuracy;
  m.precision = s.precision;
  m.recall = s.recall;
  m.f1 = s.f1;
  return m;
}

Metrics mean_metrics(std::span<const Metrics> runs) {
  require(!runs.empty(), ErrorKind::contract, "mean of zero metric runs");
  Metrics m;
  for (const auto& r : runs) {
    m.auc += r.auc;
    m.accuracy += r.accuracy;
    m.precision += r.precision;
    m.recall += r.recall;
    m.f1 += r.f1;
  }
  const double n = double(runs.size());
  m.auc /= n;
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

}  // namespace mpath
