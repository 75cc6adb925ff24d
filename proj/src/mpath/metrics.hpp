#pragma once

#include <span>
#include <vector>

#include "json.hpp"

namespace mpath {

// Probability that a random positive outscores a random negative, ties
// counting one half. Throws a degenerate error unless both classes occur.
double roc_auc(std::span<const double> scores, std::span<const int> positive);

// Mean one-vs-rest AUC over classes that have both positives and negatives.
// probs is row-major [n x classes].
double macro_auc(std::span<const double> probs, std::span<const int> labels,
                 std::size_t classes);

struct ClassificationScores {
  double precision = 0;  // support-weighted over classes
  double recall = 0;
  double f1 = 0;
  double accuracy = 0;
};

// Per-class precision/recall/F1 (0 when undefined), averaged with class
// support as weights.
ClassificationScores prf1(std::span<const int> predicted,
                          std::span<const int> labels, std::size_t classes);

struct Metrics {
  double auc = 0;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  nlohmann::json to_json() const;
};

// Argmax predictions scored against labels, plus macro AUC of the
// probabilities.
Metrics evaluate_predictions(std::span<const double> probs,
                             std::span<const int> labels, std::size_t classes);

// Field-wise arithmetic mean.
Metrics mean_metrics(std::span<const Metrics> runs);

}  // namespace mpath
