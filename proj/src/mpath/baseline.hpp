#pragma once

// Multinomial Naive Bayes over TF-IDF weights, the classical reference point
// for the neural models.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mpath/text.hpp"
#include "mpath/training.hpp"

namespace mpath {

// Lowercased word tokens with URLs, mentions, numbers, punctuation and stop
// words removed; hashtags keep their word.
TokenList preprocess_baseline(std::string_view text);

// The shipped multilingual stop-list.
const std::unordered_set<std::string>& baseline_stopwords();

// Sorted (term index, weight) pairs.
using SparseRow = std::vector<std::pair<std::uint32_t, double>>;

class TfidfModel {
 public:
  static constexpr std::size_t kDefaultMaxTerms = 10000;

  // Keeps the max_terms most frequent terms (total occurrences, ties by
  // term) and records their document frequencies.
  static TfidfModel fit(const std::vector<TokenList>& docs,
                        std::size_t max_terms = kDefaultMaxTerms);

  // Raw counts times idf, each row scaled to unit L2 norm (empty rows stay
  // empty). Out-of-vocabulary tokens are ignored.
  SparseRow transform(const TokenList& doc) const;
  std::vector<SparseRow> transform(const std::vector<TokenList>& docs) const;

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  // ln((1 + N) / (1 + df)) + 1
  double idf(std::size_t term) const { return idf_.at(term); }
  std::size_t document_frequency(std::size_t term) const { return df_.at(term); }
  std::size_t documents() const noexcept { return documents_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::size_t documents_ = 0;
};

class NaiveBayes {
 public:
  // Laplace-smoothed multinomial likelihoods over summed row weights.
  static NaiveBayes fit(const std::vector<SparseRow>& rows, std::span<const int> labels,
                        std::size_t classes, std::size_t terms, double alpha = 1.0);

  // log prior + sum of weight * log likelihood, per class.
  std::vector<double> joint_log_likelihood(const SparseRow& row) const;
  // Normalised class posteriors.
  std::vector<double> posteriors(const SparseRow& row) const;
  // Argmax of the joint log likelihood; ties go to the lowest class.
  int predict(const SparseRow& row) const;

  double log_prior(std::size_t c) const { return log_prior_.at(c); }
  double log_likelihood(std::size_t c, std::size_t term) const {
    return log_likelihood_.at(c * terms_ + term);
  }

 private:
  std::size_t classes_ = 0, terms_ = 0;
  std::vector<double> log_prior_;
  std::vector<double> log_likelihood_;  // classes x terms
};

struct BaselineOptions {
  std::size_t folds = 10;
  std::size_t max_terms = TfidfModel::kDefaultMaxTerms;
  double alpha = 1.0;
  std::uint64_t seed = 0;
};

// Stratified k-fold evaluation of TF-IDF + Naive Bayes; the term list and
// document frequencies are fitted on each training split only. The fold
// assignment matches run_cv for the same seed.
CvReport run_baseline_cv(const std::vector<std::string>& texts, std::span<const int> labels,
                         std::size_t classes, const BaselineOptions& options = {});

}  // namespace mpath
