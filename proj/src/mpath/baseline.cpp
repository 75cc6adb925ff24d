#include "mpath/baseline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "mpath/embedded_data.hpp"
#include "mpath/error.hpp"
#include "mpath/metrics.hpp"

namespace mpath {

const std::unordered_set<std::string>& baseline_stopwords() {
  static const auto words = [] {
    std::unordered_set<std::string> out;
    std::istringstream in(embedded::kStopwords);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      out.insert(line);
    }
    return out;
  }();
  return words;
}

namespace {

bool is_marker(const std::string& t) {
  return t.size() > 2 && t.front() == '<' && t.back() == '>';
}

bool has_word_char(const std::string& t) {
  return std::any_of(t.begin(), t.end(), [](unsigned char c) {
    return std::isalnum(c) || c >= 0x80;
  });
}

}  // namespace

TokenList preprocess_baseline(std::string_view text) {
  const auto& stop = baseline_stopwords();
  TokenList out;
  for (auto& t : tokenize(text)) {
    if (is_marker(t) || !has_word_char(t) || stop.count(t)) continue;
    out.push_back(std::move(t));
  }
  return out;
}

TfidfModel TfidfModel::fit(const std::vector<TokenList>& docs, std::size_t max_terms) {
  require(!docs.empty(), ErrorKind::contract, "tf-idf needs at least one document");
  require(max_terms >= 1, ErrorKind::config, "tf-idf vocabulary size must be positive");
  std::map<std::string, std::pair<std::size_t, std::size_t>> stats;  // count, df
  for (const auto& doc : docs) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : doc) {
      auto& s = stats[t];
      ++s.first;
      if (seen.insert(t).second) ++s.second;
    }
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(
      stats.begin(), stats.end());
  // stable over the lexicographic map order: ties keep term order
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second.first > b.second.first;
  });
  if (ranked.size() > max_terms) ranked.resize(max_terms);

  TfidfModel m;
  m.documents_ = docs.size();
  for (auto& [term, s] : ranked) {
    m.index_.emplace(term, static_cast<std::uint32_t>(m.terms_.size()));
    m.terms_.push_back(term);
    m.df_.push_back(s.second);
    m.idf_.push_back(std::log((1.0 + double(docs.size())) / (1.0 + double(s.second))) + 1.0);
  }
  return m;
}

SparseRow TfidfModel::transform(const TokenList& doc) const {
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& t : doc)
    if (auto it = index_.find(t); it != index_.end()) ++counts[it->second];
  SparseRow row;
  double norm = 0;
  for (const auto& [k, n] : counts) {
    const double w = double(n) * idf_[k];
    row.emplace_back(k, w);
    norm += w * w;
  }
  norm = std::sqrt(norm);
  for (auto& e : row) e.second /= norm;
  return row;
}

std::vector<SparseRow> TfidfModel::transform(const std::vector<TokenList>& docs) const {
  std::vector<SparseRow> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(transform(d));
  return out;
}

NaiveBayes NaiveBayes::fit(const std::vector<SparseRow>& rows, std::span<const int> labels,
                           std::size_t classes, std::size_t terms, double alpha) {
  require(rows.size() == labels.size(), ErrorKind::dimension,
          "naive bayes: " + std::to_string(rows.size()) + " rows for " +
              std::to_string(labels.size()) + " labels");
  require(classes >= 2 && terms >= 1, ErrorKind::config,
          "naive bayes needs two classes and a nonempty vocabulary");
  require(alpha > 0, ErrorKind::config, "naive bayes smoothing must be positive");
  NaiveBayes nb;
  nb.classes_ = classes;
  nb.terms_ = terms;
  std::vector<double> class_count(classes, 0.0), mass(classes * terms, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    require(labels[i] >= 0 && c < classes, ErrorKind::index, "naive bayes: label out of range");
    class_count[c] += 1;
    for (const auto& [k, w] : rows[i]) {
      require(k < terms, ErrorKind::index, "naive bayes: term index out of range");
      mass[c * terms + k] += w;
    }
  }
  nb.log_prior_.resize(classes);
  nb.log_likelihood_.resize(classes * terms);
  for (std::size_t c = 0; c < classes; ++c) {
    require(class_count[c] > 0, ErrorKind::degenerate,
            "naive bayes: class " + std::to_string(c) + " has no training samples");
    nb.log_prior_[c] = std::log(class_count[c] / double(rows.size()));
    double total = 0;
    for (std::size_t k = 0; k < terms; ++k) total += mass[c * terms + k];
    const double denom = std::log(total + alpha * double(terms));
    for (std::size_t k = 0; k < terms; ++k)
      nb.log_likelihood_[c * terms + k] = std::log(mass[c * terms + k] + alpha) - denom;
  }
  return nb;
}

std::vector<double> NaiveBayes::joint_log_likelihood(const SparseRow& row) const {
  std::vector<double> out(log_prior_);
  for (std::size_t c = 0; c < classes_; ++c)
    for (const auto& [k, w] : row) {
      require(k < terms_, ErrorKind::index, "naive bayes: term index out of range");
      out[c] += w * log_likelihood_[c * terms_ + k];
    }
  return out;
}

std::vector<double> NaiveBayes::posteriors(const SparseRow& row) const {
  auto out = joint_log_likelihood(row);
  const double top = *std::max_element(out.begin(), out.end());
  double sum = 0;
  for (auto& v : out) sum += (v = std::exp(v - top));
  for (auto& v : out) v /= sum;
  return out;
}

int NaiveBayes::predict(const SparseRow& row) const {
  const auto jll = joint_log_likelihood(row);
  return static_cast<int>(std::max_element(jll.begin(), jll.end()) - jll.begin());
}

CvReport run_baseline_cv(const std::vector<std::string>& texts, std::span<const int> labels,
                         std::size_t classes, const BaselineOptions& options) {
  require(texts.size() == labels.size(), ErrorKind::dimension,
          "baseline: text and label counts differ");
  CvReport report;
  const auto folds = stratified_folds(labels, options.folds, fold_seed(options.seed),
                                      &report.warnings);
  std::vector<TokenList> docs;
  docs.reserve(texts.size());
  for (const auto& t : texts) docs.push_back(preprocess_baseline(t));

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<bool> held(texts.size(), false);
    for (auto r : folds[f]) held[r] = true;
    std::vector<TokenList> train_docs;
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < docs.size(); ++i)
      if (!held[i]) {
        train_docs.push_back(docs[i]);
        train_labels.push_back(labels[i]);
      }
    const auto tfidf = TfidfModel::fit(train_docs, options.max_terms);
    require(tfidf.size() > 0, ErrorKind::degenerate,
            "baseline: no terms survive preprocessing in fold " + std::to_string(f));
    const auto nb = NaiveBayes::fit(tfidf.transform(train_docs), train_labels, classes,
                                    tfidf.size(), options.alpha);
    std::vector<double> probs;
    std::vector<int> test_labels;
    for (auto r : folds[f]) {
      const auto p = nb.posteriors(tfidf.transform(docs[r]));
      probs.insert(probs.end(), p.begin(), p.end());
      test_labels.push_back(labels[r]);
    }
    report.folds.push_back(evaluate_predictions(probs, test_labels, classes));
  }
  report.mean = mean_metrics(report.folds);
  return report;
}

}  // namespace mpath
