#include "mpath/dataset.hpp"

#include <algorithm>
#include <cctype>

#include "mpath/error.hpp"

namespace mpath {

const char* to_string(FeatureGroup g) noexcept {
  switch (g) {
    case FeatureGroup::WV: return "WV";
    case FeatureGroup::TF: return "TF";
    case FeatureGroup::UF: return "UF";
    case FeatureGroup::NF: return "NF";
  }
  return "?";
}

FeatureGroup feature_group_from_string(std::string_view s) {
  std::string up(s);
  for (auto& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (up == "WV") return FeatureGroup::WV;
  if (up == "TF") return FeatureGroup::TF;
  if (up == "UF") return FeatureGroup::UF;
  if (up == "NF") return FeatureGroup::NF;
  fail(ErrorKind::config, "unknown feature group '" + std::string(s) +
                              "' (expected WV, TF, UF or NF)");
}

Batch Dataset::batch(std::span<const std::size_t> rows) const {
  Batch b;
  b.size = rows.size();
  b.seq_len = has_text ? seq_len : 0;
  b.feature_dim = feature_dim();
  if (has_text) b.tokens.reserve(rows.size() * seq_len);
  b.features.reserve(rows.size() * b.feature_dim);
  if (labeled()) b.labels.reserve(rows.size());
  for (auto r : rows) {
    require(r < size(), ErrorKind::index,
            "dataset row " + std::to_string(r) + " out of range");
    if (has_text)
      b.tokens.insert(b.tokens.end(), tokens.begin() + r * seq_len,
                      tokens.begin() + (r + 1) * seq_len);
    b.features.insert(b.features.end(), features.begin() + r * b.feature_dim,
                      features.begin() + (r + 1) * b.feature_dim);
    if (labeled()) b.labels.push_back(labels[r]);
  }
  return b;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.classes = classes;
  d.has_text = has_text;
  d.seq_len = seq_len;
  d.schema = schema;
  const std::size_t f = feature_dim();
  for (auto r : rows) {
    require(r < size(), ErrorKind::index,
            "dataset row " + std::to_string(r) + " out of range");
    d.ids.push_back(ids[r]);
    if (has_text)
      d.tokens.insert(d.tokens.end(), tokens.begin() + r * seq_len,
                      tokens.begin() + (r + 1) * seq_len);
    d.features.insert(d.features.end(), features.begin() + r * f,
                      features.begin() + (r + 1) * f);
    if (labeled()) d.labels.push_back(labels[r]);
  }
  return d;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes.size(), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

void Dataset::validate() const {
  const std::size_t n = size();
  if (has_text) {
    require(seq_len >= 1, ErrorKind::contract, "dataset seq_len must be >= 1");
    require(tokens.size() == n * seq_len, ErrorKind::contract,
            "token matrix does not match sample count");
  }
  require(features.size() == n * feature_dim(), ErrorKind::contract,
          "feature matrix does not match sample count");
  if (labeled()) {
    require(labels.size() == n, ErrorKind::contract,
            "label count does not match sample count");
    for (int y : labels)
      require(y >= 0 && static_cast<std::size_t>(y) < classes.size(),
              ErrorKind::index, "label " + std::to_string(y) + " out of range");
  }
}

}  // namespace mpath
