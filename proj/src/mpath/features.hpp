#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "mpath/dataset.hpp"

namespace mpath {

// Affect slots carried by tweet features. Values come from dataset columns
// with these names; absent values are imputed as 0.
inline constexpr std::array<std::string_view, 8> kAffectColumns = {
    "sentiment", "anger", "disgust", "fear",
    "joy",       "sadness", "surprise", "offensiveness"};

struct AffectScores {
  std::array<double, kAffectColumns.size()> values{};
  std::array<bool, kAffectColumns.size()> present{};
};

struct FeatureVector {
  FeatureSchema schema;
  std::vector<double> values;
};

struct TweetCounts {
  std::size_t hashtags = 0;
  std::size_t mentions = 0;
  std::size_t emoticons = 0;
  std::size_t uppercase_words = 0;
  std::size_t urls = 0;
};

TweetCounts count_tweet_tokens(std::string_view text);

// Counters, affect slots and the affect_present flag (14 TF columns).
FeatureVector tweet_features(std::string_view text,
                             const AffectScores& affect = {});
FeatureSchema tweet_feature_schema();

const std::vector<std::string>& emoticon_lexicon();

// One-hot for at most kMaxOneHot distinct values (categories sorted
// lexicographically), otherwise a single ordinal column holding the value's
// frequency rank (0 = most frequent, ties broken lexicographically).
class CategoricalEncoder {
 public:
  static constexpr std::size_t kMaxOneHot = 16;

  static CategoricalEncoder fit(const std::vector<std::string>& values);

  bool one_hot() const noexcept { return one_hot_; }
  const std::vector<std::string>& categories() const noexcept {
    return categories_;
  }
  std::size_t width() const noexcept { return one_hot_ ? categories_.size() : 1; }
  std::vector<std::string> column_names(const std::string& base) const;
  // Unseen values encode as all zeros (one-hot) or rank = #categories.
  void encode(std::string_view value, double* out) const;

  nlohmann::json to_json() const;
  static CategoricalEncoder from_json(const nlohmann::json& j);

 private:
  bool one_hot_ = true;
  std::vector<std::string> categories_;
  std::unordered_map<std::string, std::size_t> lookup_;

  void index();
};

struct EncodedColumns {
  std::vector<std::string> names;
  std::vector<double> values;  // rows x names.size()
};

EncodedColumns encode_categorical(const std::vector<std::string>& column,
                                  const std::string& name = "value");

// Nonempty subset of {WV, TF, UF, NF}.
class FeatureGroupMask {
 public:
  FeatureGroupMask() = default;
  explicit FeatureGroupMask(std::initializer_list<FeatureGroup> groups);

  // "WV+TF", "TF,UF" or "all".
  static FeatureGroupMask parse(std::string_view text);
  // The fifteen combinations of the metadata-importance table, in its row order.
  static std::vector<FeatureGroupMask> importance_table();

  bool has(FeatureGroup g) const noexcept {
    return (bits_ >> static_cast<unsigned>(g)) & 1u;
  }
  bool has_metadata() const noexcept { return (bits_ & 0b1110u) != 0; }
  bool empty() const noexcept { return bits_ == 0; }
  FeatureGroupMask with(FeatureGroup g) const noexcept {
    FeatureGroupMask m = *this;
    m.bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(g));
    return m;
  }
  bool covers(const FeatureGroupMask& other) const noexcept {
    return (other.bits_ & ~bits_) == 0;
  }
  std::uint8_t bits() const noexcept { return bits_; }
  std::string to_string() const;

  bool operator==(const FeatureGroupMask&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

// Keeps the metadata columns whose group is in the mask and drops the text
// input unless WV is present.
Dataset assemble(const Dataset& data, const FeatureGroupMask& mask);

// Groups that have an input in `data`: WV when it has text, plus every
// metadata group with at least one column.
FeatureGroupMask available_groups(const Dataset& data);

enum class ColumnKind : std::uint8_t { numeric, categorical };

struct ColumnSpec {
  std::string name;
  FeatureGroup group = FeatureGroup::UF;
  ColumnKind kind = ColumnKind::numeric;
};

// Raw per-row inputs of the metadata path.
struct MetadataInput {
  std::size_t rows = 0;
  std::vector<std::string> texts;  // used when tweet features are enabled
  std::unordered_map<std::string, std::vector<std::string>> columns;
  FeatureSchema network_schema;       // NF columns computed upstream
  std::vector<double> network_values; // rows x network_schema.size(), NaN = missing
};

struct FeatureMatrix {
  FeatureSchema schema;
  std::vector<float> values;
};

// Fitted metadata transform: tweet features, declared numeric/categorical
// columns and network features, with mean imputation of missing numerics.
class FeaturePipeline {
 public:
  static FeaturePipeline fit(bool tweet_features,
                             const std::vector<ColumnSpec>& columns,
                             const MetadataInput& input);

  FeatureMatrix transform(const MetadataInput& input) const;
  const FeatureSchema& schema() const noexcept { return schema_; }
  bool tweet_features() const noexcept { return tweet_features_; }
  const std::vector<ColumnSpec>& columns() const noexcept { return columns_; }

  nlohmann::json to_json() const;
  static FeaturePipeline from_json(const nlohmann::json& j);

 private:
  bool tweet_features_ = false;
  std::vector<ColumnSpec> columns_;
  std::vector<CategoricalEncoder> encoders_;  // parallel to columns_
  FeatureSchema network_schema_;
  FeatureSchema schema_;
  std::vector<double> means_;  // per output column, for imputation

  std::vector<double> raw_matrix(const MetadataInput& input) const;
};

// Parses a numeric cell; empty, "na", "nan" and "null" are missing (NaN).
double parse_numeric_cell(std::string_view cell);

}  // namespace mpath
