#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpath {

// Input groups: word vectors (text), tweet-, user- and network-based metadata.
enum class FeatureGroup : std::uint8_t { WV = 0, TF = 1, UF = 2, NF = 3 };

const char* to_string(FeatureGroup g) noexcept;
FeatureGroup feature_group_from_string(std::string_view s);

struct FeatureColumn {
  std::string name;
  FeatureGroup group = FeatureGroup::TF;

  bool operator==(const FeatureColumn&) const = default;
};

using FeatureSchema = std::vector<FeatureColumn>;

// One mini-batch in model input layout.
struct Batch {
  std::size_t size = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> tokens;  // size x seq_len, empty without text
  std::size_t feature_dim = 0;
  std::vector<float> features;       // size x feature_dim
  std::vector<int> labels;           // empty when unlabeled
};

// Encoded samples: padded token indices, metadata matrix and labels.
struct Dataset {
  std::vector<std::string> classes;
  std::vector<std::string> ids;

  bool has_text = false;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> tokens;

  FeatureSchema schema;
  std::vector<float> features;

  std::vector<int> labels;  // empty => scores-only data

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t feature_dim() const noexcept { return schema.size(); }
  bool labeled() const noexcept { return !labels.empty(); }

  Batch batch(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;
  // Per-class sample counts (labeled data only).
  std::vector<std::size_t> class_counts() const;
  // Throws when buffer sizes disagree with size()/seq_len/schema.
  void validate() const;
};

}  // namespace mpath
