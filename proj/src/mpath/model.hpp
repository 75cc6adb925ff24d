#pragma once

// The three architectures: text-only, metadata-only, and the combined model
// that fuses both 128-wide feature layers under one softmax head.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpath/dataset.hpp"
#include "mpath/layers.hpp"
#include "mpath/params.hpp"
#include "mpath/tensor.hpp"

namespace mpath {

enum class ModelKind : std::uint8_t { text, metadata, combined };

const char* to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(std::string_view s);

// Width of each path's feature layer, the fusion input per path.
inline constexpr std::size_t kFusionWidth = 128;
// Sequences longer than this use attention instead of the last GRU state.
inline constexpr std::size_t kAttentionMinSeqLen = 101;

struct ModelConfig {
  ModelKind kind = ModelKind::combined;
  std::vector<std::string> classes;

  // text path
  std::size_t vocab_size = 0;
  std::size_t seq_len = 0;
  std::size_t embedding_dim = 200;
  std::size_t gru_units = kFusionWidth;
  double recurrent_dropout = 0.5;

  // metadata path
  FeatureSchema schema;
  std::vector<std::size_t> dense_widths{512, 245, 128, 64, 32};
  std::size_t metadata_width = kFusionWidth;

  std::uint64_t seed = 0;

  bool has_text() const noexcept { return kind != ModelKind::metadata; }
  bool has_metadata() const noexcept { return kind != ModelKind::text; }
  bool attention() const noexcept { return seq_len >= kAttentionMinSeqLen; }
  std::size_t feature_dim() const noexcept { return schema.size(); }

  // Throws a config error for unusable settings (fewer than two classes,
  // empty vocabulary, zero feature dimension, ...).
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

template <typename T>
class Model {
 public:
  // `embeddings` is the [vocab_size x embedding_dim] starting table; when
  // absent a seeded random table is used.
  explicit Model(ModelConfig config,
                 std::optional<Tensor<float>> embeddings = std::nullopt);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore<T>& params() noexcept { return store_; }
  const ParameterStore<T>& params() const noexcept { return store_; }

  // Class probabilities [batch x classes]. `rng` drives recurrent dropout and
  // is only read when train is set.
  Variable<T> forward(Tape<T>& tape, const Batch& batch, bool train,
                      std::mt19937_64* rng) const;

  // Feature layers of each path ([batch x 128]).
  Variable<T> text_features(Tape<T>& tape, const Batch& batch, bool train,
                            std::mt19937_64* rng) const;
  Variable<T> metadata_features(Tape<T>& tape, const Batch& batch,
                                bool train) const;
  // Softmax head over given path features; unused paths pass a null Variable.
  Variable<T> classify(Tape<T>& tape, const Variable<T>& text,
                       const Variable<T>& metadata) const;

  // Inference-mode probabilities for every row, row-major [n x classes].
  std::vector<double> predict(const Dataset& data,
                              std::size_t batch_size = 512) const;

  std::size_t parameter_count(bool include_embeddings) const {
    return store_.trainable_count(include_embeddings);
  }

  // Copies every parameter and buffer of `path` from a model holding the
  // same names and shapes.
  template <typename U>
  void copy_path_from(const Model<U>& other, PathTag path);

 private:
  ModelConfig config_;
  ParameterStore<T> store_;
  Embedding<T> embedding_;
  Gru<T> gru_;
  Attention<T> attention_;
  BatchNorm<T> bn_;
  std::vector<Dense<T>> dense_;  // hidden stack plus the feature layer
  Dense<T> head_;
};

extern template class Model<float>;
extern template class Model<double>;
extern template void Model<float>::copy_path_from(const Model<float>&, PathTag);
extern template void Model<double>::copy_path_from(const Model<double>&, PathTag);
extern template void Model<double>::copy_path_from(const Model<float>&, PathTag);
extern template void Model<float>::copy_path_from(const Model<double>&, PathTag);

// Binary checkpoint: magic, format version, JSON header (model config plus
// caller-supplied extras), then one record per parameter or buffer holding
// name, path tag, trainable and buffer flags, shape and little-endian float32
// values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  Model<float> model;
  nlohmann::json extra;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mpath
