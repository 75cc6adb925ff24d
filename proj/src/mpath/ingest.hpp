#pragma once

// Delimited dataset files, the sidecar schema descriptor, and the encoding
// of raw rows into model inputs.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mpath/dataset.hpp"
#include "mpath/features.hpp"
#include "mpath/text.hpp"

namespace mpath {

// Header plus string cells, one vector per record.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(std::string_view column) const;
  // Schema error naming the column when it is absent.
  std::size_t column(std::string_view name) const;
  std::vector<std::string> values(std::string_view column) const;
};

// RFC 4180 style: quoted cells may hold delimiters, doubled quotes and line
// breaks. Parse errors carry the 1-based line.
RawTable parse_delimited(std::string_view text, char delimiter = ',');
RawTable read_delimited(const std::filesystem::path& path, char delimiter = ',');
std::string format_delimited(const RawTable& table, char delimiter = ',');
void write_delimited(const std::filesystem::path& path, const RawTable& table,
                     char delimiter = ',');

// Follower graph that supplies the NF columns, keyed by a user column.
struct NetworkSource {
  std::filesystem::path edges;
  std::filesystem::path nodes;  // optional follower/friend counts
  std::string user_column = "user";
};

// Sidecar JSON describing how to read a dataset file.
struct SchemaDescriptor {
  std::string id_column = "id";
  std::string text_column = "text";  // empty: no text input
  std::string label_column = "label";
  std::vector<std::string> classes;  // empty: sorted distinct labels
  bool tweet_features = false;       // TF counters derived from the text
  std::vector<ColumnSpec> columns;
  std::optional<NetworkSource> network;
  char delimiter = ',';

  nlohmann::json to_json() const;
  // Relative graph paths resolve against `base`.
  static SchemaDescriptor from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base = {});
  static SchemaDescriptor load(const std::filesystem::path& path);
};

// Human-readable differences between two column lists; empty when equal.
std::vector<std::string> schema_diff(const std::vector<ColumnSpec>& expected,
                                     const std::vector<ColumnSpec>& actual);

// Encoders fitted on a corpus and reused to encode later files.
struct Encoders {
  Vocabulary vocab;
  SequenceSpec seq;
  FeaturePipeline pipeline;
  std::vector<std::string> classes;
};

struct EncodedData {
  Dataset dataset;
  std::vector<std::string> texts;  // raw posts, for the baseline
};

// Fits vocabulary, sequence length and metadata pipeline on the table.
Encoders fit_encoders(const RawTable& table, const SchemaDescriptor& schema);

// Encodes rows with fitted encoders. A missing label column gives unlabeled
// (scores-only) data; labels outside the class list are schema errors.
EncodedData encode_table(const RawTable& table, const SchemaDescriptor& schema,
                         const Encoders& encoders);

nlohmann::json encoders_to_json(const Encoders& e);
Encoders encoders_from_json(const nlohmann::json& j);

}  // namespace mpath
