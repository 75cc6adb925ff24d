#pragma once

// Synthetic labelled corpora with known structure, for end-to-end checks.

#include <cstdint>
#include <string>

#include "mpath/ingest.hpp"

namespace mpath {

struct SynthOptions {
  std::size_t samples = 5000;
  double noise = 0.0;  // probability of flipping a label
  std::uint64_t seed = 0;
};

struct SyntheticSet {
  RawTable table;
  SchemaDescriptor schema;
};

inline constexpr const char* kXorTrigger = "zephyr";
inline constexpr double kXorThreshold = 0.5;

// Label = (post contains kXorTrigger) XOR (column "signal" > kXorThreshold).
// Both inputs are balanced and independent, so neither alone says anything
// about the label. Columns "aux1" and "aux2" are pure noise.
SyntheticSet make_xor_fusion(const SynthOptions& options);

// Metadata-only task: columns tf_signal, uf_signal and nf_signal (groups TF,
// UF, NF) each shift by the label independently; every group also has a
// noise column.
SyntheticSet make_independent_groups(const SynthOptions& options);

}  // namespace mpath
