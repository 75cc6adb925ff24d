#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mpath/tensor.hpp"

namespace mpath {

using TokenList = std::vector<std::string>;

// Lowercases and splits a post into word tokens. URLs become "<url>",
// @mentions "<user>", numbers "<number>"; a hashtag yields "<hashtag>" followed
// by its word; each punctuation character is its own token.
TokenList tokenize(std::string_view text);

// True for a whitespace-delimited chunk starting with http://, https:// or www.
bool is_url(std::string_view chunk);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnknown = 1;

  Vocabulary();

  // Indexes every token seen at least twice, ordered by descending frequency
  // then lexicographically. Tokens seen once map to kUnknown.
  static Vocabulary build(const std::vector<TokenList>& corpus);
  // Rebuilds a vocabulary from its index-ordered token list (entries 0 and 1
  // are the reserved pad/unknown names).
  static Vocabulary from_index_tokens(std::vector<std::string> tokens);

  std::int32_t index(std::string_view token) const;
  const std::string& token(std::int32_t index) const;
  bool contains(std::string_view token) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  // Corpus frequency recorded at build time (0 for unseen tokens).
  std::size_t frequency(std::string_view token) const;
  const std::vector<std::string>& index_tokens() const noexcept {
    return tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> lookup_;
  std::unordered_map<std::string, std::size_t> freq_;
};

struct SequenceSpec {
  std::size_t seq_len = 1;
};

// Nearest-rank 95th percentile of the token counts (at least 1).
SequenceSpec choose_seq_len(std::span<const std::size_t> token_counts);

// Left-pads with kPad to spec.seq_len; sequences longer than seq_len keep
// their first seq_len tokens.
std::vector<std::int32_t> encode_pad(const TokenList& tokens,
                                     const Vocabulary& vocab,
                                     const SequenceSpec& spec);

// Inverse of encode_pad for in-vocabulary tokens: drops padding.
TokenList decode(std::span<const std::int32_t> indices, const Vocabulary& vocab);

// [V x d] table: row 0 zero, every other row uniform(-0.05, 0.05) drawn in
// index order from `seed`.
Tensor<float> random_embeddings(std::size_t vocab_size, std::size_t dim,
                                std::uint64_t seed);

struct EmbeddingLoadStats {
  std::size_t found = 0;
  std::size_t missing = 0;
};

// Reads a whitespace-separated "token v1 ... vd" text file and returns a
// [V x d] table whose rows for vocabulary tokens found in the file hold the
// file's vectors; the rest keep random_embeddings(seed) values.
Tensor<float> load_embeddings(const std::filesystem::path& path,
                              const Vocabulary& vocab, std::size_t dim,
                              std::uint64_t seed,
                              EmbeddingLoadStats* stats = nullptr);

}  // namespace mpath
