#include "mpath/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace mpath {
namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Letters, digits, underscore and any non-ASCII byte (UTF-8 continuation).
bool is_word(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace

bool is_url(std::string_view chunk) {
  const std::string l = lower(chunk.substr(0, 8));
  return l.starts_with("http://") || l.starts_with("https://") ||
         l.starts_with("www.");
}

namespace {

// Digits with optional single '.' or ',' separators between digit groups.
bool is_number(std::string_view w) {
  if (w.empty() || !is_digit(w.front()) || !is_digit(w.back())) return false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const unsigned char c = w[i];
    if (is_digit(c)) continue;
    if ((c == '.' || c == ',') && i + 1 < w.size() && is_digit(w[i + 1]))
      continue;
    return false;
  }
  return true;
}

void tokenize_chunk(std::string_view s, TokenList& out) {
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = s[i];
    if ((c == '@' || c == '#') && i + 1 < s.size() &&
        is_word(static_cast<unsigned char>(s[i + 1]))) {
      std::size_t j = i + 1;
      while (j < s.size() && is_word(static_cast<unsigned char>(s[j]))) ++j;
      if (c == '@') {
        out.emplace_back("<user>");
      } else {
        out.emplace_back("<hashtag>");
        out.push_back(lower(s.substr(i + 1, j - i - 1)));
      }
      i = j;
    } else if (is_word(c)) {
      std::size_t j = i;
      while (j < s.size()) {
        const unsigned char cj = s[j];
        if (is_word(cj)) {
          ++j;
        } else if ((cj == '\'' || cj == '.' || cj == ',') && j + 1 < s.size() &&
                   is_word(static_cast<unsigned char>(s[j + 1])) &&
                   (cj == '\'' || is_digit(static_cast<unsigned char>(s[j - 1])))) {
          // keep "don't" and "3.5" together
          ++j;
        } else {
          break;
        }
      }
      const std::string_view w = s.substr(i, j - i);
      if (is_number(w)) {
        out.emplace_back("<number>");
      } else if (std::all_of(w.begin(), w.end(), [](unsigned char ch) {
                   return is_word(ch) || ch == '\'';
                 })) {
        out.push_back(lower(w));
      } else {
        // letters glued to a decimal separator, e.g. "a1.b": split at punctuation
        std::size_t k = 0;
        while (k < w.size()) {
          std::size_t e = k;
          while (e < w.size() && w[e] != '.' && w[e] != ',') ++e;
          if (e > k) {
            const auto part = w.substr(k, e - k);
            out.push_back(is_number(part) ? std::string("<number>") : lower(part));
          }
          if (e < w.size()) out.emplace_back(1, w[e]);
          k = e + 1;
        }
      }
      i = j;
    } else {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      const auto chunk = text.substr(i, j - i);
      if (is_url(chunk))
        out.emplace_back("<url>");
      else
        tokenize_chunk(chunk, out);
    }
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {}

Vocabulary Vocabulary::build(const std::vector<TokenList>& corpus) {
  Vocabulary v;
  for (const auto& doc : corpus)
    for (const auto& t : doc) ++v.freq_[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : v.freq_)
    if (n >= 2) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [tok, n] : kept) {
    v.lookup_.emplace(tok, static_cast<std::int32_t>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_index_tokens(std::vector<std::string> tokens) {
  require(tokens.size() >= 2, ErrorKind::format,
          "vocabulary needs the two reserved entries");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 2; i < v.tokens_.size(); ++i) {
    const bool fresh =
        v.lookup_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second;
    require(fresh, ErrorKind::format,
            "duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  return v;
}

std::int32_t Vocabulary::index(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token(std::int32_t index) const {
  require(index >= 0 && static_cast<std::size_t>(index) < tokens_.size(),
          ErrorKind::index,
          "vocabulary index " + std::to_string(index) + " out of range");
  return tokens_[static_cast<std::size_t>(index)];
}

bool Vocabulary::contains(std::string_view token) const {
  return lookup_.count(std::string(token)) > 0;
}

std::size_t Vocabulary::frequency(std::string_view token) const {
  auto it = freq_.find(std::string(token));
  return it == freq_.end() ? 0 : it->second;
}

SequenceSpec choose_seq_len(std::span<const std::size_t> token_counts) {
  require(!token_counts.empty(), ErrorKind::contract,
          "choose_seq_len: empty corpus");
  std::vector<std::size_t> sorted(token_counts.begin(), token_counts.end());
  std::sort(sorted.begin(), sorted.end());
  // nearest rank: ceil(0.95 n), computed in integers
  const std::size_t n = sorted.size();
  const std::size_t rank = (95 * n + 99) / 100;
  SequenceSpec spec;
  spec.seq_len = std::max<std::size_t>(1, sorted[std::max<std::size_t>(rank, 1) - 1]);
  return spec;
}

std::vector<std::int32_t> encode_pad(const TokenList& tokens,
                                     const Vocabulary& vocab,
                                     const SequenceSpec& spec) {
  std::vector<std::int32_t> out(spec.seq_len, Vocabulary::kPad);
  const std::size_t n = std::min(tokens.size(), spec.seq_len);
  const std::size_t offset = spec.seq_len - n;
  for (std::size_t i = 0; i < n; ++i) out[offset + i] = vocab.index(tokens[i]);
  return out;
}

TokenList decode(std::span<const std::int32_t> indices, const Vocabulary& vocab) {
  TokenList out;
  for (auto idx : indices)
    if (idx != Vocabulary::kPad) out.push_back(vocab.token(idx));
  return out;
}

Tensor<float> random_embeddings(std::size_t vocab_size, std::size_t dim,
                                std::uint64_t seed) {
  require(dim > 0, ErrorKind::config, "embedding dimension must be positive");
  Tensor<float> table({vocab_size, dim});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  for (std::size_t i = dim; i < table.size(); ++i)
    table[i] = static_cast<float>(dist(rng));
  return table;
}

Tensor<float> load_embeddings(const std::filesystem::path& path,
                              const Vocabulary& vocab, std::size_t dim,
                              std::uint64_t seed, EmbeddingLoadStats* stats) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open embedding file " + path.string());
  Tensor<float> table = random_embeddings(vocab.size(), dim, seed);
  std::vector<std::uint8_t> seen(vocab.size(), 0);

  std::string line;
  std::size_t lineno = 0;
  std::size_t file_dim = 0;
  std::vector<std::string_view> fields;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::string_view sv(line);
    std::size_t i = 0;
    while (i < sv.size()) {
      while (i < sv.size() && (sv[i] == ' ' || sv[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < sv.size() && sv[j] != ' ' && sv[j] != '\t') ++j;
      if (j > i) fields.push_back(sv.substr(i, j - i));
      i = j;
    }
    if (fields.empty()) continue;
    // word2vec-style "count dim" header
    if (lineno == 1 && fields.size() == 2 && dim != 1) {
      std::size_t a = 0, b = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b);
      if (r1.ec == std::errc() && r2.ec == std::errc() &&
          r1.ptr == fields[0].data() + fields[0].size() &&
          r2.ptr == fields[1].data() + fields[1].size()) {
        if (b != dim)
          fail(ErrorKind::format, "embedding file declares dimension " +
                                      std::to_string(b) + ", expected " +
                                      std::to_string(dim));
        file_dim = b;
        continue;
      }
    }
    if (fields.size() < 2)
      throw ParseError(lineno, "embedding line has no vector values");
    const std::size_t arity = fields.size() - 1;
    if (file_dim == 0) {
      file_dim = arity;
      if (file_dim != dim)
        fail(ErrorKind::format, "embedding file has dimension " +
                                    std::to_string(file_dim) + ", expected " +
                                    std::to_string(dim));
    } else if (arity != file_dim) {
      throw ParseError(lineno, "expected " + std::to_string(file_dim) +
                                   " values, found " + std::to_string(arity));
    }
    values.resize(arity);
    for (std::size_t k = 0; k < arity; ++k) {
      const auto f = fields[k + 1];
      auto res = std::from_chars(f.data(), f.data() + f.size(), values[k]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw ParseError(lineno, "non-numeric value '" + std::string(f) + "'");
    }
    const std::int32_t idx = vocab.index(fields[0]);
    if (idx < 2) continue;
    const auto row = static_cast<std::size_t>(idx);
    if (seen[row]) continue;  // first occurrence wins
    seen[row] = 1;
    std::copy(values.begin(), values.end(), table.data() + row * dim);
  }
  if (stats) {
    stats->found = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
    stats->missing = vocab.size() - 2 - stats->found;
  }
  return table;
}

}  // namespace mpath
