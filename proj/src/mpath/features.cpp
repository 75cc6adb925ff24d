#include "mpath/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>

#include "mpath/embedded_data.hpp"
#include "mpath/error.hpp"
#include "mpath/text.hpp"

namespace mpath {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Longest lexicon entries first so ":-)" wins over ":-".
const std::vector<std::string>& emoticons_by_length() {
  static const std::vector<std::string> sorted = [] {
    auto v = emoticon_lexicon();
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.size() > b.size();
    });
    return v;
  }();
  return sorted;
}

std::size_t count_emoticons(std::string_view chunk) {
  std::size_t n = 0, i = 0;
  while (i < chunk.size()) {
    bool matched = false;
    for (const auto& e : emoticons_by_length()) {
      if (chunk.substr(i, e.size()) != e) continue;
      const bool left_ok = i == 0 || !is_alnum(chunk[i - 1]);
      const std::size_t end = i + e.size();
      const bool right_ok = end == chunk.size() || !is_alnum(chunk[end]);
      if (left_ok && right_ok) {
        ++n;
        i = end;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return n;
}

bool is_upper_word(std::string_view chunk) {
  if (chunk.empty() || chunk.front() == '@' || chunk.front() == '#') return false;
  std::size_t b = 0, e = chunk.size();
  auto punct = [](unsigned char c) { return std::ispunct(c) != 0; };
  while (b < e && punct(chunk[b])) ++b;
  while (e > b && punct(chunk[e - 1])) --e;
  if (e - b < 2) return false;
  for (std::size_t i = b; i < e; ++i)
    if (chunk[i] < 'A' || chunk[i] > 'Z') return false;
  return true;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

}  // namespace

const std::vector<std::string>& emoticon_lexicon() {
  static const std::vector<std::string> lexicon = [] {
    std::vector<std::string> out;
    std::string_view all(embedded::kEmoticons);
    std::size_t i = 0;
    while (i <= all.size()) {
      std::size_t j = all.find('\n', i);
      if (j == std::string_view::npos) j = all.size();
      auto line = all.substr(i, j - i);
      while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
        line.remove_suffix(1);
      if (!line.empty() && !line.starts_with("# ")) out.emplace_back(line);
      i = j + 1;
    }
    return out;
  }();
  return lexicon;
}

TweetCounts count_tweet_tokens(std::string_view text) {
  TweetCounts c;
  for (const auto& tok : tokenize(text)) {
    if (tok == "<hashtag>") ++c.hashtags;
    else if (tok == "<user>") ++c.mentions;
    else if (tok == "<url>") ++c.urls;
  }
  for (auto chunk : split_ws(text)) {
    if (is_url(chunk)) continue;
    c.emoticons += count_emoticons(chunk);
    if (is_upper_word(chunk)) ++c.uppercase_words;
  }
  return c;
}

FeatureSchema tweet_feature_schema() {
  FeatureSchema s;
  for (const char* n : {"tf.hashtags", "tf.mentions", "tf.emoticons",
                        "tf.uppercase_words", "tf.urls"})
    s.push_back({n, FeatureGroup::TF});
  for (auto a : kAffectColumns)
    s.push_back({"tf." + std::string(a), FeatureGroup::TF});
  s.push_back({"tf.affect_present", FeatureGroup::TF});
  return s;
}

FeatureVector tweet_features(std::string_view text, const AffectScores& affect) {
  FeatureVector fv;
  fv.schema = tweet_feature_schema();
  const auto c = count_tweet_tokens(text);
  fv.values = {double(c.hashtags), double(c.mentions), double(c.emoticons),
               double(c.uppercase_words), double(c.urls)};
  bool any = false;
  for (std::size_t k = 0; k < kAffectColumns.size(); ++k) {
    const bool ok = affect.present[k] && std::isfinite(affect.values[k]);
    fv.values.push_back(ok ? affect.values[k] : 0.0);
    any = any || ok;
  }
  fv.values.push_back(any ? 1.0 : 0.0);
  return fv;
}

double parse_numeric_cell(std::string_view cell) {
  while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front())))
    cell.remove_prefix(1);
  while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back())))
    cell.remove_suffix(1);
  const std::string l = lowercase(cell);
  if (l.empty() || l == "na" || l == "nan" || l == "null" || l == "none")
    return kMissing;
  if (l == "true") return 1.0;
  if (l == "false") return 0.0;
  double v = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    fail(ErrorKind::parse, "non-numeric value '" + std::string(cell) + "'");
  return v;
}

CategoricalEncoder CategoricalEncoder::fit(const std::vector<std::string>& values) {
  std::map<std::string, std::size_t> freq;
  for (const auto& v : values) ++freq[v];
  CategoricalEncoder enc;
  enc.one_hot_ = freq.size() <= kMaxOneHot;
  for (const auto& [v, n] : freq) enc.categories_.push_back(v);
  if (!enc.one_hot_) {
    std::stable_sort(enc.categories_.begin(), enc.categories_.end(),
                     [&](const auto& a, const auto& b) {
                       return freq.at(a) > freq.at(b);
                     });
  }
  enc.index();
  return enc;
}

void CategoricalEncoder::index() {
  lookup_.clear();
  for (std::size_t i = 0; i < categories_.size(); ++i)
    lookup_.emplace(categories_[i], i);
}

std::vector<std::string> CategoricalEncoder::column_names(
    const std::string& base) const {
  if (!one_hot_) return {base + ".rank"};
  std::vector<std::string> out;
  for (const auto& c : categories_) out.push_back(base + "=" + c);
  return out;
}

void CategoricalEncoder::encode(std::string_view value, double* out) const {
  auto it = lookup_.find(std::string(value));
  if (one_hot_) {
    std::fill(out, out + categories_.size(), 0.0);
    if (it != lookup_.end()) out[it->second] = 1.0;
  } else {
    out[0] = static_cast<double>(it == lookup_.end() ? categories_.size()
                                                     : it->second);
  }
}

nlohmann::json CategoricalEncoder::to_json() const {
  return {{"one_hot", one_hot_}, {"categories", categories_}};
}

CategoricalEncoder CategoricalEncoder::from_json(const nlohmann::json& j) {
  CategoricalEncoder enc;
  enc.one_hot_ = j.at("one_hot").get<bool>();
  enc.categories_ = j.at("categories").get<std::vector<std::string>>();
  enc.index();
  return enc;
}

EncodedColumns encode_categorical(const std::vector<std::string>& column,
                                  const std::string& name) {
  const auto enc = CategoricalEncoder::fit(column);
  EncodedColumns out;
  out.names = enc.column_names(name);
  out.values.resize(column.size() * enc.width());
  for (std::size_t r = 0; r < column.size(); ++r)
    enc.encode(column[r], out.values.data() + r * enc.width());
  return out;
}

FeatureGroupMask::FeatureGroupMask(std::initializer_list<FeatureGroup> groups) {
  for (auto g : groups) bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(g));
}

FeatureGroupMask FeatureGroupMask::parse(std::string_view text) {
  FeatureGroupMask m;
  if (lowercase(text) == "all")
    return FeatureGroupMask{FeatureGroup::WV, FeatureGroup::TF, FeatureGroup::UF,
                            FeatureGroup::NF};
  std::size_t i = 0;
  while (i <= text.size()) {
    std::size_t j = text.find_first_of("+,", i);
    if (j == std::string_view::npos) j = text.size();
    auto part = text.substr(i, j - i);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    if (!part.empty()) {
      const auto g = feature_group_from_string(part);
      m.bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(g));
    }
    i = j + 1;
  }
  require(!m.empty(), ErrorKind::config,
          "feature group mask '" + std::string(text) + "' is empty");
  return m;
}

std::vector<FeatureGroupMask> FeatureGroupMask::importance_table() {
  using G = FeatureGroup;
  return {
      FeatureGroupMask{G::NF},
      FeatureGroupMask{G::TF},
      FeatureGroupMask{G::UF},
      FeatureGroupMask{G::UF, G::TF},
      FeatureGroupMask{G::NF, G::TF},
      FeatureGroupMask{G::WV},
      FeatureGroupMask{G::UF, G::NF},
      FeatureGroupMask{G::TF, G::UF, G::NF},
      FeatureGroupMask{G::WV, G::TF},
      FeatureGroupMask{G::WV, G::NF},
      FeatureGroupMask{G::WV, G::UF, G::TF},
      FeatureGroupMask{G::WV, G::NF, G::TF},
      FeatureGroupMask{G::WV, G::UF},
      FeatureGroupMask{G::WV, G::UF, G::NF},
      FeatureGroupMask{G::WV, G::TF, G::UF, G::NF},
  };
}

std::string FeatureGroupMask::to_string() const {
  std::string out;
  for (auto g : {FeatureGroup::WV, FeatureGroup::TF, FeatureGroup::UF,
                 FeatureGroup::NF}) {
    if (!has(g)) continue;
    if (!out.empty()) out += '+';
    out += mpath::to_string(g);
  }
  return out;
}

FeatureGroupMask available_groups(const Dataset& data) {
  FeatureGroupMask m;
  if (data.has_text) m = FeatureGroupMask{FeatureGroup::WV};
  for (const auto& c : data.schema) m = m.with(c.group);
  return m;
}

Dataset assemble(const Dataset& data, const FeatureGroupMask& mask) {
  require(!mask.empty(), ErrorKind::config, "empty feature group mask");
  if (mask.has(FeatureGroup::WV))
    require(data.has_text, ErrorKind::config,
            "mask requests WV but the dataset has no text input");
  for (auto g : {FeatureGroup::TF, FeatureGroup::UF, FeatureGroup::NF}) {
    if (!mask.has(g)) continue;
    const bool any = std::any_of(data.schema.begin(), data.schema.end(),
                                 [g](const auto& c) { return c.group == g; });
    require(any, ErrorKind::config,
            std::string("mask requests ") + to_string(g) +
                " but the dataset has no columns in that group");
  }

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < data.schema.size(); ++j)
    if (mask.has(data.schema[j].group)) keep.push_back(j);

  Dataset out;
  out.classes = data.classes;
  out.ids = data.ids;
  out.labels = data.labels;
  out.has_text = mask.has(FeatureGroup::WV);
  if (out.has_text) {
    out.seq_len = data.seq_len;
    out.tokens = data.tokens;
  }
  for (auto j : keep) out.schema.push_back(data.schema[j]);
  const std::size_t f = data.feature_dim();
  out.features.reserve(data.size() * keep.size());
  for (std::size_t r = 0; r < data.size(); ++r)
    for (auto j : keep) out.features.push_back(data.features[r * f + j]);
  return out;
}

std::vector<double> FeaturePipeline::raw_matrix(const MetadataInput& in) const {
  const std::size_t n = in.rows, width = schema_.size();
  std::vector<double> m(n * width, kMissing);
  std::size_t col = 0;

  if (tweet_features_) {
    require(in.texts.size() == n, ErrorKind::schema,
            "tweet features need a text column");
    std::array<const std::vector<std::string>*, kAffectColumns.size()> affect{};
    for (std::size_t k = 0; k < kAffectColumns.size(); ++k) {
      auto it = in.columns.find(std::string(kAffectColumns[k]));
      if (it != in.columns.end()) affect[k] = &it->second;
    }
    for (std::size_t r = 0; r < n; ++r) {
      AffectScores a;
      for (std::size_t k = 0; k < affect.size(); ++k) {
        if (!affect[k]) continue;
        require(affect[k]->size() == n, ErrorKind::schema,
                "column '" + std::string(kAffectColumns[k]) + "' has the wrong row count");
        const double v = parse_numeric_cell((*affect[k])[r]);
        a.present[k] = std::isfinite(v);
        a.values[k] = v;
      }
      const auto fv = mpath::tweet_features(in.texts[r], a);
      std::copy(fv.values.begin(), fv.values.end(), m.begin() + r * width);
    }
    col += tweet_feature_schema().size();
  }

  std::vector<double> buf;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& spec = columns_[c];
    auto it = in.columns.find(spec.name);
    require(it != in.columns.end(), ErrorKind::schema,
            "missing column '" + spec.name + "'");
    const auto& cells = it->second;
    require(cells.size() == n, ErrorKind::schema,
            "column '" + spec.name + "' has " + std::to_string(cells.size()) +
                " rows, expected " + std::to_string(n));
    if (spec.kind == ColumnKind::numeric) {
      for (std::size_t r = 0; r < n; ++r) {
        try {
          m[r * width + col] = parse_numeric_cell(cells[r]);
        } catch (const Error& e) {
          fail(ErrorKind::parse, "column '" + spec.name + "', row " +
                                     std::to_string(r + 1) + ": " + e.what());
        }
      }
      col += 1;
    } else {
      const auto& enc = encoders_[c];
      buf.resize(enc.width());
      for (std::size_t r = 0; r < n; ++r) {
        enc.encode(cells[r], buf.data());
        std::copy(buf.begin(), buf.end(), m.begin() + r * width + col);
      }
      col += enc.width();
    }
  }

  if (!network_schema_.empty()) {
    require(in.network_schema == network_schema_, ErrorKind::schema,
            "network feature columns differ from the fitted pipeline");
    const std::size_t k = network_schema_.size();
    require(in.network_values.size() == n * k, ErrorKind::schema,
            "network feature matrix has the wrong number of values");
    for (std::size_t r = 0; r < n; ++r)
      std::copy(in.network_values.begin() + r * k,
                in.network_values.begin() + (r + 1) * k,
                m.begin() + r * width + col);
    col += k;
  }
  return m;
}

FeaturePipeline FeaturePipeline::fit(bool tweet_features,
                                     const std::vector<ColumnSpec>& columns,
                                     const MetadataInput& input) {
  FeaturePipeline p;
  p.tweet_features_ = tweet_features;
  p.columns_ = columns;
  if (tweet_features) p.schema_ = tweet_feature_schema();
  for (const auto& spec : columns) {
    auto it = input.columns.find(spec.name);
    require(it != input.columns.end(), ErrorKind::schema,
            "missing column '" + spec.name + "'");
    if (spec.kind == ColumnKind::numeric) {
      p.encoders_.emplace_back();
      p.schema_.push_back({spec.name, spec.group});
    } else {
      auto enc = CategoricalEncoder::fit(it->second);
      for (auto& name : enc.column_names(spec.name))
        p.schema_.push_back({std::move(name), spec.group});
      p.encoders_.push_back(std::move(enc));
    }
  }
  p.network_schema_ = input.network_schema;
  for (const auto& c : p.network_schema_) p.schema_.push_back(c);

  const auto raw = p.raw_matrix(input);
  const std::size_t width = p.schema_.size();
  p.means_.assign(width, 0.0);
  std::vector<std::size_t> count(width, 0);
  for (std::size_t r = 0; r < input.rows; ++r)
    for (std::size_t j = 0; j < width; ++j) {
      const double v = raw[r * width + j];
      if (std::isfinite(v)) {
        p.means_[j] += v;
        ++count[j];
      }
    }
  for (std::size_t j = 0; j < width; ++j)
    p.means_[j] = count[j] ? p.means_[j] / static_cast<double>(count[j]) : 0.0;
  return p;
}

FeatureMatrix FeaturePipeline::transform(const MetadataInput& input) const {
  const auto raw = raw_matrix(input);
  const std::size_t width = schema_.size();
  FeatureMatrix out;
  out.schema = schema_;
  out.values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::isfinite(raw[i]) ? raw[i] : means_[i % width];
    out.values[i] = static_cast<float>(v);
  }
  return out;
}

nlohmann::json FeaturePipeline::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    nlohmann::json jc = {{"name", columns_[c].name},
                         {"group", to_string(columns_[c].group)},
                         {"kind", columns_[c].kind == ColumnKind::numeric
                                      ? "numeric"
                                      : "categorical"}};
    if (columns_[c].kind == ColumnKind::categorical)
      jc["encoder"] = encoders_[c].to_json();
    cols.push_back(std::move(jc));
  }
  nlohmann::json net = nlohmann::json::array();
  for (const auto& c : network_schema_)
    net.push_back({{"name", c.name}, {"group", to_string(c.group)}});
  return {{"tweet_features", tweet_features_},
          {"columns", cols},
          {"network", net},
          {"means", means_}};
}

FeaturePipeline FeaturePipeline::from_json(const nlohmann::json& j) {
  FeaturePipeline p;
  p.tweet_features_ = j.at("tweet_features").get<bool>();
  if (p.tweet_features_) p.schema_ = tweet_feature_schema();
  for (const auto& jc : j.at("columns")) {
    ColumnSpec spec;
    spec.name = jc.at("name").get<std::string>();
    spec.group = feature_group_from_string(jc.at("group").get<std::string>());
    const auto kind = jc.at("kind").get<std::string>();
    spec.kind = kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical;
    if (spec.kind == ColumnKind::numeric) {
      p.encoders_.emplace_back();
      p.schema_.push_back({spec.name, spec.group});
    } else {
      auto enc = CategoricalEncoder::from_json(jc.at("encoder"));
      for (auto& name : enc.column_names(spec.name))
        p.schema_.push_back({std::move(name), spec.group});
      p.encoders_.push_back(std::move(enc));
    }
    p.columns_.push_back(std::move(spec));
  }
  for (const auto& jn : j.at("network")) {
    FeatureColumn c{jn.at("name").get<std::string>(),
                    feature_group_from_string(jn.at("group").get<std::string>())};
    p.network_schema_.push_back(c);
    p.schema_.push_back(c);
  }
  p.means_ = j.at("means").get<std::vector<double>>();
  require(p.means_.size() == p.schema_.size(), ErrorKind::format,
          "feature pipeline imputation table does not match its schema");
  return p;
}

}  // namespace mpath
