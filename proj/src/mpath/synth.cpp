#include "mpath/synth.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <sstream>

#include "mpath/error.hpp"

namespace mpath {

namespace {

constexpr std::array<const char*, 32> kFiller = {
    "today", "people", "really", "time",   "great",  "game",  "new",    "love",
    "night", "think",  "watch",  "follow", "city",   "music", "work",   "happy",
    "week",  "news",   "friend", "team",   "school", "video", "coffee", "home",
    "party", "photo",  "story",  "world",  "movie",  "phone", "summer", "class"};

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(9);
  out << v;
  return out.str();
}

void check(const SynthOptions& o) {
  require(o.samples >= 2, ErrorKind::config, "a synthetic set needs at least two samples");
  require(o.noise >= 0.0 && o.noise <= 0.5, ErrorKind::config,
          "label noise must lie in [0, 0.5]");
}

const std::vector<std::string> kClasses = {"normal", "abusive"};

}  // namespace

SyntheticSet make_xor_fusion(const SynthOptions& o) {
  check(o);
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> words(3, 6), filler(0, kFiller.size() - 1);

  SyntheticSet s;
  s.table.header = {"id", "text", "label", "signal", "aux1", "aux2"};
  for (std::size_t i = 0; i < o.samples; ++i) {
    // alternate the two cells of each input so both stay exactly balanced
    const bool trigger = (i % 2) == 1;
    const bool high = (i / 2) % 2 == 1;
    const double signal = high ? kXorThreshold + (1.0 - kXorThreshold) * unit(rng)
                               : kXorThreshold * unit(rng);
    std::vector<std::string> post;
    for (std::size_t k = words(rng); k > 0; --k) post.emplace_back(kFiller[filler(rng)]);
    if (trigger) {
      std::uniform_int_distribution<std::size_t> at(0, post.size());
      post.insert(post.begin() + std::ptrdiff_t(at(rng)), kXorTrigger);
    }
    std::string text;
    for (const auto& w : post) text += (text.empty() ? "" : " ") + w;
    bool label = trigger != high;
    if (unit(rng) < o.noise) label = !label;
    s.table.rows.push_back({"x" + std::to_string(i), text, kClasses[label ? 1 : 0],
                            format_number(signal), format_number(normal(rng)),
                            format_number(normal(rng))});
  }
  std::shuffle(s.table.rows.begin(), s.table.rows.end(), rng);

  s.schema.classes = kClasses;
  s.schema.columns = {{"signal", FeatureGroup::UF, ColumnKind::numeric},
                      {"aux1", FeatureGroup::UF, ColumnKind::numeric},
                      {"aux2", FeatureGroup::TF, ColumnKind::numeric}};
  return s;
}

SyntheticSet make_independent_groups(const SynthOptions& o) {
  check(o);
  constexpr double kShift = 1.0;
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticSet s;
  s.table.header = {"id",        "label",    "tf_signal", "tf_noise",
                    "uf_signal", "uf_noise", "nf_signal", "nf_noise"};
  for (std::size_t i = 0; i < o.samples; ++i) {
    const bool y = i % 2 == 1;
    const double shift = y ? kShift : 0.0;
    std::vector<std::string> row{"g" + std::to_string(i), ""};
    for (int g = 0; g < 3; ++g) {
      row.push_back(format_number(shift + normal(rng)));
      row.push_back(format_number(normal(rng)));
    }
    bool label = y;
    if (unit(rng) < o.noise) label = !label;
    row[1] = kClasses[label ? 1 : 0];
    s.table.rows.push_back(std::move(row));
  }
  std::shuffle(s.table.rows.begin(), s.table.rows.end(), rng);

  s.schema.text_column.clear();
  s.schema.classes = kClasses;
  s.schema.columns = {{"tf_signal", FeatureGroup::TF, ColumnKind::numeric},
                      {"tf_noise", FeatureGroup::TF, ColumnKind::numeric},
                      {"uf_signal", FeatureGroup::UF, ColumnKind::numeric},
                      {"uf_noise", FeatureGroup::UF, ColumnKind::numeric},
                      {"nf_signal", FeatureGroup::NF, ColumnKind::numeric},
                      {"nf_noise", FeatureGroup::NF, ColumnKind::numeric}};
  return s;
}

}  // namespace mpath
