#include "mpath/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mpath/error.hpp"
#include "mpath/graph.hpp"

namespace mpath {

std::optional<std::size_t> RawTable::find(std::string_view column) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) return i;
  return std::nullopt;
}

std::size_t RawTable::column(std::string_view name) const {
  const auto c = find(name);
  if (!c) fail(ErrorKind::schema, "dataset has no column '" + std::string(name) + "'");
  return *c;
}

std::vector<std::string> RawTable::values(std::string_view name) const {
  const auto c = column(name);
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

RawTable parse_delimited(std::string_view text, char delimiter) {
  require(delimiter != '"' && delimiter != '\n' && delimiter != '\r', ErrorKind::config,
          "invalid delimiter");
  RawTable table;
  std::vector<std::string> record;
  std::string cell;
  std::size_t line = 1, record_line = 1;
  bool quoted = false, cell_was_quoted = false, any = false;

  auto end_record = [&] {
    record.push_back(std::move(cell));
    cell.clear();
    cell_was_quoted = false;
    const bool blank = record.size() == 1 && record[0].empty() && !any;
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        if (record.size() != table.header.size())
          throw ParseError(record_line, "expected " + std::to_string(table.header.size()) +
                                            " fields, found " + std::to_string(record.size()));
        table.rows.push_back(std::move(record));
      }
    }
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!cell.empty() || cell_was_quoted)
        throw ParseError(line, "quote inside an unquoted cell");
      quoted = cell_was_quoted = any = true;
    } else if (c == delimiter) {
      record.push_back(std::move(cell));
      cell.clear();
      cell_was_quoted = false;
      any = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_record();
      ++line;
      record_line = line;
    } else {
      if (cell_was_quoted) throw ParseError(line, "text after a closing quote");
      cell.push_back(c);
      any = true;
    }
  }
  if (quoted) throw ParseError(record_line, "unterminated quoted cell");
  if (any || !cell.empty()) end_record();
  require(!table.header.empty(), ErrorKind::format, "dataset has no header row");
  std::set<std::string> seen;
  for (const auto& h : table.header)
    if (!seen.insert(h).second) throw ParseError(1, "duplicate column '" + h + "'");
  return table;
}

RawTable read_delimited(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_delimited(buf.str(), delimiter);
}

namespace {

std::string quote_cell(const std::string& s, char delimiter) {
  if (s.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_delimited(const RawTable& table, char delimiter) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out.push_back(delimiter);
      out += quote_cell(cells[i], delimiter);
    }
    out.push_back('\n');
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

void write_delimited(const std::filesystem::path& path, const RawTable& table,
                     char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << format_delimited(table, delimiter);
  if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

nlohmann::json SchemaDescriptor::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns)
    cols.push_back({{"name", c.name},
                    {"group", to_string(c.group)},
                    {"kind", c.kind == ColumnKind::numeric ? "numeric" : "categorical"}});
  nlohmann::json j = {{"id_column", id_column},
                      {"text_column", text_column},
                      {"label_column", label_column},
                      {"classes", classes},
                      {"tweet_features", tweet_features},
                      {"columns", cols},
                      {"delimiter", std::string(1, delimiter)}};
  if (network)
    j["network"] = {{"edges", network->edges.string()},
                    {"nodes", network->nodes.string()},
                    {"user_column", network->user_column}};
  return j;
}

SchemaDescriptor SchemaDescriptor::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base) {
  SchemaDescriptor d;
  try {
    d.id_column = j.value("id_column", d.id_column);
    d.text_column = j.contains("text_column") && j["text_column"].is_null()
                        ? std::string()
                        : j.value("text_column", d.text_column);
    d.label_column = j.value("label_column", d.label_column);
    d.classes = j.value("classes", d.classes);
    d.tweet_features = j.value("tweet_features", d.tweet_features);
    const auto delim = j.value("delimiter", std::string(","));
    if (delim == "\\t" || delim == "tab")
      d.delimiter = '\t';
    else if (delim.size() == 1)
      d.delimiter = delim[0];
    else
      fail(ErrorKind::config, "delimiter must be a single character");
    for (const auto& jc : j.value("columns", nlohmann::json::array())) {
      ColumnSpec c;
      c.name = jc.at("name").get<std::string>();
      c.group = feature_group_from_string(jc.value("group", std::string("UF")));
      require(c.group != FeatureGroup::WV, ErrorKind::config,
              "column '" + c.name + "' cannot belong to the WV group");
      const auto kind = jc.value("kind", std::string("numeric"));
      require(kind == "numeric" || kind == "categorical", ErrorKind::config,
              "column '" + c.name + "': kind must be numeric or categorical");
      c.kind = kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical;
      d.columns.push_back(c);
    }
    if (j.contains("network") && !j["network"].is_null()) {
      const auto& n = j["network"];
      NetworkSource src;
      auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        std::filesystem::path path(p);
        return path.is_relative() && !base.empty() ? base / path : path;
      };
      src.edges = resolve(n.at("edges").get<std::string>());
      src.nodes = resolve(n.value("nodes", std::string()));
      src.user_column = n.value("user_column", src.user_column);
      d.network = src;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("schema descriptor: ") + e.what());
  }
  require(!d.id_column.empty(), ErrorKind::config, "schema descriptor needs an id column");
  require(!d.tweet_features || !d.text_column.empty(), ErrorKind::config,
          "tweet features need a text column");
  std::set<std::string> names;
  for (const auto& c : d.columns)
    require(names.insert(c.name).second, ErrorKind::config,
            "schema descriptor lists column '" + c.name + "' twice");
  return d;
}

SchemaDescriptor SchemaDescriptor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open schema descriptor " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, "schema descriptor " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::vector<std::string> schema_diff(const std::vector<ColumnSpec>& expected,
                                     const std::vector<ColumnSpec>& actual) {
  std::vector<std::string> out;
  std::map<std::string, const ColumnSpec*> have;
  for (const auto& c : actual) have[c.name] = &c;
  for (const auto& c : expected) {
    const auto it = have.find(c.name);
    if (it == have.end()) {
      out.push_back("missing column '" + c.name + "'");
      continue;
    }
    const auto& a = *it->second;
    if (a.group != c.group)
      out.push_back("column '" + c.name + "': group " + to_string(c.group) + " expected, " +
                    to_string(a.group) + " given");
    if (a.kind != c.kind)
      out.push_back("column '" + c.name + "': kind differs");
    have.erase(it);
  }
  for (const auto& [name, spec] : have) out.push_back("unexpected column '" + name + "'");
  return out;
}

namespace {

bool has_text(const SchemaDescriptor& s) { return !s.text_column.empty(); }

std::vector<std::string> texts_of(const RawTable& t, const SchemaDescriptor& s) {
  return has_text(s) ? t.values(s.text_column) : std::vector<std::string>(t.rows.size());
}

MetadataInput metadata_input(const RawTable& table, const SchemaDescriptor& schema,
                             const std::vector<std::string>& texts) {
  MetadataInput in;
  in.rows = table.rows.size();
  in.texts = texts;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    std::vector<std::string> col;
    col.reserve(table.rows.size());
    for (const auto& r : table.rows) col.push_back(r[c]);
    in.columns.emplace(table.header[c], std::move(col));
  }
  if (schema.network) {
    const auto users = table.values(schema.network->user_column);
    const auto graph = SocialGraph::load(schema.network->edges, schema.network->nodes);
    const NetworkFeatureTable features(graph);
    in.network_schema = network_feature_schema();
    in.network_values.reserve(in.rows * in.network_schema.size());
    for (std::size_t r = 0; r < in.rows; ++r) {
      const auto mentions = extract_mentions(texts[r]);
      const auto row = features.row(users[r], mentions);
      in.network_values.insert(in.network_values.end(), row.begin(), row.end());
    }
  }
  return in;
}

}  // namespace

Encoders fit_encoders(const RawTable& table, const SchemaDescriptor& schema) {
  require(!table.rows.empty(), ErrorKind::contract, "dataset is empty");
  Encoders e;
  e.classes = schema.classes;
  if (e.classes.empty()) {
    const auto labels = table.values(schema.label_column);
    std::set<std::string> distinct(labels.begin(), labels.end());
    e.classes.assign(distinct.begin(), distinct.end());
  }
  require(e.classes.size() >= 2, ErrorKind::config,
          "a classification dataset needs at least two classes");
  const auto texts = texts_of(table, schema);
  if (has_text(schema)) {
    std::vector<TokenList> corpus;
    std::vector<std::size_t> counts;
    corpus.reserve(texts.size());
    for (const auto& t : texts) {
      corpus.push_back(tokenize(t));
      counts.push_back(corpus.back().size());
    }
    e.vocab = Vocabulary::build(corpus);
    e.seq = choose_seq_len(counts);
  }
  e.pipeline = FeaturePipeline::fit(schema.tweet_features, schema.columns,
                                    metadata_input(table, schema, texts));
  return e;
}

EncodedData encode_table(const RawTable& table, const SchemaDescriptor& schema,
                         const Encoders& encoders) {
  require(!table.rows.empty(), ErrorKind::contract, "dataset is empty");
  EncodedData out;
  Dataset& d = out.dataset;
  d.classes = encoders.classes;

  const auto ids = table.values(schema.id_column);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < ids.size(); ++r)
    require(seen.insert(ids[r]).second, ErrorKind::schema,
            "row " + std::to_string(r + 1) + ": duplicate id '" + ids[r] + "'");
  d.ids = ids;

  if (table.find(schema.label_column)) {
    std::map<std::string, int> index;
    for (std::size_t c = 0; c < d.classes.size(); ++c) index[d.classes[c]] = int(c);
    const auto labels = table.values(schema.label_column);
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const auto it = index.find(labels[r]);
      require(it != index.end(), ErrorKind::schema,
              "row " + std::to_string(r + 1) + ": label '" + labels[r] +
                  "' is not a declared class");
      d.labels.push_back(it->second);
    }
  }

  out.texts = texts_of(table, schema);
  if (has_text(schema)) {
    d.has_text = true;
    d.seq_len = encoders.seq.seq_len;
    d.tokens.reserve(ids.size() * d.seq_len);
    for (const auto& t : out.texts) {
      const auto row = encode_pad(tokenize(t), encoders.vocab, encoders.seq);
      d.tokens.insert(d.tokens.end(), row.begin(), row.end());
    }
  }
  auto m = encoders.pipeline.transform(metadata_input(table, schema, out.texts));
  d.schema = std::move(m.schema);
  d.features = std::move(m.values);
  d.validate();
  return out;
}

nlohmann::json encoders_to_json(const Encoders& e) {
  return {{"vocabulary", e.vocab.index_tokens()},
          {"seq_len", e.seq.seq_len},
          {"pipeline", e.pipeline.to_json()},
          {"classes", e.classes}};
}

Encoders encoders_from_json(const nlohmann::json& j) {
  Encoders e;
  try {
    e.vocab = Vocabulary::from_index_tokens(j.at("vocabulary").get<std::vector<std::string>>());
    e.seq.seq_len = j.at("seq_len").get<std::size_t>();
    e.pipeline = FeaturePipeline::from_json(j.at("pipeline"));
    e.classes = j.at("classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorKind::format, std::string("encoder state: ") + ex.what());
  }
  return e;
}

}  // namespace mpath
