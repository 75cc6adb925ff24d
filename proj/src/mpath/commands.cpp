#include "mpath/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "mpath/baseline.hpp"
#include "mpath/error.hpp"
#include "mpath/graph.hpp"
#include "mpath/ingest.hpp"
#include "mpath/model.hpp"
#include "mpath/synth.hpp"
#include "mpath/training.hpp"

namespace mpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& defaults(std::string_view command) {
  static const std::map<std::string_view, json> table = [] {
    const json data = {{"dataset", ""}, {"schema", ""}};
    const json model = {{"embeddings", ""},
                        {"embedding_dim", 200},
                        {"dense_widths", {512, 245, 128, 64, 32}},
                        {"recurrent_dropout", 0.5},
                        {"strategy", "naive"},
                        {"batch_size", 512},
                        {"max_epochs", 100},
                        {"patience", 10},
                        {"learning_rate", 1e-3},
                        {"validation_fraction", 0.1},
                        {"folds", 10},
                        {"workers", 1},
                        {"seed", 0},
                        {"out", ""}};
    std::map<std::string_view, json> t;
    json train = data;
    train.update(model);
    train["mask"] = "available";
    t["train"] = train;
    json ablate = data;
    ablate.update(model);
    ablate["masks"] = json::array();
    t["ablate"] = ablate;
    t["evaluate"] = {{"checkpoint", ""}, {"dataset", ""}, {"schema", ""},
                     {"batch_size", 512}, {"out", ""}};
    t["baseline"] = {{"dataset", ""}, {"schema", ""}, {"folds", 10}, {"max_terms", 10000},
                     {"alpha", 1.0}, {"seed", 0}, {"out", ""}};
    t["synth"] = {{"kind", "xor"}, {"samples", 5000}, {"noise", 0.0}, {"seed", 0}, {"out", ""}};
    t["network"] = {{"edges", ""}, {"nodes", ""}, {"out", ""}};
    return t;
  }();
  const auto it = table.find(command);
  if (it == table.end()) fail(ErrorKind::config, "unknown command '" + std::string(command) + "'");
  return it->second;
}

void require_path(const json& o, const char* key) {
  require(!o.at(key).get<std::string>().empty(), ErrorKind::config,
          std::string("option '") + key + "' is required");
}

template <typename T>
T get(const json& o, const char* key) {
  try {
    return o.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::config, std::string("option '") + key + "' has the wrong type");
  }
}

std::string text(const json& o, const char* key) { return get<std::string>(o, key); }

SchemaDescriptor descriptor_for(const json& o) {
  const auto path = text(o, "schema");
  return path.empty() ? SchemaDescriptor{} : SchemaDescriptor::load(path);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path output_dir(const json& o) {
  const fs::path out = text(o, "out");
  if (!out.empty()) fs::create_directories(out);
  return out;
}

TrainingConfig training_config(const json& o) {
  TrainingConfig t;
  t.strategy = strategy_from_string(text(o, "strategy"));
  t.batch_size = get<std::size_t>(o, "batch_size");
  t.max_epochs = get<std::size_t>(o, "max_epochs");
  t.patience = get<std::size_t>(o, "patience");
  t.adam.lr = get<double>(o, "learning_rate");
  t.validation_fraction = get<double>(o, "validation_fraction");
  t.seed = get<std::uint64_t>(o, "seed");
  t.validate();
  return t;
}

ModelConfig base_config(const json& o, const Encoders& enc) {
  ModelConfig m;
  m.classes = enc.classes;
  m.vocab_size = enc.vocab.size();
  m.embedding_dim = get<std::size_t>(o, "embedding_dim");
  m.dense_widths = get<std::vector<std::size_t>>(o, "dense_widths");
  m.recurrent_dropout = get<double>(o, "recurrent_dropout");
  m.seed = get<std::uint64_t>(o, "seed");
  return m;
}

std::optional<Tensor<float>> embeddings_for(const json& o, const Encoders& enc,
                                            json* info) {
  const auto path = text(o, "embeddings");
  if (path.empty()) return std::nullopt;
  EmbeddingLoadStats stats;
  auto table = load_embeddings(path, enc.vocab, get<std::size_t>(o, "embedding_dim"),
                               get<std::uint64_t>(o, "seed"), &stats);
  if (info) *info = {{"found", stats.found}, {"missing", stats.missing}};
  return table;
}

json dataset_summary(const Dataset& d, const Encoders& enc) {
  json j = {{"rows", d.size()},
            {"classes", d.classes},
            {"has_text", d.has_text},
            {"seq_len", d.seq_len},
            {"vocabulary_size", enc.vocab.size()},
            {"feature_dim", d.feature_dim()}};
  if (d.labeled()) j["class_counts"] = d.class_counts();
  return j;
}

json parameter_summary(const ParameterStore<float>& store) {
  std::size_t all = 0, embeddings = 0, trainable = 0;
  for (const auto& p : store.all()) {
    if (p.buffer) continue;
    all += p.var.value().size();
    if (p.trainable) trainable += p.var.value().size();
    if (p.name == "text.embedding.table") embeddings += p.var.value().size();
  }
  return {{"total", all}, {"excluding_embeddings", all - embeddings}, {"trainable", trainable}};
}

struct Loaded {
  SchemaDescriptor schema;
  RawTable table;
  Encoders encoders;
  EncodedData data;
};

Loaded load_training_data(const json& o) {
  require_path(o, "dataset");
  Loaded l;
  l.schema = descriptor_for(o);
  l.table = read_delimited(text(o, "dataset"), l.schema.delimiter);
  l.encoders = fit_encoders(l.table, l.schema);
  l.data = encode_table(l.table, l.schema, l.encoders);
  require(l.data.dataset.labeled(), ErrorKind::schema,
          "dataset has no column '" + l.schema.label_column + "'; training needs labels");
  return l;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// "available" selects every group the dataset provides.
FeatureGroupMask mask_for(const std::string& spec, const Dataset& data) {
  if (spec == "available") return available_groups(data);
  return FeatureGroupMask::parse(spec);
}

json cmd_train(const json& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto out = output_dir(o);
  const auto l = load_training_data(o);
  const auto mask = mask_for(text(o, "mask"), l.data.dataset);
  const Dataset data = assemble(l.data.dataset, mask);
  const auto training = training_config(o);
  const auto base = base_config(o, l.encoders);
  json emb_info;
  const auto embeddings = data.has_text ? embeddings_for(o, l.encoders, &emb_info) : std::nullopt;

  json report = {{"command", "train"}, {"options", o}, {"mask", mask.to_string()},
                 {"dataset", dataset_summary(data, l.encoders)}};
  if (!emb_info.is_null()) report["embeddings"] = emb_info;

  const auto folds = get<std::size_t>(o, "folds");
  if (folds >= 2) {
    CvOptions cv;
    cv.folds = folds;
    cv.workers = get<std::size_t>(o, "workers");
    report["cv"] = run_cv(data, base, embeddings, training, cv).to_json();
  } else {
    report["cv"] = nullptr;
  }

  std::vector<TrainingStage> stages;
  const auto model = train_model<float>(base, embeddings, data, training, &stages);
  const auto& val_rows = stages.back().history.validation_rows;
  const Dataset val = data.subset(val_rows);
  const auto val_metrics =
      evaluate_predictions(model.predict(val, training.batch_size), val.labels, data.classes.size());

  json histories = json::array();
  for (const auto& s : stages) {
    auto h = s.history.to_json();
    h["stage"] = s.name;
    histories.push_back(h);
  }
  json validation = val_metrics.to_json();
  validation["ids"] = val.ids;
  report["model"] = model.config().to_json();
  report["training"] = training.to_json();
  report["histories"] = histories;
  report["validation"] = validation;
  report["parameters"] = parameter_summary(model.params());

  if (!out.empty()) {
    const json extra = {{"encoders", encoders_to_json(l.encoders)},
                        {"schema", l.schema.to_json()},
                        {"mask", mask.to_string()},
                        {"training", training.to_json()}};
    save_checkpoint(out / "model.ckpt", model, extra);
    report["checkpoint"] = (out / "model.ckpt").string();
  }
  report["timing"] = {{"seconds", seconds_since(start)}};
  if (!out.empty()) write_json(out / "report.json", report);
  return report;
}

json cmd_evaluate(const json& o) {
  const auto start = std::chrono::steady_clock::now();
  require_path(o, "checkpoint");
  require_path(o, "dataset");
  const auto out = output_dir(o);
  auto loaded = load_checkpoint(text(o, "checkpoint"));
  const auto& extra = loaded.extra;
  require(extra.contains("encoders") && extra.contains("schema") && extra.contains("mask"),
          ErrorKind::format, "checkpoint lacks the dataset encoders; was it written by train?");
  const auto encoders = encoders_from_json(extra["encoders"]);
  auto schema = SchemaDescriptor::from_json(extra["schema"]);
  if (!text(o, "schema").empty()) {
    const auto given = SchemaDescriptor::load(text(o, "schema"));
    const auto diff = schema_diff(schema.columns, given.columns);
    if (!diff.empty()) {
      std::string msg = "schema does not match the checkpoint:";
      for (const auto& d : diff) msg += "\n  " + d;
      fail(ErrorKind::schema, msg);
    }
    schema = given;
  }
  const auto table = read_delimited(text(o, "dataset"), schema.delimiter);
  const auto mask = FeatureGroupMask::parse(extra["mask"].get<std::string>());
  const Dataset data = assemble(encode_table(table, schema, encoders).dataset, mask);

  const auto& model = loaded.model;
  const auto& expect = model.config().schema;
  if (data.schema != expect) {
    std::string msg = "encoded features do not match the checkpoint:";
    std::vector<ColumnSpec> a, b;
    for (const auto& c : expect) a.push_back({c.name, c.group, ColumnKind::numeric});
    for (const auto& c : data.schema) b.push_back({c.name, c.group, ColumnKind::numeric});
    for (const auto& d : schema_diff(a, b)) msg += "\n  " + d;
    fail(ErrorKind::schema, msg);
  }

  const auto probs = model.predict(data, get<std::size_t>(o, "batch_size"));
  const std::size_t c = data.classes.size();
  json report = {{"command", "evaluate"}, {"options", o}, {"rows", data.size()}};
  if (data.labeled()) {
    report["mode"] = "metrics";
    report["metrics"] = evaluate_predictions(probs, data.labels, c).to_json();
  } else {
    report["mode"] = "scores";
    json rows = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto first = probs.begin() + std::ptrdiff_t(i * c);
      const auto best = std::max_element(first, first + std::ptrdiff_t(c)) - first;
      rows.push_back({{"id", data.ids[i]},
                      {"label", data.classes[std::size_t(best)]},
                      {"probabilities", std::vector<double>(first, first + std::ptrdiff_t(c))}});
    }
    report["predictions"] = rows;
  }
  report["timing"] = {{"seconds", seconds_since(start)}};
  if (!out.empty()) write_json(out / "report.json", report);
  return report;
}

json cmd_ablate(const json& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto out = output_dir(o);
  const auto l = load_training_data(o);
  std::vector<FeatureGroupMask> masks;
  for (const auto& m : get<std::vector<std::string>>(o, "masks"))
    masks.push_back(FeatureGroupMask::parse(m));
  if (masks.empty()) {
    const auto present = available_groups(l.data.dataset);
    for (const auto& m : FeatureGroupMask::importance_table())
      if (present.covers(m)) masks.push_back(m);
  }
  const auto training = training_config(o);
  const auto base = base_config(o, l.encoders);
  const auto embeddings = l.data.dataset.has_text ? embeddings_for(o, l.encoders, nullptr)
                                                  : std::nullopt;
  CvOptions cv;
  cv.folds = get<std::size_t>(o, "folds");
  cv.workers = get<std::size_t>(o, "workers");
  auto rows = run_ablation(l.data.dataset, masks, base, embeddings, training, cv);
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    return a.report.mean.auc < b.report.mean.auc;
  });
  json table = json::array();
  for (const auto& r : rows) {
    auto j = r.report.mean.to_json();
    j["mask"] = r.mask.to_string();
    j["cv"] = r.report.to_json();
    table.push_back(j);
  }
  json report = {{"command", "ablate"},
                 {"options", o},
                 {"training", training.to_json()},
                 {"dataset", dataset_summary(l.data.dataset, l.encoders)},
                 {"rows", table},
                 {"timing", {{"seconds", seconds_since(start)}}}};
  if (!out.empty()) write_json(out / "report.json", report);
  return report;
}

json cmd_baseline(const json& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto out = output_dir(o);
  require_path(o, "dataset");
  const auto schema = descriptor_for(o);
  require(!schema.text_column.empty(), ErrorKind::config, "the baseline needs a text column");
  const auto table = read_delimited(text(o, "dataset"), schema.delimiter);
  SchemaDescriptor text_only = schema;
  text_only.columns.clear();
  text_only.tweet_features = false;
  text_only.network.reset();
  const auto enc = fit_encoders(table, text_only);
  const auto data = encode_table(table, text_only, enc);
  require(data.dataset.labeled(), ErrorKind::schema,
          "dataset has no column '" + schema.label_column + "'; the baseline needs labels");
  BaselineOptions b;
  b.folds = get<std::size_t>(o, "folds");
  b.max_terms = get<std::size_t>(o, "max_terms");
  b.alpha = get<double>(o, "alpha");
  b.seed = get<std::uint64_t>(o, "seed");
  const auto cv = run_baseline_cv(data.texts, data.dataset.labels, enc.classes.size(), b);
  json report = {{"command", "baseline"},
                 {"model", "naive-bayes-tfidf"},
                 {"options", o},
                 {"classes", enc.classes},
                 {"cv", cv.to_json()},
                 {"timing", {{"seconds", seconds_since(start)}}}};
  if (!out.empty()) write_json(out / "report.json", report);
  return report;
}

json cmd_synth(const json& o) {
  const auto out = output_dir(o);
  require(!out.empty(), ErrorKind::config, "option 'out' is required");
  SynthOptions s;
  s.samples = get<std::size_t>(o, "samples");
  s.noise = get<double>(o, "noise");
  s.seed = get<std::uint64_t>(o, "seed");
  const auto kind = text(o, "kind");
  SyntheticSet set;
  if (kind == "xor")
    set = make_xor_fusion(s);
  else if (kind == "groups")
    set = make_independent_groups(s);
  else
    fail(ErrorKind::config, "unknown synthetic kind '" + kind + "' (expected xor or groups)");
  write_delimited(out / "data.csv", set.table, set.schema.delimiter);
  write_json(out / "schema.json", set.schema.to_json());
  return {{"command", "synth"},
          {"options", o},
          {"rows", set.table.rows.size()},
          {"dataset", (out / "data.csv").string()},
          {"schema", (out / "schema.json").string()}};
}

json cmd_network(const json& o) {
  require_path(o, "edges");
  const auto out = output_dir(o);
  const auto g = SocialGraph::load(text(o, "edges"), text(o, "nodes"));
  const NetworkFeatureTable features(g);
  const auto names = network_feature_schema();
  json nodes = json::array();
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto row = features.row(g.id(v), {});
    json m = json::object();
    for (std::size_t k = 0; k < names.size(); ++k)
      m[names[k].name] = std::isfinite(row[k]) ? json(row[k]) : json(nullptr);
    nodes.push_back({{"id", g.id(v)}, {"metrics", m}});
  }
  json report = {{"command", "network"},
                 {"options", o},
                 {"nodes", nodes},
                 {"edges", g.edge_count()},
                 {"eigenvector_available", features.eigenvector_available()}};
  if (!out.empty()) write_json(out / "report.json", report);
  return report;
}

}  // namespace

const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names = {"train",    "evaluate", "ablate",
                                                      "baseline", "synth",    "network"};
  return names;
}

json effective_options(std::string_view command, const json& options) {
  json o = defaults(command);
  require(options.is_object() || options.is_null(), ErrorKind::config,
          "options must be a JSON object");
  if (options.is_object())
    for (const auto& [key, value] : options.items()) {
      require(o.contains(key), ErrorKind::config,
              "unknown option '" + key + "' for " + std::string(command));
      o[key] = value;
    }
  return o;
}

json run_command(std::string_view command, const json& options) {
  const json o = effective_options(command, options);
  if (command == "train") return cmd_train(o);
  if (command == "evaluate") return cmd_evaluate(o);
  if (command == "ablate") return cmd_ablate(o);
  if (command == "baseline") return cmd_baseline(o);
  if (command == "synth") return cmd_synth(o);
  return cmd_network(o);
}

}  // namespace mpath
