// Command-line front end over the libmpath C interface.

#include <stdexcept>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpath/mpath.h"

namespace {

using nlohmann::json;

enum class Kind { text, count, real, list };

// A flag that is forwarded as an option key only when given.
struct Flag {
  std::string key;
  Kind kind;
  std::string help;
  std::string value;
  std::vector<std::string> values;
  CLI::Option* option = nullptr;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<Flag> flags;
  std::string options_file;
  bool quiet = false;
};

const std::map<std::string, std::string>& help_texts() {
  static const std::map<std::string, std::string> h{
      {"dataset", "delimited data file"},
      {"schema", "schema descriptor JSON (default: id, text and label columns only)"},
      {"embeddings", "pretrained word vectors, one \"token v1 v2 ...\" per line"},
      {"embedding_dim", "word vector width"},
      {"dense_widths", "metadata hidden layer width (repeat per layer)"},
      {"recurrent_dropout", "dropout on the recurrent state"},
      {"strategy", "naive | transfer | transfer-ft | interleaved"},
      {"batch_size", "mini-batch size"},
      {"max_epochs", "epoch limit"},
      {"patience", "epochs without improvement before stopping"},
      {"learning_rate", "Adam step size"},
      {"validation_fraction", "share held out for early stopping"},
      {"folds", "cross-validation folds (0 or 1 skips cross validation)"},
      {"workers", "parallel fold jobs"},
      {"seed", "seed for every random choice"},
      {"out", "output directory"},
      {"mask", "feature groups, e.g. WV+TF+UF, all or available"},
      {"masks", "feature-group mask (repeat per mask)"},
      {"checkpoint", "model.ckpt written by train"},
      {"kind", "xor | groups"},
      {"samples", "rows to generate"},
      {"noise", "probability of flipping a label"},
      {"edges", "edge list, one \"from to\" pair per line"},
      {"nodes", "optional \"id followers friends\" lines"},
      {"max_terms", "TF-IDF vocabulary cap"},
      {"alpha", "Laplace smoothing"},
  };
  return h;
}

void add_flag(Command& c, const std::string& key, Kind kind) {
  c.flags.push_back({key, kind, help_texts().at(key), {}, {}, nullptr});
}

const char* type_name(Kind k) {
  switch (k) {
    case Kind::count: return "N";
    case Kind::real: return "X";
    default: return "TEXT";
  }
}

void bind(Command& c) {
  for (auto& f : c.flags) {
    const std::string name = "--" + [&] {
      std::string s = f.key;
      for (auto& ch : s)
        if (ch == '_') ch = '-';
      return s;
    }();
    if (f.kind == Kind::list)
      f.option = c.app->add_option(name, f.values, f.help);
    else
      f.option = c.app->add_option(name, f.value, f.help)
                     ->type_name(type_name(f.kind))
                     ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

json collect(const Command& c) {
  json options = json::object();
  if (!c.options_file.empty()) {
    std::ifstream in(c.options_file);
    if (!in) throw std::runtime_error("cannot open options file " + c.options_file);
    in >> options;
  }
  for (const auto& f : c.flags) {
    if (f.option->count() == 0) continue;
    switch (f.kind) {
      case Kind::text: options[f.key] = f.value; break;
      case Kind::count: options[f.key] = std::stoull(f.value); break;
      case Kind::real: options[f.key] = std::stod(f.value); break;
      case Kind::list: {
        json list = json::array();
        for (const auto& v : f.values) {
          if (f.key == "dense_widths")
            list.push_back(std::stoull(v));
          else
            list.push_back(v);
        }
        options[f.key] = list;
        break;
      }
    }
  }
  return options;
}

Command& make(CLI::App& root, std::vector<Command>& all, const char* name, const char* help) {
  all.emplace_back();
  auto& c = all.back();
  c.app = root.add_subcommand(name, help);
  c.app->add_option("--options", c.options_file, "JSON file with options; flags override it");
  c.app->add_flag("-q,--quiet", c.quiet, "do not print the report");
  return c;
}

void model_flags(Command& c) {
  add_flag(c, "dataset", Kind::text);
  add_flag(c, "schema", Kind::text);
  add_flag(c, "embeddings", Kind::text);
  add_flag(c, "embedding_dim", Kind::count);
  add_flag(c, "dense_widths", Kind::list);
  add_flag(c, "recurrent_dropout", Kind::real);
  add_flag(c, "strategy", Kind::text);
  add_flag(c, "batch_size", Kind::count);
  add_flag(c, "max_epochs", Kind::count);
  add_flag(c, "patience", Kind::count);
  add_flag(c, "learning_rate", Kind::real);
  add_flag(c, "validation_fraction", Kind::real);
  add_flag(c, "folds", Kind::count);
  add_flag(c, "workers", Kind::count);
  add_flag(c, "seed", Kind::count);
  add_flag(c, "out", Kind::text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-input abuse classifiers: training, evaluation, ablation and baseline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mpath_version()));

  std::vector<Command> commands;
  commands.reserve(8);

  auto& train = make(app, commands, "train", "Train a model and write a checkpoint and report");
  model_flags(train);
  add_flag(train, "mask", Kind::text);

  auto& evaluate = make(app, commands, "evaluate", "Score a dataset with a checkpoint");
  for (const char* k : {"checkpoint", "dataset", "schema", "out"}) add_flag(evaluate, k, Kind::text);
  add_flag(evaluate, "batch_size", Kind::count);

  auto& ablate = make(app, commands, "ablate", "Cross-validate one model per feature-group mask");
  model_flags(ablate);
  add_flag(ablate, "masks", Kind::list);

  auto& baseline = make(app, commands, "baseline", "Cross-validate TF-IDF Naive Bayes");
  for (const char* k : {"dataset", "schema", "out"}) add_flag(baseline, k, Kind::text);
  for (const char* k : {"folds", "max_terms", "seed"}) add_flag(baseline, k, Kind::count);
  add_flag(baseline, "alpha", Kind::real);

  auto& synth = make(app, commands, "synth", "Write a synthetic dataset and schema");
  add_flag(synth, "kind", Kind::text);
  add_flag(synth, "samples", Kind::count);
  add_flag(synth, "noise", Kind::real);
  add_flag(synth, "seed", Kind::count);
  add_flag(synth, "out", Kind::text);

  auto& network = make(app, commands, "network", "Graph metrics for every node of an edge list");
  for (const char* k : {"edges", "nodes", "out"}) add_flag(network, k, Kind::text);

  std::string defaults_for;
  auto* defaults = app.add_subcommand("defaults", "Print the default options of a command");
  defaults->add_option("command", defaults_for)->required();

  for (auto& c : commands) bind(c);

  CLI11_PARSE(app, argc, argv);

  if (defaults->parsed()) {
    char* text = nullptr;
    const auto status = mpath_default_options(defaults_for.c_str(), &text);
    if (status != MPATH_OK) {
      std::cerr << "error (" << mpath_status_name(status) << "): " << mpath_last_error() << '\n';
      return int(status);
    }
    std::cout << text << '\n';
    mpath_string_free(text);
    return 0;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    json options;
    try {
      options = collect(c);
    } catch (const std::exception& e) {
      std::cerr << "error (argument): " << e.what() << '\n';
      return int(MPATH_E_ARGUMENT);
    }
    char* report = nullptr;
    const auto status = mpath_run(c.app->get_name().c_str(), options.dump().c_str(), &report);
    if (status != MPATH_OK) {
      std::cerr << "error (" << mpath_status_name(status) << "): " << mpath_last_error() << '\n';
      return int(status);
    }
    if (!c.quiet) std::cout << report << '\n';
    mpath_string_free(report);
  }
  return 0;
}
