#include "mpath/mpath.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "mpath/commands.hpp"
#include "mpath/error.hpp"
#include "mpath/model.hpp"

struct mpath_model {
  mpath::LoadedCheckpoint checkpoint;
};

namespace {

thread_local std::string last_error;

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

mpath_status status_of(mpath::ErrorKind kind) {
  switch (kind) {
    case mpath::ErrorKind::dimension: return MPATH_E_DIMENSION;
    case mpath::ErrorKind::numeric: return MPATH_E_NUMERIC;
    case mpath::ErrorKind::index: return MPATH_E_INDEX;
    case mpath::ErrorKind::contract: return MPATH_E_CONTRACT;
    case mpath::ErrorKind::parse: return MPATH_E_PARSE;
    case mpath::ErrorKind::format: return MPATH_E_FORMAT;
    case mpath::ErrorKind::config: return MPATH_E_CONFIG;
    case mpath::ErrorKind::lookup: return MPATH_E_LOOKUP;
    case mpath::ErrorKind::degenerate: return MPATH_E_DEGENERATE;
    case mpath::ErrorKind::schema: return MPATH_E_SCHEMA;
    case mpath::ErrorKind::io: return MPATH_E_IO;
  }
  return MPATH_E_INTERNAL;
}

// Runs `body`, translating exceptions into status codes and last_error.
template <typename F>
mpath_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return MPATH_OK;
  } catch (const mpath::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const ArgumentError& e) {
    last_error = e.what();
    return MPATH_E_ARGUMENT;
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return MPATH_E_ARGUMENT;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return MPATH_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return MPATH_E_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return MPATH_E_INTERNAL;
  }
}

char* copy_out(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* mpath_version(void) { return "0.1.0"; }

const char* mpath_status_name(mpath_status status) {
  switch (status) {
    case MPATH_OK: return "ok";
    case MPATH_E_DIMENSION: return "dimension";
    case MPATH_E_NUMERIC: return "numeric";
    case MPATH_E_INDEX: return "index";
    case MPATH_E_CONTRACT: return "contract";
    case MPATH_E_PARSE: return "parse";
    case MPATH_E_FORMAT: return "format";
    case MPATH_E_CONFIG: return "config";
    case MPATH_E_LOOKUP: return "lookup";
    case MPATH_E_DEGENERATE: return "degenerate";
    case MPATH_E_SCHEMA: return "schema";
    case MPATH_E_IO: return "io";
    case MPATH_E_ARGUMENT: return "argument";
    case MPATH_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mpath_last_error(void) { return last_error.c_str(); }

mpath_status mpath_run(const char* command, const char* options_json, char** report_json) {
  return guarded([&] {
    need(command, "command");
    need(report_json, "report_json");
    *report_json = nullptr;
    const auto options = options_json && *options_json ? nlohmann::json::parse(options_json)
                                                       : nlohmann::json::object();
    *report_json = copy_out(mpath::run_command(command, options).dump(2));
  });
}

mpath_status mpath_default_options(const char* command, char** options_json) {
  return guarded([&] {
    need(command, "command");
    need(options_json, "options_json");
    *options_json = copy_out(mpath::effective_options(command, nlohmann::json::object()).dump(2));
  });
}

void mpath_string_free(char* s) { std::free(s); }

mpath_status mpath_model_load(const char* checkpoint_path, mpath_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = nullptr;
    *out = new mpath_model{mpath::load_checkpoint(checkpoint_path)};
  });
}

void mpath_model_free(mpath_model* model) { delete model; }

mpath_status mpath_model_class_count(const mpath_model* model, size_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = model->checkpoint.model.config().classes.size();
  });
}

mpath_status mpath_model_class_name(const mpath_model* model, size_t index, const char** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto& classes = model->checkpoint.model.config().classes;
    mpath::require(index < classes.size(), mpath::ErrorKind::index,
                   "class index " + std::to_string(index) + " out of range");
    *out = classes[index].c_str();
  });
}

mpath_status mpath_model_parameter_count(const mpath_model* model, int include_embeddings,
                                         size_t* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    std::size_t n = 0;
    for (const auto& p : model->checkpoint.model.params().all())
      if (!p.buffer && (include_embeddings || p.name != "text.embedding.table"))
        n += p.var.value().size();
    *out = n;
  });
}

mpath_status mpath_model_config(const mpath_model* model, char** config_json) {
  return guarded([&] {
    need(model, "model");
    need(config_json, "config_json");
    *config_json = copy_out(model->checkpoint.model.config().to_json().dump(2));
  });
}

}  // extern "C"
