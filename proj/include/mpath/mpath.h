#ifndef MPATH_MPATH_H
#define MPATH_MPATH_H

/* C interface to libmpath: multi-input abuse classifiers with a text path
 * and a metadata path. Every call returns a status code; on failure
 * mpath_last_error() describes the problem for the calling thread. Strings
 * returned through char** outputs are owned by the caller and released with
 * mpath_string_free. */

#include <stddef.h>

#if defined(_WIN32)
#define MPATH_API __declspec(dllexport)
#else
#define MPATH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mpath_status {
  MPATH_OK = 0,
  MPATH_E_DIMENSION = 1,
  MPATH_E_NUMERIC = 2,
  MPATH_E_INDEX = 3,
  MPATH_E_CONTRACT = 4,
  MPATH_E_PARSE = 5,
  MPATH_E_FORMAT = 6,
  MPATH_E_CONFIG = 7,
  MPATH_E_LOOKUP = 8,
  MPATH_E_DEGENERATE = 9,
  MPATH_E_SCHEMA = 10,
  MPATH_E_IO = 11,
  MPATH_E_ARGUMENT = 20, /* null pointer or malformed options JSON */
  MPATH_E_INTERNAL = 99
} mpath_status;

typedef struct mpath_model mpath_model;

MPATH_API const char* mpath_version(void);
MPATH_API const char* mpath_status_name(mpath_status status);
MPATH_API const char* mpath_last_error(void);

/* Runs a batch command (train, evaluate, ablate, baseline, synth, network)
 * with a JSON object of options and returns its JSON report. */
MPATH_API mpath_status mpath_run(const char* command, const char* options_json,
                                 char** report_json);

/* Options of a command with all defaults filled in. */
MPATH_API mpath_status mpath_default_options(const char* command, char** options_json);

MPATH_API void mpath_string_free(char* s);

MPATH_API mpath_status mpath_model_load(const char* checkpoint_path, mpath_model** out);
MPATH_API void mpath_model_free(mpath_model* model);
MPATH_API mpath_status mpath_model_class_count(const mpath_model* model, size_t* out);
/* The returned name stays valid until the model is freed. */
MPATH_API mpath_status mpath_model_class_name(const mpath_model* model, size_t index,
                                              const char** out);
MPATH_API mpath_status mpath_model_parameter_count(const mpath_model* model,
                                                   int include_embeddings, size_t* out);
MPATH_API mpath_status mpath_model_config(const mpath_model* model, char** config_json);

#ifdef __cplusplus
}
#endif

#endif /* MPATH_MPATH_H */
