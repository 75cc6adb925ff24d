#pragma once

// Batch commands behind the CLI and the C API. Each takes a JSON object of
// options, fills in defaults, runs, optionally writes files under "out" and
// returns a JSON report that echoes the effective options.

#include <string_view>
#include <vector>

#include "json.hpp"

namespace mpath {

// train     dataset, schema?, embeddings?, strategy, mask (default: available groups), folds,
//           out -> checkpoint + report
// evaluate  checkpoint, dataset, schema? -> metrics, or per-row scores when unlabeled
// ablate    dataset, schema?, embeddings?, masks? (default: feasible table rows) -> one cross
//           validation per mask
// baseline  dataset, schema? -> Naive Bayes cross validation
// synth     kind (xor | groups), samples, noise, seed, out -> data.csv + schema.json
// network   edges, nodes? -> per-node graph metrics
nlohmann::json run_command(std::string_view command, const nlohmann::json& options);

const std::vector<std::string_view>& command_names();

// Options with every default filled in; unknown keys are config errors.
nlohmann::json effective_options(std::string_view command, const nlohmann::json& options);

}  // namespace mpath
