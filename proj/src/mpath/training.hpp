#pragma once

// Loss, optimizer, early stopping and the four strategies for training the
// combined model, plus stratified cross validation and the ablation runner.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpath/dataset.hpp"
#include "mpath/features.hpp"
#include "mpath/metrics.hpp"
#include "mpath/model.hpp"

namespace mpath {

enum class Strategy : std::uint8_t { naive, transfer, transfer_ft, interleaved };

const char* to_string(Strategy s) noexcept;
Strategy strategy_from_string(std::string_view s);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainingConfig {
  Strategy strategy = Strategy::naive;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  AdamConfig adam;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

// Mean over rows of -log(max(probs[row, label], 1e-12)).
template <typename T>
Variable<T> cross_entropy(Tape<T>& tape, const Variable<T>& probs,
                          std::span<const int> labels);

inline constexpr double kProbabilityFloor = 1e-12;

// Adam with bias correction. Moments are kept per parameter slot of the store
// it was created for; only trainable, non-buffer parameters with a gradient
// are updated.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParameterStore<T>& store);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Tracks the best validation loss; improvement means strictly lower.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `loss` is a new best.
  bool update(std::size_t epoch, double loss);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t since_best_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0;
  bool any_ = false;
};

struct History {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // zero-based
  bool stopped_early = false;
  std::vector<std::size_t> validation_rows;  // rows of the fitted dataset

  nlohmann::json to_json() const;
};

// Epoch loop shared by every strategy: runs `epoch(e)` (which trains one
// epoch and returns the validation loss), snapshots on improvement, stops
// after `patience` epochs without improvement and finally restores the best
// snapshot.
History run_with_early_stopping(std::size_t max_epochs, std::size_t patience,
                                const std::function<double(std::size_t)>& epoch,
                                const std::function<void()>& snapshot,
                                const std::function<void()>& restore);

enum class View : std::uint8_t { all, a, b };

// Observer hooks around each optimizer step.
struct StepInfo {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  View view = View::all;
};

template <typename T>
struct FitHooks {
  std::function<void(const StepInfo&, const Model<T>&)> before_step;
  std::function<void(const StepInfo&, const Model<T>&)> after_step;
  // Interleaved only: the parameter handles each view exposes.
  std::function<void(const StepInfo&, const std::vector<Variable<T>>& view_a,
                     const std::vector<Variable<T>>& view_b)>
      after_sync;
};

// Seeded stratified split: about `fraction` of each class goes to
// validation. Returns {train_rows, validation_rows}.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const int> labels, double fraction, std::uint64_t seed);

// Mean cross-entropy in inference mode.
template <typename T>
double evaluate_loss(const Model<T>& model, const Dataset& data,
                     std::size_t batch_size);

// Mini-batch training with every parameter that is currently trainable.
template <typename T>
History fit(Model<T>& model, const Dataset& data, const TrainingConfig& config,
            const FitHooks<T>* hooks = nullptr);

// Whole combined network trained at once.
template <typename T>
History fit_naive(Model<T>& model, const Dataset& data,
                  const TrainingConfig& config,
                  const FitHooks<T>* hooks = nullptr);

// Two views over one parameter store: A freezes the text path, B the
// metadata path. Batch b of epoch e uses A when (b + e) is even. Both views
// run forward and backward through the whole network; each keeps its own
// Adam state.
template <typename T>
History fit_interleaved(Model<T>& model, const Dataset& data,
                        const TrainingConfig& config,
                        const FitHooks<T>* hooks = nullptr);

template <typename T>
struct TransferResult {
  Model<T> combined;
  Model<T> text;
  Model<T> metadata;
  History text_history;
  History metadata_history;
  History fusion_history;
};

// Pretrains each path as a standalone classifier, moves both into a
// combined model with a fresh head, freezes them unless `fine_tune`, and
// trains again.
template <typename T>
TransferResult<T> fit_transfer(const ModelConfig& combined,
                               std::optional<Tensor<float>> embeddings,
                               const Dataset& data, const TrainingConfig& config,
                               bool fine_tune,
                               const FitHooks<T>* fusion_hooks = nullptr);

struct TrainingStage {
  std::string name;  // fit, naive, interleaved, text_pretrain, metadata_pretrain, fusion
  History history;
};

// Builds a model of the kind the dataset supports and trains it with the
// configured strategy (plain fit for single-path models). The histories of
// every stage are appended to `stages`.
template <typename T>
Model<T> train_model(const ModelConfig& base, std::optional<Tensor<float>> embeddings,
                     const Dataset& data, const TrainingConfig& config,
                     std::vector<TrainingStage>* stages = nullptr);

// Model configuration matching a dataset's inputs.
ModelConfig config_for(const ModelConfig& base, const Dataset& data);

// Seeded stratified k-fold partition; each entry lists one fold's test rows.
// Classes with fewer than k members are spread best-effort and reported in
// `warnings`.
std::vector<std::vector<std::size_t>> stratified_folds(
    std::span<const int> labels, std::size_t k, std::uint64_t seed,
    std::vector<std::string>* warnings = nullptr);

// Independent per-job seed derived from (seed, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

// Seed of the fold assignment shared by every cross validation on one seed.
std::uint64_t fold_seed(std::uint64_t seed);

struct CvReport {
  std::vector<Metrics> folds;
  Metrics mean;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct CvOptions {
  std::size_t folds = 10;
  std::size_t workers = 1;  // parallel fold jobs
  std::uint64_t stream = 0; // mixed into every fold seed
};

// Stratified k-fold evaluation with a fresh model per fold.
CvReport run_cv(const Dataset& data, const ModelConfig& base,
                std::optional<Tensor<float>> embeddings,
                const TrainingConfig& config, const CvOptions& options = {});

struct AblationRow {
  FeatureGroupMask mask;
  CvReport report;
};

// One cross-validation per mask over the assembled dataset.
std::vector<AblationRow> run_ablation(const Dataset& data,
                                      std::span<const FeatureGroupMask> masks,
                                      const ModelConfig& base,
                                      std::optional<Tensor<float>> embeddings,
                                      const TrainingConfig& config,
                                      const CvOptions& options = {});

}  // namespace mpath
