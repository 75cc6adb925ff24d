#include "mpath/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "mpath/error.hpp"

namespace mpath {

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::naive: return "naive";
    case Strategy::transfer: return "transfer";
    case Strategy::transfer_ft: return "transfer_ft";
    case Strategy::interleaved: return "interleaved";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "naive") return Strategy::naive;
  if (s == "transfer") return Strategy::transfer;
  if (s == "transfer_ft" || s == "transfer-ft") return Strategy::transfer_ft;
  if (s == "interleaved") return Strategy::interleaved;
  fail(ErrorKind::config, "unknown strategy '" + std::string(s) +
                              "' (expected naive, transfer, transfer_ft or interleaved)");
}

void TrainingConfig::validate() const {
  require(batch_size >= 1, ErrorKind::config, "batch_size must be at least 1");
  require(max_epochs >= 1, ErrorKind::config, "max_epochs must be at least 1");
  require(patience >= 1 && patience < max_epochs, ErrorKind::config,
          "patience must lie in [1, max_epochs)");
  require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorKind::config,
          "validation_fraction must lie in (0, 1)");
  require(adam.lr > 0 && adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 &&
              adam.beta2 < 1 && adam.epsilon > 0,
          ErrorKind::config, "invalid Adam hyperparameters");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"strategy", to_string(strategy)},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"adam", {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2},
                    {"epsilon", adam.epsilon}}},
          {"validation_fraction", validation_fraction},
          {"seed", seed}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  try {
    if (j.contains("strategy")) c.strategy = strategy_from_string(j["strategy"].get<std::string>());
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      c.adam.lr = a.value("lr", c.adam.lr);
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
Variable<T> cross_entropy(Tape<T>& tape, const Variable<T>& probs,
                          std::span<const int> labels) {
  require(probs.value().rank() == 2 && probs.shape()[0] == labels.size(),
          ErrorKind::dimension,
          "cross_entropy: " + shape_str(probs.shape()) + " probabilities for " +
              std::to_string(labels.size()) + " labels");
  require(!labels.empty(), ErrorKind::contract, "cross_entropy of an empty batch");
  const std::size_t n = labels.size(), c = probs.shape()[1];
  const T floor = static_cast<T>(kProbabilityFloor);
  std::vector<std::size_t> pick(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c, ErrorKind::index,
            "cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                std::to_string(c) + ")");
    pick[i] = i * c + static_cast<std::size_t>(labels[i]);
    total -= std::log(static_cast<double>(std::max(probs.value()[pick[i]], floor)));
  }
  Variable<T> y(Tensor<T>::scalar(static_cast<T>(total / double(n))),
                tape.tracks({&probs}));
  if (y.requires_grad()) {
    tape.record([probs, y, pick = std::move(pick), floor, n] {
      if (!y.has_grad()) return;
      const T g = y.grad()[0] / static_cast<T>(n);
      auto& gp = probs.grad();
      for (auto k : pick) {
        const T p = probs.value()[k];
        if (p >= floor) gp[k] -= g / p;  // clamped entries have zero slope
      }
    });
  }
  return y;
}

template Variable<float> cross_entropy(Tape<float>&, const Variable<float>&, std::span<const int>);
template Variable<double> cross_entropy(Tape<double>&, const Variable<double>&, std::span<const int>);

template <typename T>
void Adam<T>::step(ParameterStore<T>& store) {
  auto& params = store.all();
  if (m_.size() < params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_));
  const double c2 = 1.0 - std::pow(b2, double(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.buffer || !p.trainable || !p.var.has_grad()) continue;
    auto& value = p.var.mutable_value();
    const auto& grad = p.var.grad();
    require(grad.shape() == value.shape(), ErrorKind::contract,
            "adam: gradient shape mismatch for " + p.name);
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != value.size()) {
      m.assign(value.size(), 0.0);
      v.assign(value.size(), 0.0);
    }
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = static_cast<double>(grad[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1, vhat = v[k] / c2;
      value[k] = static_cast<T>(static_cast<double>(value[k]) -
                                config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

bool EarlyStopping::update(std::size_t epoch, double loss) {
  if (!any_ || loss < best_loss_) {
    any_ = true;
    best_loss_ = loss;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

nlohmann::json History::to_json() const {
  return {{"train_loss", train_loss}, {"val_loss", val_loss},
          {"epochs_run", epochs_run}, {"best_epoch", best_epoch},
          {"stopped_early", stopped_early}};
}

History run_with_early_stopping(std::size_t max_epochs, std::size_t patience,
                                const std::function<double(std::size_t)>& epoch,
                                const std::function<void()>& snapshot,
                                const std::function<void()>& restore) {
  History h;
  EarlyStopping stopper(patience);
  for (std::size_t e = 0; e < max_epochs; ++e) {
    const double loss = epoch(e);
    h.val_loss.push_back(loss);
    h.epochs_run = e + 1;
    if (stopper.update(e, loss)) snapshot();
    if (stopper.should_stop()) {
      h.stopped_early = e + 1 < max_epochs;
      break;
    }
  }
  h.best_epoch = stopper.best_epoch();
  restore();
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a running combination
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ (b * 0x632BE59BD9B4E019ull));
}

namespace {

std::vector<std::vector<std::size_t>> rows_by_class(std::span<const int> labels) {
  int top = -1;
  for (int y : labels) {
    require(y >= 0, ErrorKind::index, "negative class label");
    top = std::max(top, y);
  }
  std::vector<std::vector<std::size_t>> by(static_cast<std::size_t>(top + 1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    by[static_cast<std::size_t>(labels[i])].push_back(i);
  return by;
}

void require_two_classes(std::span<const int> labels) {
  require(!labels.empty(), ErrorKind::contract, "training data is empty");
  const bool mixed = std::any_of(labels.begin(), labels.end(),
                                 [&](int y) { return y != labels[0]; });
  require(mixed, ErrorKind::degenerate,
          "training data holds a single class; nothing to learn");
}

}  // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const int> labels, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto by = rows_by_class(labels);
  std::vector<std::size_t> train, val;
  std::size_t largest = 0;
  for (std::size_t c = 0; c < by.size(); ++c) {
    auto& rows = by[c];
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto take = static_cast<std::size_t>(std::floor(fraction * double(rows.size()) + 0.5));
    val.insert(val.end(), rows.begin(), rows.begin() + std::min(take, rows.size()));
    if (rows.size() > by[largest].size()) largest = c;
  }
  if (val.empty() && by[largest].size() >= 2) val.push_back(by[largest].front());
  std::sort(val.begin(), val.end());
  for (std::size_t i = 0, k = 0; i < labels.size(); ++i) {
    if (k < val.size() && val[k] == i) {
      ++k;
      continue;
    }
    train.push_back(i);
  }
  require(!val.empty() && train.size() >= 2, ErrorKind::contract,
          "too few samples for a validation split");
  return {std::move(train), std::move(val)};
}

template <typename T>
double evaluate_loss(const Model<T>& model, const Dataset& data,
                     std::size_t batch_size) {
  require(data.labeled() && data.size() > 0, ErrorKind::contract,
          "validation loss needs labeled data");
  const auto probs = model.predict(data, batch_size);
  const std::size_t c = model.config().classes.size();
  double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    total -= std::log(std::max(probs[i * c + static_cast<std::size_t>(data.labels[i])],
                               static_cast<double>(static_cast<T>(kProbabilityFloor))));
  return total / double(data.size());
}

template double evaluate_loss(const Model<float>&, const Dataset&, std::size_t);
template double evaluate_loss(const Model<double>&, const Dataset&, std::size_t);

namespace {

enum class Schedule { all, interleaved };

// Shuffled mini-batches; a trailing single-row batch joins the previous one
// because batch normalisation needs two rows.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t size,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += size)
    out.emplace_back(order.begin() + start, order.begin() + std::min(n, start + size));
  if (out.size() >= 2 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

template <typename T>
History fit_impl(Model<T>& model, const Dataset& data, const TrainingConfig& config,
                 const FitHooks<T>* hooks, Schedule schedule) {
  config.validate();
  require(data.labeled(), ErrorKind::contract, "training needs labeled data");
  data.validate();
  require_two_classes(data.labels);
  if (schedule == Schedule::interleaved)
    require(model.config().kind == ModelKind::combined, ErrorKind::contract,
            "interleaved training needs the combined model");

  auto [train_rows, val_rows] =
      stratified_split(data.labels, config.validation_fraction,
                       derive_seed(config.seed, 1, 0));
  const Dataset train = data.subset(train_rows);
  const Dataset val = data.subset(val_rows);
  require_two_classes(train.labels);
  const std::size_t batch_size = std::min(config.batch_size, train.size());

  std::mt19937_64 order_rng(derive_seed(config.seed, 2, 0));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, 3, 0));
  auto& store = model.params();

  // Trainability the caller set up; interleaving narrows it per step.
  std::vector<bool> allowed;
  for (const auto& p : store.all()) allowed.push_back(p.trainable);
  auto apply_view = [&](View view) {
    auto& ps = store.all();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (ps[i].buffer) continue;
      bool on = allowed[i];
      if (view == View::a && ps[i].path == PathTag::text) on = false;
      if (view == View::b && ps[i].path == PathTag::metadata) on = false;
      ps[i].trainable = on;
      ps[i].var.set_requires_grad(on);
    }
  };
  std::vector<Variable<T>> view_handles;
  for (const auto& p : store.all()) view_handles.push_back(p.var);

  Adam<T> adam_all(config.adam), adam_a(config.adam), adam_b(config.adam);
  std::vector<Tensor<T>> best;
  std::vector<double> train_losses;

  auto epoch = [&](std::size_t e) {
    const auto batches = epoch_batches(train.size(), batch_size, order_rng);
    double total = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      StepInfo info{e, bi, View::all};
      if (schedule == Schedule::interleaved) {
        info.view = (bi + e) % 2 == 0 ? View::a : View::b;
        apply_view(info.view);
      }
      if (hooks && hooks->before_step) hooks->before_step(info, model);

      const Batch batch = train.batch(batches[bi]);
      store.zero_grad();
      Tape<T> tape;
      auto probs = model.forward(tape, batch, true, &dropout_rng);
      auto loss = cross_entropy(tape, probs, batch.labels);
      require(std::isfinite(static_cast<double>(loss.value().item())), ErrorKind::numeric,
              "training loss became non-finite at epoch " + std::to_string(e));
      tape.backward(loss);
      switch (info.view) {
        case View::all: adam_all.step(store); break;
        case View::a: adam_a.step(store); break;
        case View::b: adam_b.step(store); break;
      }
      total += static_cast<double>(loss.value().item()) * double(batch.size);

      if (hooks && hooks->after_step) hooks->after_step(info, model);
      if (schedule == Schedule::interleaved) {
        // Both views read one store, so the copy into the idle view is a
        // no-op; the handles must still point at the live parameters.
        const auto& live = store.all();
        for (std::size_t i = 0; i < live.size(); ++i)
          require(view_handles[i].same_node(live[i].var), ErrorKind::contract,
                  "interleaved views diverged at " + live[i].name);
        if (hooks && hooks->after_sync) hooks->after_sync(info, view_handles, view_handles);
      }
    }
    train_losses.push_back(total / double(train.size()));
    return evaluate_loss(model, val, config.batch_size);
  };

  History h;
  try {
    h = run_with_early_stopping(
        config.max_epochs, config.patience, epoch,
        [&] { best = store.snapshot(); }, [&] { store.restore(best); });
  } catch (...) {
    apply_view(View::all);
    throw;
  }
  apply_view(View::all);
  h.train_loss = std::move(train_losses);
  h.validation_rows = std::move(val_rows);
  return h;
}

}  // namespace

template <typename T>
History fit(Model<T>& model, const Dataset& data, const TrainingConfig& config,
            const FitHooks<T>* hooks) {
  return fit_impl(model, data, config, hooks, Schedule::all);
}

template <typename T>
History fit_naive(Model<T>& model, const Dataset& data,
                  const TrainingConfig& config, const FitHooks<T>* hooks) {
  model.params().set_all_trainable(true);
  return fit_impl(model, data, config, hooks, Schedule::all);
}

template <typename T>
History fit_interleaved(Model<T>& model, const Dataset& data,
                        const TrainingConfig& config, const FitHooks<T>* hooks) {
  model.params().set_all_trainable(true);
  return fit_impl(model, data, config, hooks, Schedule::interleaved);
}

template <typename T>
TransferResult<T> fit_transfer(const ModelConfig& combined,
                               std::optional<Tensor<float>> embeddings,
                               const Dataset& data, const TrainingConfig& config,
                               bool fine_tune, const FitHooks<T>* fusion_hooks) {
  require(combined.kind == ModelKind::combined, ErrorKind::contract,
          "transfer learning builds a combined model");
  ModelConfig text_cfg = combined, meta_cfg = combined, fused_cfg = combined;
  text_cfg.kind = ModelKind::text;
  meta_cfg.kind = ModelKind::metadata;
  text_cfg.seed = derive_seed(combined.seed, 11, 0);
  meta_cfg.seed = derive_seed(combined.seed, 12, 0);
  TrainingConfig text_train = config, meta_train = config, fused_train = config;
  text_train.seed = derive_seed(config.seed, 21, 0);
  meta_train.seed = derive_seed(config.seed, 22, 0);

  Model<T> text(text_cfg, embeddings);
  auto text_history = fit(text, data, text_train);
  Model<T> meta(meta_cfg);
  auto meta_history = fit(meta, data, meta_train);

  // Fresh head over the pretrained paths; their classifiers are dropped.
  Model<T> fused(fused_cfg, std::move(embeddings));
  fused.copy_path_from(text, PathTag::text);
  fused.copy_path_from(meta, PathTag::metadata);
  fused.params().set_trainable(PathTag::text, fine_tune);
  fused.params().set_trainable(PathTag::metadata, fine_tune);
  fused.params().set_trainable(PathTag::head, true);
  auto fusion_history = fit(fused, data, fused_train, fusion_hooks);

  return {std::move(fused), std::move(text), std::move(meta), std::move(text_history),
          std::move(meta_history), std::move(fusion_history)};
}

ModelConfig config_for(const ModelConfig& base, const Dataset& data) {
  ModelConfig c = base;
  c.classes = data.classes;
  c.schema = data.schema;
  c.seq_len = data.has_text ? data.seq_len : 0;
  require(data.has_text || !data.schema.empty(), ErrorKind::config,
          "dataset has neither text nor metadata inputs");
  c.kind = data.has_text ? (data.schema.empty() ? ModelKind::text : ModelKind::combined)
                         : ModelKind::metadata;
  return c;
}

template <typename T>
Model<T> train_model(const ModelConfig& base, std::optional<Tensor<float>> embeddings,
                     const Dataset& data, const TrainingConfig& config,
                     std::vector<TrainingStage>* stages) {
  const ModelConfig cfg = config_for(base, data);
  auto log = [&](const char* name, History h) {
    if (stages) stages->push_back({name, std::move(h)});
  };
  if (cfg.kind == ModelKind::combined &&
      (config.strategy == Strategy::transfer || config.strategy == Strategy::transfer_ft)) {
    auto r = fit_transfer<T>(cfg, std::move(embeddings), data, config,
                             config.strategy == Strategy::transfer_ft);
    log("text_pretrain", std::move(r.text_history));
    log("metadata_pretrain", std::move(r.metadata_history));
    log("fusion", std::move(r.fusion_history));
    return std::move(r.combined);
  }
  Model<T> model(cfg, cfg.has_text() ? std::move(embeddings) : std::nullopt);
  if (cfg.kind != ModelKind::combined)
    log("fit", fit(model, data, config));
  else if (config.strategy == Strategy::interleaved)
    log("interleaved", fit_interleaved(model, data, config));
  else
    log("naive", fit_naive(model, data, config));
  return model;
}

#define MPATH_INSTANTIATE_TRAINING(T)                                                 \
  template History fit(Model<T>&, const Dataset&, const TrainingConfig&,              \
                       const FitHooks<T>*);                                           \
  template History fit_naive(Model<T>&, const Dataset&, const TrainingConfig&,        \
                             const FitHooks<T>*);                                     \
  template History fit_interleaved(Model<T>&, const Dataset&, const TrainingConfig&,  \
                                   const FitHooks<T>*);                               \
  template TransferResult<T> fit_transfer(const ModelConfig&,                         \
                                          std::optional<Tensor<float>>,               \
                                          const Dataset&, const TrainingConfig&,      \
                                          bool, const FitHooks<T>*);                  \
  template Model<T> train_model(const ModelConfig&, std::optional<Tensor<float>>,     \
                                const Dataset&, const TrainingConfig&,          \
                                std::vector<TrainingStage>*);

MPATH_INSTANTIATE_TRAINING(float)
MPATH_INSTANTIATE_TRAINING(double)
#undef MPATH_INSTANTIATE_TRAINING

std::vector<std::vector<std::size_t>> stratified_folds(
    std::span<const int> labels, std::size_t k, std::uint64_t seed,
    std::vector<std::string>* warnings) {
  require(k >= 2, ErrorKind::config, "cross validation needs at least two folds");
  require(labels.size() >= k, ErrorKind::config,
          "cannot split " + std::to_string(labels.size()) + " samples into " +
              std::to_string(k) + " folds");
  std::mt19937_64 rng(seed);
  auto by = rows_by_class(labels);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t next = 0;  // dealing continues across classes to balance sizes
  for (std::size_t c = 0; c < by.size(); ++c) {
    auto& rows = by[c];
    if (rows.empty()) continue;
    if (rows.size() < k && warnings)
      warnings->push_back("class " + std::to_string(c) + " has " +
                          std::to_string(rows.size()) + " samples, fewer than " +
                          std::to_string(k) + " folds");
    std::shuffle(rows.begin(), rows.end(), rng);
    for (auto r : rows) {
      folds[next].push_back(r);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

nlohmann::json CvReport::to_json() const {
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& f : folds) per_fold.push_back(f.to_json());
  return {{"folds", per_fold}, {"mean", mean.to_json()}, {"warnings", warnings}};
}

namespace {

// Runs jobs 0..n-1 on up to `workers` threads; rethrows the first failure.
void run_jobs(std::size_t n, std::size_t workers,
              const std::function<void(std::size_t)>& job) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n || error) return;
        i = next++;
      }
      try {
        job(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::uint64_t fold_seed(std::uint64_t seed) { return derive_seed(seed, 0xF01D, 0); }

CvReport run_cv(const Dataset& data, const ModelConfig& base,
                std::optional<Tensor<float>> embeddings,
                const TrainingConfig& config, const CvOptions& options) {
  require(data.labeled(), ErrorKind::contract, "cross validation needs labels");
  CvReport report;
  const auto folds = stratified_folds(data.labels, options.folds,
                                      fold_seed(config.seed),
                                      &report.warnings);
  report.folds.resize(folds.size());
  run_jobs(folds.size(), options.workers, [&](std::size_t f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    std::sort(train_rows.begin(), train_rows.end());
    const Dataset train = data.subset(train_rows);
    const Dataset test = data.subset(folds[f]);

    TrainingConfig fold_cfg = config;
    fold_cfg.seed = derive_seed(config.seed, options.stream, f + 1);
    ModelConfig fold_base = base;
    fold_base.seed = derive_seed(base.seed, options.stream, f + 1);
    const auto model = train_model<float>(fold_base, embeddings, train, fold_cfg);
    const auto probs = model.predict(test, config.batch_size);
    report.folds[f] = evaluate_predictions(probs, test.labels, data.classes.size());
  });
  report.mean = mean_metrics(report.folds);
  return report;
}

std::vector<AblationRow> run_ablation(const Dataset& data,
                                      std::span<const FeatureGroupMask> masks,
                                      const ModelConfig& base,
                                      std::optional<Tensor<float>> embeddings,
                                      const TrainingConfig& config,
                                      const CvOptions& options) {
  std::vector<AblationRow> rows;
  for (const auto& mask : masks) {
    const Dataset assembled = assemble(data, mask);
    CvOptions opt = options;
    opt.stream = derive_seed(options.stream, mask.bits(), 0xAB1A);
    rows.push_back({mask, run_cv(assembled, base,
                                 mask.has(FeatureGroup::WV) ? embeddings : std::nullopt,
                                 config, opt)});
  }
  return rows;
}

}  // namespace mpath
