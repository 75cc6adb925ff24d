#include "mpath/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mpath/error.hpp"

using namespace mpath;

namespace {

// Label 1 posts contain token 5 and have f0 near +1; label 0 posts contain
// token 6 and f0 near -1. Either input alone separates the classes.
Dataset separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0, 0.3f);
  Dataset d;
  d.classes = {"normal", "abusive"};
  d.has_text = true;
  d.seq_len = 4;
  d.schema = {{"f0", FeatureGroup::UF}, {"f1", FeatureGroup::UF}, {"f2", FeatureGroup::TF}};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = int(i % 2);
    d.ids.push_back("s" + std::to_string(i));
    d.labels.push_back(y);
    d.tokens.push_back(0);
    d.tokens.push_back(std::int32_t(1 + rng() % 4));
    d.tokens.push_back(y ? 5 : 6);
    d.tokens.push_back(std::int32_t(1 + rng() % 4));
    d.features.push_back((y ? 1.0f : -1.0f) + noise(rng));
    d.features.push_back(noise(rng));
    d.features.push_back(noise(rng));
  }
  return d;
}

ModelConfig small_config(const Dataset& d) {
  ModelConfig base;
  base.vocab_size = 10;
  base.embedding_dim = 8;
  base.dense_widths = {16, 8};
  base.seed = 3;
  return config_for(base, d);
}

TrainingConfig small_training(Strategy s = Strategy::naive) {
  TrainingConfig t;
  t.strategy = s;
  t.batch_size = 16;
  t.max_epochs = 5;
  t.patience = 4;
  t.seed = 11;
  return t;
}

template <typename T>
std::vector<Tensor<T>> path_values(const ParameterStore<T>& store, PathTag path) {
  std::vector<Tensor<T>> out;
  for (const auto& p : store.all())
    if (p.path == path && !p.buffer) out.push_back(p.var.value());
  return out;
}

double per_row_loss(std::initializer_list<double> row, int label) {
  return -std::log(std::max(*(row.begin() + label), 1e-12));
}

}  // namespace

TEST(CrossEntropy, Examples) {
  Tape<double> tape;
  Variable<double> uniform(Tensor<double>({1, 3}, 1.0 / 3.0), false);
  EXPECT_NEAR(cross_entropy(tape, uniform, std::vector<int>{2}).value().item(),
              std::log(3.0), 1e-15);
  Variable<double> sure(Tensor<double>({1, 2}, std::vector<double>{1.0, 0.0}), false);
  EXPECT_EQ(cross_entropy(tape, sure, std::vector<int>{0}).value().item(), 0.0);
  // a zero probability is clamped rather than infinite
  EXPECT_NEAR(cross_entropy(tape, sure, std::vector<int>{1}).value().item(),
              -std::log(1e-12), 1e-9);

  Variable<double> mixed(Tensor<double>({3, 3}, std::vector<double>{0.7, 0.2, 0.1, 0.1, 0.1, 0.8,
                                                                    0.25, 0.5, 0.25}),
                         false);
  const double expect = (per_row_loss({0.7, 0.2, 0.1}, 0) + per_row_loss({0.1, 0.1, 0.8}, 1) +
                         per_row_loss({0.25, 0.5, 0.25}, 2)) /
                        3.0;
  EXPECT_NEAR(cross_entropy(tape, mixed, std::vector<int>{0, 1, 2}).value().item(), expect,
              1e-15);
  try {
    cross_entropy(tape, mixed, std::vector<int>{0, 3, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::index);
  }
}

TEST(CrossEntropy, GradientThroughSoftmax) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 1);
  Tensor<double> logits({4, 3}, 0.0);
  for (auto& v : logits.values()) v = nd(rng);
  Variable<double> x(logits, true);
  const std::vector<int> labels{2, 0, 1, 1};
  const auto r = grad_check(
      [&](Tape<double>& t) { return cross_entropy(t, ops::softmax(t, x), labels); },
      {{"logits", x}}, 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.entries_checked, 12u);
}

TEST(Adam, MatchesScalarReference) {
  ParameterStore<double> store;
  auto w = store.add("head.w", PathTag::head, Tensor<double>({1, 2}, std::vector<double>{0.5, -1.0}));
  AdamConfig cfg;
  Adam<double> adam(cfg);

  // scalar reference for coordinate 0 with gradients 0.3, -0.1, 0.2
  double x = 0.5, m = 0, v = 0;
  const double grads[] = {0.3, -0.1, 0.2};
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    store.zero_grad();
    accumulate_grad(w, std::vector<double>{g, 2.0 * g});
    adam.step(store);
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    x -= cfg.lr * (m / (1 - std::pow(cfg.beta1, t))) /
         (std::sqrt(v / (1 - std::pow(cfg.beta2, t))) + cfg.epsilon);
    EXPECT_NEAR(w.value()[0], x, 1e-15) << "step " << t;
  }
  EXPECT_EQ(adam.steps(), 3u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore<double> store;
  auto w = store.add("head.w", PathTag::head, Tensor<double>({1, 3}, 0.0));
  Adam<double> adam;
  accumulate_grad(w, std::vector<double>{2.0, -0.5, 7.0});
  adam.step(store);
  EXPECT_NEAR(w.value()[0], -1e-3, 1e-10);
  EXPECT_NEAR(w.value()[1], 1e-3, 1e-10);
  EXPECT_NEAR(w.value()[2], -1e-3, 1e-10);
}

TEST(Adam, ZeroGradientAndFrozenParametersStay) {
  ParameterStore<float> store;
  auto a = store.add("head.a", PathTag::head, Tensor<float>({2, 2}, 0.25f));
  auto b = store.add("text.b", PathTag::text, Tensor<float>({3}, -0.5f));
  const auto a0 = a.value(), b0 = b.value();
  Adam<float> adam;
  accumulate_grad(a, std::vector<float>(4, 0.0f));
  adam.step(store);
  EXPECT_EQ(a.value(), a0);

  store.zero_grad();
  accumulate_grad(a, std::vector<float>(4, 1.0f));
  accumulate_grad(b, std::vector<float>(3, 1.0f));
  store.set_trainable(PathTag::text, false);
  b.set_requires_grad(true);  // a stale gradient must still be ignored
  accumulate_grad(b, std::vector<float>(3, 1.0f));
  adam.step(store);
  EXPECT_EQ(b.value(), b0);
  EXPECT_NE(a.value(), a0);
}

TEST(EarlyStopping, BestAtEpochThreeStopsAtThirteen) {
  std::vector<double> script(100, 0.5);
  script[0] = 0.9;
  script[1] = 0.8;
  script[2] = 0.7;
  script[3] = 0.4;  // flat afterwards, never strictly lower
  int current = -1, restored = -1;
  std::size_t calls = 0;
  const auto h = run_with_early_stopping(
      100, 10,
      [&](std::size_t e) {
        ++calls;
        current = int(e);
        return script[e];
      },
      [&] { restored = current; }, [&] { current = restored; });
  EXPECT_EQ(h.epochs_run, 14u);  // epochs 0..13
  EXPECT_EQ(calls, 14u);
  EXPECT_TRUE(h.stopped_early);
  EXPECT_EQ(h.best_epoch, 3u);
  EXPECT_EQ(current, 3);
  EXPECT_EQ(*std::min_element(h.val_loss.begin(), h.val_loss.end()), 0.4);
}

TEST(EarlyStopping, AlwaysImprovingRunsAllEpochs) {
  const auto h = run_with_early_stopping(
      100, 10, [](std::size_t e) { return 1.0 / double(e + 1); }, [] {}, [] {});
  EXPECT_EQ(h.epochs_run, 100u);
  EXPECT_FALSE(h.stopped_early);
  EXPECT_EQ(h.best_epoch, 99u);
}

TEST(Folds, PartitionAndStratify) {
  std::vector<int> labels;
  for (int i = 0; i < 137; ++i) labels.push_back(i % 7 == 0 ? 2 : i % 3 == 0 ? 1 : 0);
  const auto folds = stratified_folds(labels, 10, 42);
  ASSERT_EQ(folds.size(), 10u);
  std::set<std::size_t> seen;
  for (const auto& f : folds)
    for (auto r : f) EXPECT_TRUE(seen.insert(r).second) << "row " << r << " twice";
  EXPECT_EQ(seen.size(), labels.size());

  for (int c = 0; c < 3; ++c) {
    const double total = double(std::count(labels.begin(), labels.end(), c));
    for (const auto& f : folds) {
      std::size_t in = 0;
      for (auto r : f) in += labels[r] == c;
      EXPECT_LE(std::abs(double(in) - total / 10.0), 1.0) << "class " << c;
    }
  }
  EXPECT_EQ(stratified_folds(labels, 10, 42), folds);
  EXPECT_NE(stratified_folds(labels, 10, 43), folds);
}

TEST(Folds, SmallClassWarns) {
  std::vector<int> labels(40, 0);
  for (int i = 0; i < 4; ++i) labels[i * 9] = 1;
  std::vector<std::string> warnings;
  const auto folds = stratified_folds(labels, 10, 1, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("class 1"), std::string::npos);
  std::size_t holding = 0;
  for (const auto& f : folds)
    holding += std::any_of(f.begin(), f.end(), [&](std::size_t r) { return labels[r] == 1; });
  EXPECT_EQ(holding, 4u);
}

TEST(Split, StratifiedAndSeeded) {
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(i < 150 ? 0 : 1);
  const auto [train, val] = stratified_split(labels, 0.1, 9);
  EXPECT_EQ(train.size() + val.size(), 200u);
  EXPECT_EQ(val.size(), 20u);
  EXPECT_EQ(std::count_if(val.begin(), val.end(), [&](std::size_t r) { return labels[r] == 1; }), 5);
  EXPECT_EQ(stratified_split(labels, 0.1, 9).second, val);
}

TEST(DeriveSeed, DistinctStreams) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seeds.insert(derive_seed(7, a, b));
  EXPECT_EQ(seeds.size(), 400u);
  EXPECT_EQ(derive_seed(7, 3, 4), derive_seed(7, 3, 4));
}

TEST(Fit, SingleClassIsDegenerate) {
  auto d = separable(30, 1);
  std::fill(d.labels.begin(), d.labels.end(), 1);
  Model<float> m(small_config(d));
  try {
    fit(m, d, small_training());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(Fit, RestoredWeightsReachRecordedMinimum) {
  const auto d = separable(80, 2);
  Model<float> m(small_config(d));
  auto cfg = small_training();
  cfg.max_epochs = 8;
  cfg.patience = 2;
  cfg.adam.lr = 0.05;  // large steps make the validation curve bumpy
  const auto h = fit(m, d, cfg);
  ASSERT_EQ(h.val_loss.size(), h.epochs_run);
  ASSERT_EQ(h.train_loss.size(), h.epochs_run);
  const double best = *std::min_element(h.val_loss.begin(), h.val_loss.end());
  EXPECT_EQ(h.val_loss[h.best_epoch], best);
  const auto val = d.subset(h.validation_rows);
  EXPECT_EQ(evaluate_loss(m, val, cfg.batch_size), best);
}

TEST(Fit, NaiveIsDeterministicAndTrainsEverything) {
  const auto d = separable(60, 3);
  const auto cfg = small_training();
  Model<float> a(small_config(d)), b(small_config(d));
  a.params().set_trainable(PathTag::text, false);
  FitHooks<float> hooks;
  std::size_t steps = 0;
  hooks.before_step = [&](const StepInfo& info, const Model<float>& m) {
    ++steps;
    EXPECT_EQ(info.view, View::all);
    for (const auto& p : m.params().all())
      if (!p.buffer) EXPECT_TRUE(p.trainable) << p.name;
  };
  fit_naive(a, d, cfg, &hooks);
  fit_naive(b, d, cfg);
  EXPECT_GT(steps, 0u);
  EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
}

TEST(Fit, InterleavedTraceKeepsInvariants) {
  const auto d = separable(100, 4);
  Model<float> m(small_config(d));
  const auto cfg = small_training(Strategy::interleaved);

  std::vector<Tensor<float>> text_before, meta_before, head_before;
  std::vector<StepInfo> trace;
  FitHooks<float> hooks;
  hooks.before_step = [&](const StepInfo&, const Model<float>& model) {
    text_before = path_values(model.params(), PathTag::text);
    meta_before = path_values(model.params(), PathTag::metadata);
    head_before = path_values(model.params(), PathTag::head);
  };
  hooks.after_step = [&](const StepInfo& info, const Model<float>& model) {
    trace.push_back(info);
    const auto text = path_values(model.params(), PathTag::text);
    const auto meta = path_values(model.params(), PathTag::metadata);
    EXPECT_NE(path_values(model.params(), PathTag::head), head_before);
    if (info.view == View::a) {
      EXPECT_EQ(text, text_before) << "text moved in view A, epoch " << info.epoch;
      EXPECT_NE(meta, meta_before);
    } else {
      EXPECT_EQ(meta, meta_before) << "metadata moved in view B, epoch " << info.epoch;
      EXPECT_NE(text, text_before);
    }
  };
  std::size_t syncs = 0;
  hooks.after_sync = [&](const StepInfo&, const std::vector<Variable<float>>& a,
                         const std::vector<Variable<float>>& b) {
    ++syncs;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value(), b[i].value());
  };
  fit_interleaved(m, d, cfg, &hooks);

  ASSERT_GE(trace.size(), 20u);
  EXPECT_EQ(syncs, trace.size());
  for (const auto& s : trace)
    EXPECT_EQ(s.view, (s.batch + s.epoch) % 2 == 0 ? View::a : View::b);
  EXPECT_EQ(trace.front().view, View::a);
  const auto first_of_epoch1 =
      std::find_if(trace.begin(), trace.end(), [](const StepInfo& s) { return s.epoch == 1; });
  ASSERT_NE(first_of_epoch1, trace.end());
  EXPECT_EQ(first_of_epoch1->batch, 0u);
  EXPECT_EQ(first_of_epoch1->view, View::b);
  for (const auto& p : m.params().all())
    if (!p.buffer) EXPECT_TRUE(p.trainable) << p.name;
}

TEST(Fit, InterleavedNeedsCombinedModel) {
  auto d = separable(30, 5);
  d.schema.clear();
  d.features.clear();
  Model<float> m(small_config(d));
  EXPECT_THROW(fit_interleaved(m, d, small_training(Strategy::interleaved)), Error);
}

TEST(Fit, TransferFreezesPathsUnlessFineTuning) {
  const auto d = separable(60, 6);
  const auto cfg = small_training(Strategy::transfer);
  for (bool fine_tune : {false, true}) {
    std::vector<Tensor<float>> text0, meta0;
    FitHooks<float> hooks;
    hooks.before_step = [&](const StepInfo& info, const Model<float>& model) {
      if (info.epoch == 0 && info.batch == 0) {
        text0 = path_values(model.params(), PathTag::text);
        meta0 = path_values(model.params(), PathTag::metadata);
      }
    };
    const auto r = fit_transfer<float>(small_config(d), std::nullopt, d, cfg, fine_tune, &hooks);
    ASSERT_FALSE(text0.empty());
    // stage 5 starts from the pretrained paths
    EXPECT_EQ(text0, path_values(r.text.params(), PathTag::text));
    EXPECT_EQ(meta0, path_values(r.metadata.params(), PathTag::metadata));
    const auto text1 = path_values(r.combined.params(), PathTag::text);
    const auto meta1 = path_values(r.combined.params(), PathTag::metadata);
    if (fine_tune) {
      EXPECT_TRUE(text1 != text0 || meta1 != meta0);
    } else {
      EXPECT_EQ(text1, text0);
      EXPECT_EQ(meta1, meta0);
    }
    EXPECT_GT(r.fusion_history.epochs_run, 0u);
  }
}

TEST(Fit, LossDecreasesForEveryStrategy) {
  const auto d = separable(64, 7);
  for (auto s : {Strategy::naive, Strategy::transfer, Strategy::transfer_ft,
                 Strategy::interleaved}) {
    auto cfg = small_training(s);
    cfg.max_epochs = 50;
    cfg.patience = 49;
    const auto base = small_config(d);
    const double before = evaluate_loss(Model<float>(base), d, 64);
    std::vector<TrainingStage> stages;
    const auto m = train_model<float>(base, std::nullopt, d, cfg, &stages);
    const double after = evaluate_loss(m, d, 64);
    EXPECT_LT(after, before) << to_string(s);
    ASSERT_EQ(stages.size(), s == Strategy::transfer || s == Strategy::transfer_ft ? 3u : 1u);
    for (const auto& st : stages)
      EXPECT_LT(st.history.train_loss.back(), st.history.train_loss.front())
          << to_string(s) << " " << st.name;
  }
}

TEST(Cv, MeanIsFoldAverage) {
  const auto d = separable(40, 8);
  auto cfg = small_training();
  cfg.max_epochs = 2;
  cfg.patience = 1;
  CvOptions opt;
  opt.folds = 4;
  const auto r = run_cv(d, small_config(d), std::nullopt, cfg, opt);
  ASSERT_EQ(r.folds.size(), 4u);
  double auc = 0;
  for (const auto& f : r.folds) {
    auc += f.auc;
    for (double v : {f.auc, f.accuracy, f.precision, f.recall, f.f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_DOUBLE_EQ(r.mean.auc, auc / 4.0);
  EXPECT_TRUE(r.warnings.empty());

  opt.workers = 2;
  const auto parallel = run_cv(d, small_config(d), std::nullopt, cfg, opt);
  EXPECT_EQ(parallel.to_json(), r.to_json());
}

TEST(TrainingConfig, JsonRoundTripAndErrors) {
  auto c = small_training(Strategy::transfer_ft);
  c.adam.lr = 0.01;
  const auto back = TrainingConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(strategy_from_string("interleaved"), Strategy::interleaved);
  EXPECT_THROW(strategy_from_string("joint"), Error);
  c.patience = c.max_epochs;
  EXPECT_THROW(c.validate(), Error);
}
