// Acceptance suite: one PASS/FAIL line per criterion on stdout, failure
// details on stderr. Run all criteria or name some: `mpath_acceptance c02 c05`.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mpath/baseline.hpp"
#include "mpath/commands.hpp"
#include "mpath/graph.hpp"
#include "mpath/ingest.hpp"
#include "mpath/layers.hpp"
#include "mpath/metrics.hpp"
#include "mpath/model.hpp"
#include "mpath/synth.hpp"
#include "mpath/text.hpp"
#include "mpath/training.hpp"

#include "graph_corpus.hpp"
#include "tweet_corpus.hpp"

using namespace mpath;
namespace fs = std::filesystem;

namespace {

// Collects failed expectations and short notes for the summary line.
class Check {
 public:
  bool expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    return ok;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_.empty(); }
  const std::vector<std::string>& failures() const { return failures_; }
  std::string notes() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    return out;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = d(rng);
  return t;
}

template <typename T>
std::vector<GradCheckTarget> targets(ParameterStore<T>& store) {
  std::vector<GradCheckTarget> out;
  for (auto& p : store.all())
    if (!p.buffer) out.push_back({p.name, p.var});
  return out;
}

template <typename T>
std::vector<Tensor<T>> path_values(const ParameterStore<T>& store, PathTag path) {
  std::vector<Tensor<T>> out;
  for (const auto& p : store.all())
    if (p.path == path && !p.buffer) out.push_back(p.var.value());
  return out;
}

EncodedData encode(const SyntheticSet& s) {
  return encode_table(s.table, s.schema, fit_encoders(s.table, s.schema));
}

Batch random_batch(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Batch b;
  b.size = n;
  b.seq_len = c.seq_len;
  for (std::size_t i = 0; i < n * c.seq_len; ++i)
    b.tokens.push_back(std::int32_t(rng() % c.vocab_size));
  // a pad prefix on one row exercises masking
  for (std::size_t t = 0; t < std::min<std::size_t>(2, c.seq_len - 1); ++t) b.tokens[t] = 0;
  b.feature_dim = c.feature_dim();
  std::normal_distribution<float> nd(0, 2);
  for (std::size_t i = 0; i < n * b.feature_dim; ++i) b.features.push_back(nd(rng));
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(int(rng() % c.classes.size()));
  return b;
}

// ---------------------------------------------------------------- c01

void check_c01(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto record = [&](const std::string& what, const GradCheckResult& r, double bound) {
    c.expect(r.max_rel_error < bound, what + " max rel error " + fmt(r.max_rel_error) +
                                          " at " + r.worst_param + "[" +
                                          std::to_string(r.worst_index) + "]");
    c.expect(r.entries_checked > 0, what + " checked nothing");
  };

  {  // affine: dense with identity activation
    std::mt19937_64 rng(1);
    ParameterStore<double> store;
    Dense<double> layer(store, "head.lin", PathTag::head, 5, 3, Activation::identity, rng);
    const auto x = random_tensor({4, 5}, rng), w = random_tensor({4, 3}, rng);
    record("dense identity",
           grad_check([&](Tape<double>& t) {
             return ops::sum(t, ops::mul_const(t, layer.forward(t, Variable<double>(x)), w));
           }, targets(store), 1e-5),
           1e-6);
  }
  {  // affine: embedding lookup
    std::mt19937_64 rng(2);
    ParameterStore<double> store;
    Embedding<double> emb(store, "text.embedding", PathTag::text, random_tensor({9, 4}, rng));
    const std::vector<std::int32_t> tokens{0, 3, 5, 3, 8, 1, 2, 7, 7};
    const auto w = random_tensor({3, 3, 4}, rng);
    record("embedding",
           grad_check([&](Tape<double>& t) {
             return ops::sum(t, ops::mul_const(t, emb.forward(t, tokens, 3, 3), w));
           }, targets(store), 1e-5),
           1e-6);
  }
  for (auto act : {Activation::tanh, Activation::softmax}) {
    std::mt19937_64 rng(3);
    ParameterStore<double> store;
    Dense<double> layer(store, "head.d", PathTag::head, 5, 4, act, rng);
    const auto x = random_tensor({6, 5}, rng), w = random_tensor({6, 4}, rng);
    record("dense nonlinear",
           grad_check([&](Tape<double>& t) {
             return ops::sum(t, ops::mul_const(t, layer.forward(t, Variable<double>(x)), w));
           }, targets(store), 1e-6),
           1e-4);
  }
  {  // GRU with recurrent dropout, padding and input/state gradients
    std::mt19937_64 rng(4);
    ParameterStore<double> store;
    Gru<double> gru(store, "text.gru", PathTag::text, 3, 5, 0.5, rng);
    auto x = Variable<double>(random_tensor({3, 4, 3}, rng), true);
    auto h0 = Variable<double>(random_tensor({3, 5}, rng, 0.5), true);
    const auto w = random_tensor({3, 4, 5}, rng);
    const std::vector<std::uint8_t> valid{0, 0, 1, 1, 1, 1, 1, 1, 0, 1, 1, 1};
    auto tg = targets(store);
    tg.push_back({"x", x});
    tg.push_back({"h0", h0});
    record("gru",
           grad_check([&](Tape<double>& t) {
             std::mt19937_64 mask_rng(123);
             auto out = gru.forward(t, x, valid, h0, true, &mask_rng, true);
             return ops::sum(t, ops::mul_const(t, out.states, w));
           }, tg, 1e-6),
           1e-4);
  }
  {  // additive attention with a masked step
    std::mt19937_64 rng(5);
    ParameterStore<double> store;
    Attention<double> att(store, "text.attention", PathTag::text, 4, rng);
    auto states = Variable<double>(random_tensor({2, 5, 4}, rng), true);
    const std::vector<std::uint8_t> valid{0, 1, 1, 1, 1, 0, 0, 1, 1, 1};
    const auto w = random_tensor({2, 4}, rng);
    auto tg = targets(store);
    tg.push_back({"states", states});
    record("attention",
           grad_check([&](Tape<double>& t) {
             return ops::sum(t, ops::mul_const(t, att.forward(t, states, valid), w));
           }, tg, 1e-6),
           1e-4);
  }
  for (bool train : {true, false}) {  // batch normalization in both modes
    std::mt19937_64 rng(6);
    ParameterStore<double> store;
    BatchNorm<double> bn(store, "metadata.bn", PathTag::metadata, 3);
    store.at("metadata.bn.gamma").var.mutable_value() = random_tensor({3}, rng);
    store.at("metadata.bn.beta").var.mutable_value() = random_tensor({3}, rng);
    auto x = Variable<double>(random_tensor({6, 3}, rng), true);
    const auto w = random_tensor({6, 3}, rng);
    auto tg = targets(store);
    tg.push_back({"x", x});
    record(train ? "batchnorm train" : "batchnorm inference",
           grad_check([&](Tape<double>& t) {
             return ops::sum(t, ops::tanh(t, ops::mul_const(t, bn.forward(t, x, train), w)));
           }, tg, 1e-6),
           train ? 1e-4 : 1e-6);
  }
  // full combined model, with and without attention
  for (std::size_t seq_len : {5u, 101u}) {
    ModelConfig cfg;
    cfg.classes = {"none", "abusive", "spam"};
    cfg.vocab_size = 9;
    cfg.seq_len = seq_len;
    cfg.embedding_dim = 4;
    cfg.dense_widths = {16, 12, 10, 8, 6};
    for (std::size_t j = 0; j < 4; ++j)
      cfg.schema.push_back({"f" + std::to_string(j), FeatureGroup::UF});
    cfg.seed = 7;
    Model<double> m(cfg);
    const auto b = random_batch(cfg, seq_len > 100 ? 3 : 6, 12);
    auto r = grad_check(
        [&](Tape<double>& t) {
          std::mt19937_64 rng(3);
          auto p = m.forward(t, b, true, &rng);
          Tensor<double> pick(p.shape());
          for (std::size_t i = 0; i < b.size; ++i) pick(i, std::size_t(b.labels[i])) = 1.0;
          return ops::sum(t, ops::tanh(t, ops::mul_const(t, p, pick)));
        },
        targets(m.params()), 1e-6, seq_len > 100 ? 8 : 40, 1);
    record(seq_len > 100 ? "combined model with attention" : "combined model", r, 1e-4);
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "suite took " + fmt(secs) + " s");
  c.note("suite " + fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- c02

Dataset xor_dataset(std::size_t samples, std::uint64_t seed) {
  SynthOptions o;
  o.samples = samples;
  o.seed = seed;
  return encode(make_xor_fusion(o)).dataset;
}

ModelConfig small_model(const Dataset& d, std::size_t vocab, std::uint64_t seed) {
  ModelConfig base;
  base.classes = d.classes;
  base.vocab_size = vocab;
  base.embedding_dim = 8;
  base.dense_widths = {16, 8};
  base.seed = seed;
  return config_for(base, d);
}

std::size_t vocab_of(const Dataset& d) {
  return std::size_t(*std::max_element(d.tokens.begin(), d.tokens.end())) + 1;
}

void check_c02(Check& c) {
  const auto d = xor_dataset(200, 2);
  Model<float> m(small_model(d, vocab_of(d), 5));
  TrainingConfig cfg;
  cfg.strategy = Strategy::interleaved;
  cfg.batch_size = 32;
  cfg.max_epochs = 4;
  cfg.patience = 3;
  cfg.seed = 9;

  struct Step {
    StepInfo info;
    bool frozen_identical, active_moved, views_identical;
  };
  std::vector<Step> trace;
  std::vector<Tensor<float>> text0, meta0;
  FitHooks<float> hooks;
  hooks.before_step = [&](const StepInfo&, const Model<float>& model) {
    text0 = path_values(model.params(), PathTag::text);
    meta0 = path_values(model.params(), PathTag::metadata);
  };
  hooks.after_step = [&](const StepInfo& info, const Model<float>& model) {
    const auto text = path_values(model.params(), PathTag::text);
    const auto meta = path_values(model.params(), PathTag::metadata);
    const bool a = info.view == View::a;
    trace.push_back({info, a ? text == text0 : meta == meta0, a ? meta != meta0 : text != text0,
                     false});
  };
  hooks.after_sync = [&](const StepInfo&, const std::vector<Variable<float>>& va,
                         const std::vector<Variable<float>>& vb) {
    bool same = va.size() == vb.size() && !va.empty();
    for (std::size_t i = 0; same && i < va.size(); ++i) same = va[i].value() == vb[i].value();
    if (!trace.empty()) trace.back().views_identical = same;
  };
  fit_interleaved(m, d, cfg, &hooks);

  if (!c.expect(trace.size() >= 20, "only " + std::to_string(trace.size()) + " steps")) return;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& s = trace[i];
    const std::string at = "step " + std::to_string(i) + " (epoch " +
                           std::to_string(s.info.epoch) + ", batch " +
                           std::to_string(s.info.batch) + ")";
    const View want = (s.info.batch + s.info.epoch) % 2 == 0 ? View::a : View::b;
    c.expect(s.info.view == want, at + ": wrong view");
    c.expect(s.frozen_identical, at + ": frozen path changed");
    c.expect(s.active_moved, at + ": updated path did not move");
    c.expect(s.views_identical, at + ": views differ after step");
  }
  c.note(std::to_string(trace.size()) + " steps traced, first 20 checked");
}

// ---------------------------------------------------------------- c03

void check_c03(Check& c) {
  const auto d = xor_dataset(200, 3);
  TrainingConfig cfg;
  cfg.strategy = Strategy::transfer;
  cfg.batch_size = 32;
  cfg.max_epochs = 4;
  cfg.patience = 3;
  cfg.seed = 4;
  const auto base = small_model(d, vocab_of(d), 6);
  for (bool fine_tune : {false, true}) {
    const std::string tag = fine_tune ? "fine_tune=true" : "fine_tune=false";
    std::vector<Tensor<float>> text0, meta0;
    std::size_t steps = 0, frozen_moves = 0;
    FitHooks<float> hooks;
    hooks.before_step = [&](const StepInfo&, const Model<float>& model) {
      if (steps == 0) {
        text0 = path_values(model.params(), PathTag::text);
        meta0 = path_values(model.params(), PathTag::metadata);
      }
    };
    hooks.after_step = [&](const StepInfo&, const Model<float>& model) {
      ++steps;
      if (path_values(model.params(), PathTag::text) != text0 ||
          path_values(model.params(), PathTag::metadata) != meta0)
        ++frozen_moves;
    };
    const auto r = fit_transfer<float>(base, std::nullopt, d, cfg, fine_tune, &hooks);
    c.expect(steps > 0, tag + ": fusion stage took no steps");
    c.expect(text0 == path_values(r.text.params(), PathTag::text) &&
                 meta0 == path_values(r.metadata.params(), PathTag::metadata),
             tag + ": fusion did not start from the pretrained paths");
    const bool final_same = path_values(r.combined.params(), PathTag::text) == text0 &&
                            path_values(r.combined.params(), PathTag::metadata) == meta0;
    if (fine_tune) {
      c.expect(frozen_moves > 0 && !final_same, tag + ": no path parameter changed");
    } else {
      c.expect(frozen_moves == 0, tag + ": paths changed in " + std::to_string(frozen_moves) +
                                      " of " + std::to_string(steps) + " steps");
      c.expect(final_same, tag + ": final paths differ from pretrained");
    }
    c.note(tag + " " + std::to_string(steps) + " fusion steps");
  }
}

// ---------------------------------------------------------------- c04

void check_c04(Check& c) {
  // Scripted curve: the "model" is one scalar parameter whose value is the
  // validation loss, so restoring the snapshot must reproduce the minimum.
  const std::size_t patience = 5;
  for (std::size_t k : {0u, 3u, 17u}) {
    std::vector<double> script(60);
    for (std::size_t e = 0; e < script.size(); ++e)
      script[e] = e <= k ? 2.0 - 0.1 * double(e) : 2.0 - 0.1 * double(k) + 0.01 * double(e - k);
    if (k > 0) script[k + 2] = script[k];  // equal is not an improvement
    ParameterStore<double> store;
    auto w = store.add("head.w", PathTag::head, Tensor<double>({1}, 0.0));
    std::vector<Tensor<double>> saved;
    const auto h = run_with_early_stopping(
        script.size(), patience,
        [&](std::size_t e) {
          w.mutable_value()[0] = script[e];
          return w.value()[0];
        },
        [&] { saved = store.snapshot(); }, [&] { store.restore(saved); });
    const std::string tag = "k=" + std::to_string(k);
    c.expect(h.best_epoch == k, tag + ": best epoch " + std::to_string(h.best_epoch));
    c.expect(h.epochs_run == k + patience + 1,
             tag + ": halted after " + std::to_string(h.epochs_run) + " epochs");
    c.expect(h.stopped_early, tag + ": not flagged as stopped early");
    c.expect(w.value()[0] == script[k], tag + ": restored loss " + fmt(w.value()[0], 17));
  }

  // A real model: the restored weights reproduce the best validation loss.
  const auto d = xor_dataset(200, 4);
  Model<float> m(small_model(d, vocab_of(d), 8));
  TrainingConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = 12;
  cfg.patience = 2;
  cfg.adam.lr = 0.05;
  cfg.seed = 2;
  const auto h = fit_naive(m, d, cfg);
  const double best = *std::min_element(h.val_loss.begin(), h.val_loss.end());
  c.expect(h.val_loss[h.best_epoch] == best, "best epoch does not hold the minimum");
  c.expect(!h.stopped_early || h.epochs_run == h.best_epoch + cfg.patience + 1,
           "model run halted at the wrong epoch");
  const double restored = evaluate_loss(m, d.subset(h.validation_rows), cfg.batch_size);
  c.expect(restored == best, "restored model loss " + fmt(restored, 17) + " vs recorded " +
                                 fmt(best, 17));
  c.note("model run: best epoch " + std::to_string(h.best_epoch) + " of " +
         std::to_string(h.epochs_run));
}

// ---------------------------------------------------------------- c05

double held_out_auc(const Model<float>& m, const Dataset& test) {
  return macro_auc(m.predict(test), test.labels, test.classes.size());
}

void check_c05(Check& c) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthOptions o;
  o.samples = 5000;
  o.seed = 2024;
  const auto encoded = encode(make_xor_fusion(o));
  const auto& all = encoded.dataset;
  const auto [train_rows, test_rows] = stratified_split(all.labels, 0.2, 77);
  const auto vocab = vocab_of(all);

  auto run = [&](const FeatureGroupMask& mask, Strategy s, std::uint64_t seed) {
    const auto train = assemble(all.subset(train_rows), mask);
    const auto test = assemble(all.subset(test_rows), mask);
    ModelConfig base;
    base.classes = all.classes;
    base.vocab_size = vocab;
    base.seed = seed;
    TrainingConfig cfg;
    cfg.strategy = s;
    cfg.max_epochs = 100;
    cfg.patience = 10;
    cfg.seed = seed;
    const auto m = train_model<float>(base, std::nullopt, train, cfg);
    return held_out_auc(m, test);
  };

  const FeatureGroupMask text_only{FeatureGroup::WV};
  const FeatureGroupMask meta_only{FeatureGroup::TF, FeatureGroup::UF};
  const FeatureGroupMask both{FeatureGroup::WV, FeatureGroup::TF, FeatureGroup::UF};

  const double text_auc = run(text_only, Strategy::naive, 0);
  const double meta_auc = run(meta_only, Strategy::naive, 0);
  c.expect(text_auc <= 0.6, "text-only AUC " + fmt(text_auc));
  c.expect(meta_auc <= 0.6, "metadata-only AUC " + fmt(meta_auc));
  c.note("text " + fmt(text_auc, 3) + ", metadata " + fmt(meta_auc, 3));

  std::map<Strategy, double> seed0;
  for (auto s : {Strategy::transfer, Strategy::transfer_ft}) {
    seed0[s] = run(both, s, 0);
  }
  double naive_sum = 0, inter_sum = 0;
  const int seeds = 5;
  for (int k = 0; k < seeds; ++k) {
    const double naive = run(both, Strategy::naive, std::uint64_t(k));
    const double inter = run(both, Strategy::interleaved, std::uint64_t(k));
    if (k == 0) {
      seed0[Strategy::naive] = naive;
      seed0[Strategy::interleaved] = inter;
    }
    naive_sum += naive;
    inter_sum += inter;
  }
  for (const auto& [s, auc] : seed0) {
    c.expect(auc >= 0.95, std::string(to_string(s)) + " combined AUC " + fmt(auc));
    c.note(std::string(to_string(s)) + " " + fmt(auc, 3));
  }
  const double naive_mean = naive_sum / seeds, inter_mean = inter_sum / seeds;
  c.expect(inter_mean >= naive_mean - 0.01,
           "interleaved mean " + fmt(inter_mean) + " < naive mean " + fmt(naive_mean) + " - 0.01");
  c.note("5-seed mean naive " + fmt(naive_mean, 3) + ", interleaved " + fmt(inter_mean, 3));
  const double secs = seconds_since(t0);
  c.expect(secs < 600.0, "took " + fmt(secs) + " s");
  c.note(fmt(secs, 3) + " s");
}

// ---------------------------------------------------------------- c06

void check_c06(Check& c) {
  SynthOptions o;
  o.samples = 2000;
  o.seed = 6;
  const auto d = encode(make_independent_groups(o)).dataset;
  using G = FeatureGroup;
  const std::vector<FeatureGroupMask> masks{FeatureGroupMask{G::TF}, FeatureGroupMask{G::UF},
                                            FeatureGroupMask{G::NF},
                                            FeatureGroupMask{G::TF, G::UF, G::NF}};
  ModelConfig base;
  base.classes = d.classes;
  base.seed = 1;
  TrainingConfig cfg;
  cfg.batch_size = 64;
  cfg.max_epochs = 100;
  cfg.patience = 5;
  cfg.seed = 1;
  CvOptions cv;
  cv.folds = 5;
  const auto rows = run_ablation(d, masks, base, std::nullopt, cfg, cv);
  const double all = rows.back().report.mean.auc;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double single = rows[i].report.mean.auc;
    c.expect(all >= single - 0.01,
             "All " + fmt(all) + " < " + rows[i].mask.to_string() + " " + fmt(single) + " - 0.01");
    c.note(rows[i].mask.to_string() + " " + fmt(single, 3));
  }
  c.note("All " + fmt(all, 3));
}

// ---------------------------------------------------------------- c07

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return wins / pairs;
}

void check_c07(Check& c) {
  std::mt19937_64 rng(7);
  std::size_t tied_cases = 0;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 300;
    const int levels = 1 + int(rng() % 10);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? double(rng() % levels) / levels
                       : std::uniform_real_distribution<double>(0, 1)(rng);
      y[i] = int(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    tied_cases += trial % 2;
    worst = std::max(worst, std::abs(roc_auc(s, y) - pair_count_auc(s, y)));
  }
  c.expect(worst <= 1e-12, "AUC differs from pair counting by " + fmt(worst));
  c.note("200 AUC cases (" + std::to_string(tied_cases) + " with ties), max diff " + fmt(worst));

  // 3 classes; rows are true labels, columns predictions:
  //   [[3, 1, 0], [1, 2, 1], [0, 0, 2]]
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 2, 2};
  const std::vector<int> preds{0, 0, 0, 1, 0, 1, 1, 2, 2, 2};
  const auto s = prf1(preds, labels, 3);
  const double p[] = {3.0 / 4.0, 2.0 / 3.0, 2.0 / 3.0}, r[] = {3.0 / 4.0, 2.0 / 4.0, 2.0 / 2.0};
  const double w[] = {0.4, 0.4, 0.2};
  double wp = 0, wr = 0, wf = 0;
  for (int k = 0; k < 3; ++k) {
    wp += w[k] * p[k];
    wr += w[k] * r[k];
    wf += w[k] * 2 * p[k] * r[k] / (p[k] + r[k]);
  }
  c.expect(std::abs(s.precision - wp) < 1e-15, "weighted precision " + fmt(s.precision, 17));
  c.expect(std::abs(s.recall - wr) < 1e-15, "weighted recall " + fmt(s.recall, 17));
  c.expect(std::abs(s.f1 - wf) < 1e-15, "weighted F1 " + fmt(s.f1, 17));
  c.expect(s.accuracy == 0.7, "accuracy " + fmt(s.accuracy, 17));

  std::size_t unequal = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 100, k = 2 + rng() % 5;
    std::vector<int> yt(n), yp(n);
    for (std::size_t i = 0; i < n; ++i) {
      yt[i] = int(rng() % k);
      yp[i] = int(rng() % k);
    }
    const auto q = prf1(yp, yt, k);
    unequal += q.recall != q.accuracy;
  }
  c.expect(unequal == 0, std::to_string(unequal) + " cases with recall != accuracy");
}

// ---------------------------------------------------------------- c08

std::vector<double> dense(const SparseRow& row, std::size_t terms) {
  std::vector<double> out(terms, 0.0);
  for (const auto& [k, v] : row) out[k] = v;
  return out;
}

void check_c08(Check& c) {
  const std::vector<TokenList> docs{{"free", "money", "now"},  {"free", "free", "offer"},
                                    {"money", "offer", "win"}, {"meeting", "at", "noon"},
                                    {"lunch", "at", "noon"},   {"free", "lunch", "meeting"}};
  const std::vector<int> labels{1, 1, 1, 0, 0, 0};
  const auto tfidf = TfidfModel::fit(docs);
  const auto rows = tfidf.transform(docs);

  // TF-IDF by hand: idf = ln((1 + N) / (1 + df)) + 1, raw counts, L2 rows.
  const auto& terms = tfidf.terms();
  double worst = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    std::vector<double> expect(terms.size(), 0.0);
    for (std::size_t k = 0; k < terms.size(); ++k) {
      double tf = 0, df = 0;
      for (const auto& tok : docs[i]) tf += tok == terms[k];
      for (const auto& doc : docs) df += std::count(doc.begin(), doc.end(), terms[k]) > 0;
      expect[k] = tf * (std::log((1.0 + 6.0) / (1.0 + df)) + 1.0);
    }
    double norm = 0;
    for (double v : expect) norm += v * v;
    norm = std::sqrt(norm);
    const auto got = dense(rows[i], terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k)
      worst = std::max(worst, std::abs(got[k] - expect[k] / norm));
  }
  c.expect(worst <= 1e-12, "TF-IDF differs from hand arithmetic by " + fmt(worst));

  // Bayes rule with plain products over the dense weights.
  const auto nb = NaiveBayes::fit(rows, labels, 2, tfidf.size());
  std::vector<std::vector<double>> train;
  for (const auto& r : rows) train.push_back(dense(r, terms.size()));
  auto brute = [&](const std::vector<double>& doc) {
    std::vector<double> joint(2);
    for (int cls = 0; cls < 2; ++cls) {
      double members = 0, total = 0;
      std::vector<double> per_term(terms.size(), 0.0);
      for (std::size_t i = 0; i < train.size(); ++i) {
        if (labels[i] != cls) continue;
        members += 1;
        for (std::size_t k = 0; k < terms.size(); ++k) {
          per_term[k] += train[i][k];
          total += train[i][k];
        }
      }
      double prob = members / double(train.size());
      for (std::size_t k = 0; k < terms.size(); ++k)
        prob *= std::pow((per_term[k] + 1.0) / (total + double(terms.size())), doc[k]);
      joint[cls] = prob;
    }
    const double z = joint[0] + joint[1];
    return std::vector<double>{joint[0] / z, joint[1] / z};
  };
  double nb_worst = 0;
  std::size_t predictions_differ = 0;
  std::vector<TokenList> queries = docs;
  queries.push_back({"free", "money"});
  queries.push_back({"noon", "meeting", "free"});
  queries.push_back({});
  for (const auto& q : queries) {
    const auto row = tfidf.transform(q);
    const auto expect = brute(dense(row, terms.size()));
    const auto got = nb.posteriors(row);
    for (int k = 0; k < 2; ++k) nb_worst = std::max(nb_worst, std::abs(got[k] - expect[k]));
    const int brute_pred = expect[1] > expect[0] ? 1 : 0;
    predictions_differ += nb.predict(row) != brute_pred;
  }
  c.expect(predictions_differ == 0, std::to_string(predictions_differ) + " predictions differ");
  c.expect(nb_worst <= 1e-12, "posteriors differ from brute force by " + fmt(nb_worst));
  c.note("TF-IDF max diff " + fmt(worst) + ", posterior max diff " + fmt(nb_worst));
}

// ---------------------------------------------------------------- c09

using testing_corpus::adjacency;

double distance_from_top_eigenspace(const Eigen::MatrixXd& m, const std::vector<double>& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const auto& vals = es.eigenvalues();
  const double top = vals(vals.size() - 1);
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(v.size());
  for (Eigen::Index i = 0; i < vals.size(); ++i)
    if (vals(i) >= top - 1e-9 * std::max(1.0, top)) {
      const auto e = es.eigenvectors().col(i);
      proj += e * e.dot(v);
    }
  return (v - proj).norm();
}

std::vector<double> perron_vector(const SocialGraph& g) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(adjacency(g).transpose());
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  if (v.sum() < 0) v = -v;
  v /= v.norm();
  return {v.data(), v.data() + v.size()};
}

SocialGraph from_pairs(std::initializer_list<std::pair<const char*, const char*>> edges) {
  SocialGraph g;
  for (auto [a, b] : edges) g.add_edge(a, b);
  return g;
}

void check_c09(Check& c) {
  std::size_t hits_checked = 0, slow_gap = 0;
  double hits_worst = 0;
  for (const auto& g : testing_corpus::random_digraphs()) {
    const double ratio = testing_corpus::hits_gap_ratio(g);
    const auto s = hits(g);
    const auto a = adjacency(g);
    const double err = std::max(distance_from_top_eigenspace(a.transpose() * a, s.authority),
                                distance_from_top_eigenspace(a * a.transpose(), s.hub));
    if (testing_corpus::well_conditioned(ratio)) {
      ++hits_checked;
      hits_worst = std::max(hits_worst, err);
    } else {
      // 100 power iterations cannot beat ratio^100 on these graphs
      ++slow_gap;
      c.expect(err < 10 * std::pow(ratio, 100.0),
               "slow-gap HITS error " + fmt(err) + " above the power-iteration rate");
    }
  }
  c.expect(hits_worst < 1e-6, "HITS max error " + fmt(hits_worst));

  double eig_worst = 0;
  std::size_t eig_checked = 0;
  for (const auto& g : testing_corpus::strongly_connected_digraphs()) {
    const auto x = eigenvector_centrality(g);
    const auto ref = perron_vector(g);
    for (std::size_t i = 0; i < x.size(); ++i) eig_worst = std::max(eig_worst, std::abs(x[i] - ref[i]));
    ++eig_checked;
  }
  c.expect(eig_worst < 1e-6, "eigenvector max error " + fmt(eig_worst));

  // hand enumeration
  auto tri = from_pairs({{"a", "b"}, {"b", "c"}, {"c", "a"}});
  auto star = from_pairs({{"c", "x"}, {"c", "y"}, {"c", "z"}});
  auto path = from_pairs({{"a", "b"}, {"b", "c"}});
  SocialGraph k4;
  for (const char* a : {"a", "b", "c", "d"})
    for (const char* b : {"a", "b", "c", "d"})
      if (std::string(a) != b) k4.add_edge(a, b);
  struct Case {
    const char* name;
    const SocialGraph& g;
    const char* node;
    double closeness, clustering;
  };
  const Case cases[] = {
      {"triangle", tri, "a", 2.0 / 3.0, 1.0},  {"triangle", tri, "b", 2.0 / 3.0, 1.0},
      {"star", star, "c", 1.0, 0.0},           {"star", star, "x", 0.0, 0.0},
      {"path", path, "a", 2.0 / 3.0, 0.0},     {"path", path, "b", 0.5, 0.0},
      {"path", path, "c", 0.0, 0.0},           {"complete", k4, "a", 1.0, 1.0},
      {"complete", k4, "d", 1.0, 1.0},
  };
  for (const auto& k : cases) {
    const auto v = k.g.index(k.node);
    const double cl = closeness(k.g, v), cc = clustering_coefficient(k.g, v);
    c.expect(cl == k.closeness, std::string(k.name) + " closeness(" + k.node + ") = " + fmt(cl, 17));
    c.expect(cc == k.clustering, std::string(k.name) + " clustering(" + k.node + ") = " + fmt(cc, 17));
  }
  c.note("HITS " + std::to_string(hits_checked) + " graphs max err " + fmt(hits_worst, 2) + " (+" +
         std::to_string(slow_gap) + " slow-gap at rate bound); eigenvector " +
         std::to_string(eig_checked) + " graphs max err " + fmt(eig_worst, 2));
}

// ---------------------------------------------------------------- c10

void check_c10(Check& c) {
  const auto corpus = testing_corpus::tweet_like_corpus(2000, 2024);
  std::vector<TokenList> docs;
  std::vector<std::size_t> counts;
  for (const auto& text : corpus) {
    docs.push_back(tokenize(text));
    counts.push_back(docs.back().size());
  }
  // nearest-rank 95th percentile by sorting
  auto sorted = counts;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t rank = std::size_t(std::ceil(0.95 * double(sorted.size())));
  const std::size_t p95 = sorted[rank - 1];
  const auto spec = choose_seq_len(counts);
  c.expect(p95 == 30, "corpus 95th percentile is " + std::to_string(p95));
  c.expect(spec.seq_len == 30, "choose_seq_len returned " + std::to_string(spec.seq_len));

  const auto vocab = Vocabulary::build(docs);
  std::map<std::string, std::size_t> freq;
  for (const auto& d : docs)
    for (const auto& t : d) ++freq[t];
  std::size_t hapax = 0, indexed_hapax = 0, missing = 0;
  for (const auto& [tok, n] : freq) {
    if (n == 1) {
      ++hapax;
      indexed_hapax += vocab.contains(tok) || vocab.index(tok) != Vocabulary::kUnknown;
    } else {
      missing += !vocab.contains(tok);
    }
  }
  c.expect(hapax > 0, "corpus has no hapax tokens");
  c.expect(indexed_hapax == 0, std::to_string(indexed_hapax) + " hapax tokens indexed");
  c.expect(missing == 0, std::to_string(missing) + " repeated tokens missing");

  // GRU final state in inference mode: the same post padded to 30 and to 37
  // steps gives bit-identical text features.
  ModelConfig cfg;
  cfg.kind = ModelKind::text;
  cfg.classes = {"normal", "abusive"};
  cfg.vocab_size = vocab.size();
  cfg.embedding_dim = 16;
  cfg.seq_len = 30;
  cfg.seed = 10;
  Model<float> short_model(cfg);
  cfg.seq_len = 37;
  Model<float> long_model(cfg);
  long_model.copy_path_from(short_model, PathTag::text);

  Batch a, b;
  a.seq_len = 30;
  b.seq_len = 37;
  for (std::size_t i = 0; a.size < 64; ++i) {
    if (docs[i].size() > 30) continue;  // longer posts are truncated differently
    ++a.size;
    const auto ta = encode_pad(docs[i], vocab, SequenceSpec{30});
    const auto tb = encode_pad(docs[i], vocab, SequenceSpec{37});
    a.tokens.insert(a.tokens.end(), ta.begin(), ta.end());
    b.tokens.insert(b.tokens.end(), tb.begin(), tb.end());
  }
  b.size = a.size;
  Tape<float> tape(false);
  const auto fa = short_model.text_features(tape, a, false, nullptr);
  const auto fb = long_model.text_features(tape, b, false, nullptr);
  c.expect(fa.value() == fb.value(), "pad-prefixed text features differ");
  c.note("p95 " + std::to_string(p95) + ", " + std::to_string(hapax) + " hapax tokens, vocab " +
         std::to_string(vocab.size()));
}

// ---------------------------------------------------------------- c11

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_c11(Check& c) {
  const auto dir = fs::temp_directory_path() / "mpath_acceptance_c11";
  fs::remove_all(dir);
  run_command("synth", {{"kind", "xor"}, {"samples", 300}, {"seed", 11}, {"out", (dir / "data").string()}});
  auto options = [&](const char* out) {
    return nlohmann::json{{"dataset", (dir / "data" / "data.csv").string()},
                          {"schema", (dir / "data" / "schema.json").string()},
                          {"strategy", "interleaved"},
                          {"embedding_dim", 16},
                          {"dense_widths", {32, 16}},
                          {"batch_size", 32},
                          {"max_epochs", 5},
                          {"patience", 2},
                          {"folds", 3},
                          {"workers", 2},
                          {"seed", 42},
                          {"out", (dir / out).string()}};
  };
  const auto r1 = run_command("train", options("run1"));
  const auto r2 = run_command("train", options("run2"));
  c.expect(r1["validation"] == r2["validation"], "validation metrics differ");
  c.expect(r1["cv"] == r2["cv"], "cross-validation metrics differ");
  c.expect(r1["histories"] == r2["histories"], "training histories differ");
  const auto ck1 = file_bytes(dir / "run1" / "model.ckpt");
  const auto ck2 = file_bytes(dir / "run2" / "model.ckpt");
  c.expect(!ck1.empty(), "no checkpoint written");
  c.expect(ck1 == ck2, "checkpoints differ");
  c.note("checkpoint " + std::to_string(ck1.size()) + " bytes, validation AUC " +
         fmt(r1["validation"]["auc"].get<double>(), 3));
  fs::remove_all(dir);
}

struct Criterion {
  const char* id;
  const char* title;
  std::function<void(Check&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"c01", "gradient suite", check_c01},
      {"c02", "interleaved training invariants", check_c02},
      {"c03", "transfer learning freeze", check_c03},
      {"c04", "early stopping with restore", check_c04},
      {"c05", "xor fusion task", check_c05},
      {"c06", "ablation monotonicity", check_c06},
      {"c07", "metric oracles", check_c07},
      {"c08", "naive bayes and tf-idf oracles", check_c08},
      {"c09", "graph metric oracles", check_c09},
      {"c10", "pipeline contracts", check_c10},
      {"c11", "reproducible training", check_c11},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    const bool known = std::any_of(criteria().begin(), criteria().end(),
                                   [&](const Criterion& c) { return w == c.id; });
    if (!known) {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& crit : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), crit.id) == wanted.end())
      continue;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      crit.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    std::cout << (check.ok() ? "PASS " : "FAIL ") << crit.id << ' ' << crit.title << " ("
              << fmt(secs, 3) << " s)";
    if (!check.notes().empty()) std::cout << ": " << check.notes();
    std::cout << std::endl;
    for (const auto& f : check.failures()) std::cerr << "  " << crit.id << ": " << f << '\n';
    failed += !check.ok();
  }
  return failed == 0 ? 0 : 1;
}
