#include "mpath/layers.hpp"

#include <cmath>

namespace mpath {

template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor<T> w({fan_in, fan_out});
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
  return w;
}

template <typename T>
Dense<T>::Dense(ParameterStore<T>& store, const std::string& name, PathTag path,
                std::size_t in, std::size_t out, Activation activation,
                std::mt19937_64& rng)
    : in_(in), out_(out), activation_(activation) {
  require(in > 0 && out > 0, ErrorKind::config,
          "dense layer " + name + " needs positive widths");
  w_ = store.add(name + ".W", path, glorot_uniform<T>(in, out, rng));
  b_ = store.add(name + ".b", path, Tensor<T>({out}));
}

template <typename T>
Variable<T> Dense<T>::forward(Tape<T>& tape, const Variable<T>& x) const {
  auto y = ops::add_bias(tape, ops::matmul(tape, x, w_), b_);
  switch (activation_) {
    case Activation::identity: return y;
    case Activation::tanh: return ops::tanh(tape, y);
    case Activation::softmax: return ops::softmax(tape, y);
  }
  return y;
}

template <typename T>
Embedding<T>::Embedding(ParameterStore<T>& store, const std::string& name,
                        PathTag path, Tensor<T> table) {
  require(table.rank() == 2 && table.dim(0) >= 2, ErrorKind::config,
          "embedding table must be [V x d] with V >= 2");
  table_ = store.add(name + ".table", path, std::move(table));
}

template <typename T>
Variable<T> Embedding<T>::forward(Tape<T>& tape,
                                  std::span<const std::int32_t> tokens,
                                  std::size_t batch, std::size_t steps) const {
  require(tokens.size() == batch * steps, ErrorKind::dimension,
          "embedding: " + std::to_string(tokens.size()) + " tokens for [" +
              std::to_string(batch) + "x" + std::to_string(steps) + "]");
  auto rows = ops::gather_rows(tape, table_, tokens);
  return ops::reshape(tape, rows, Shape{batch, steps, dim()});
}

template <typename T>
Gru<T>::Gru(ParameterStore<T>& store, const std::string& name, PathTag path,
            std::size_t input_dim, std::size_t units, double recurrent_dropout,
            std::mt19937_64& rng)
    : input_dim_(input_dim), units_(units), dropout_(recurrent_dropout) {
  require(input_dim > 0 && units > 0, ErrorKind::config,
          "GRU needs positive input and unit counts");
  require(recurrent_dropout >= 0.0 && recurrent_dropout < 1.0,
          ErrorKind::config, "recurrent dropout must lie in [0, 1)");
  w_z_ = store.add(name + ".W_z", path, glorot_uniform<T>(input_dim, units, rng));
  w_r_ = store.add(name + ".W_r", path, glorot_uniform<T>(input_dim, units, rng));
  w_h_ = store.add(name + ".W_h", path, glorot_uniform<T>(input_dim, units, rng));
  u_z_ = store.add(name + ".U_z", path, glorot_uniform<T>(units, units, rng));
  u_r_ = store.add(name + ".U_r", path, glorot_uniform<T>(units, units, rng));
  u_h_ = store.add(name + ".U_h", path, glorot_uniform<T>(units, units, rng));
  b_z_ = store.add(name + ".b_z", path, Tensor<T>({units}));
  b_r_ = store.add(name + ".b_r", path, Tensor<T>({units}));
  b_h_ = store.add(name + ".b_h", path, Tensor<T>({units}));
}

template <typename T>
GruOutput<T> Gru<T>::forward(Tape<T>& tape, const Variable<T>& x,
                             const std::vector<std::uint8_t>& valid,
                             const Variable<T>& h0, bool train,
                             std::mt19937_64* rng, bool keep_states) const {
  const auto& sx = x.shape();
  require(sx.size() == 3 && sx[2] == input_dim_, ErrorKind::dimension,
          "gru: input " + shape_str(sx) + " does not match input dim " +
              std::to_string(input_dim_));
  const std::size_t batch = sx[0], steps = sx[1];
  require(steps >= 1, ErrorKind::contract, "gru: empty sequence (T = 0)");
  require(h0.shape() == Shape{batch, units_}, ErrorKind::dimension,
          "gru: initial state " + shape_str(h0.shape()) + " for batch " +
              std::to_string(batch));
  require(valid.empty() || valid.size() == batch * steps, ErrorKind::dimension,
          "gru: validity mask has wrong length");

  const bool dropout = train && dropout_ > 0.0;
  Tensor<T> mask;
  if (dropout) {
    require(rng != nullptr, ErrorKind::contract, "gru: dropout needs an RNG");
    mask = Tensor<T>({batch, units_});
    std::bernoulli_distribution keep(1.0 - dropout_);
    const T scale = static_cast<T>(1.0 / (1.0 - dropout_));
    for (auto& m : mask.values()) m = keep(*rng) ? scale : T(0);
  }

  GruOutput<T> out;
  std::vector<Variable<T>> states;
  if (keep_states) states.reserve(steps);
  Variable<T> h = h0;
  std::vector<std::uint8_t> step_valid(batch, 1);
  for (std::size_t t = 0; t < steps; ++t) {
    auto xt = ops::slice_time(tape, x, t);
    auto hr = dropout ? ops::mul_const(tape, h, mask) : h;
    auto z = ops::sigmoid(
        tape, ops::add_bias(tape,
                            ops::add(tape, ops::matmul(tape, xt, w_z_),
                                     ops::matmul(tape, hr, u_z_)),
                            b_z_));
    auto r = ops::sigmoid(
        tape, ops::add_bias(tape,
                            ops::add(tape, ops::matmul(tape, xt, w_r_),
                                     ops::matmul(tape, hr, u_r_)),
                            b_r_));
    auto c = ops::tanh(
        tape,
        ops::add_bias(tape,
                      ops::add(tape, ops::matmul(tape, xt, w_h_),
                               ops::matmul(tape, ops::mul(tape, r, hr), u_h_)),
                      b_h_));
    auto next = ops::add(tape, ops::mul(tape, ops::affine(tape, z, T(-1), T(1)), h),
                         ops::mul(tape, z, c));
    if (!valid.empty()) {
      bool all = true;
      for (std::size_t b = 0; b < batch; ++b) {
        step_valid[b] = valid[b * steps + t];
        all = all && step_valid[b];
      }
      if (!all) next = ops::where_rows(tape, step_valid, next, h);
    }
    h = next;
    if (keep_states) states.push_back(h);
  }
  out.last = h;
  if (keep_states) out.states = ops::stack_time(tape, states);
  return out;
}

template <typename T>
Attention<T>::Attention(ParameterStore<T>& store, const std::string& name,
                        PathTag path, std::size_t units, std::mt19937_64& rng)
    : units_(units) {
  w_a_ = store.add(name + ".W_a", path, glorot_uniform<T>(units, units, rng));
  v_a_ = store.add(name + ".v_a", path, glorot_uniform<T>(units, 1, rng));
}

template <typename T>
Variable<T> Attention<T>::weights(Tape<T>& tape, const Variable<T>& states,
                                  const std::vector<std::uint8_t>& valid) const {
  const auto& s = states.shape();
  require(s.size() == 3 && s[2] == units_, ErrorKind::dimension,
          "attention: states " + shape_str(s) + " for " +
              std::to_string(units_) + " units");
  const std::size_t batch = s[0], steps = s[1];
  auto flat = ops::reshape(tape, states, Shape{batch * steps, units_});
  auto proj = ops::tanh(tape, ops::matmul(tape, flat, w_a_));
  auto scores = ops::reshape(tape, ops::matmul(tape, proj, v_a_),
                             Shape{batch, steps});
  std::vector<std::uint8_t> mask =
      valid.empty() ? std::vector<std::uint8_t>(batch * steps, 1) : valid;
  return ops::masked_softmax(tape, scores, mask);
}

template <typename T>
Variable<T> Attention<T>::forward(Tape<T>& tape, const Variable<T>& states,
                                  const std::vector<std::uint8_t>& valid) const {
  return ops::weighted_sum_time(tape, weights(tape, states, valid), states);
}

template <typename T>
BatchNorm<T>::BatchNorm(ParameterStore<T>& store, const std::string& name,
                        PathTag path, std::size_t features) {
  require(features > 0, ErrorKind::config, "batch norm needs >= 1 feature");
  gamma_ = store.add(name + ".gamma", path, Tensor<T>({features}, T(1)));
  beta_ = store.add(name + ".beta", path, Tensor<T>({features}));
  running_mean_ =
      store.add(name + ".running_mean", path, Tensor<T>({features}), true);
  running_var_ =
      store.add(name + ".running_var", path, Tensor<T>({features}, T(1)), true);
}

template <typename T>
Variable<T> BatchNorm<T>::forward(Tape<T>& tape, const Variable<T>& x,
                                  bool train) const {
  const T eps = static_cast<T>(kEpsilon);
  Variable<T> xhat;
  if (train) {
    ops::BatchMoments moments;
    xhat = ops::batch_normalize(tape, x, eps, &moments);
    auto& rm = running_mean_.mutable_value();
    auto& rv = running_var_.mutable_value();
    const T m = static_cast<T>(kMomentum);
    for (std::size_t j = 0; j < rm.size(); ++j) {
      rm[j] = m * rm[j] + (T(1) - m) * static_cast<T>(moments.mean[j]);
      rv[j] = m * rv[j] + (T(1) - m) * static_cast<T>(moments.var[j]);
    }
  } else {
    xhat = ops::normalize_fixed(tape, x, running_mean_.value(),
                                running_var_.value(), eps);
  }
  return ops::add_bias(tape, ops::scale_columns(tape, xhat, gamma_), beta_);
}

template Tensor<float> glorot_uniform(std::size_t, std::size_t,
                                      std::mt19937_64&);
template Tensor<double> glorot_uniform(std::size_t, std::size_t,
                                       std::mt19937_64&);
template class Dense<float>;
template class Dense<double>;
template class Embedding<float>;
template class Embedding<double>;
template class Gru<float>;
template class Gru<double>;
template class Attention<float>;
template class Attention<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;

}  // namespace mpath
