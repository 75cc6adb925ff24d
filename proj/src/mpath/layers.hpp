#pragma once

// Neural layers of the text and metadata paths. Each layer registers its
// parameters in a ParameterStore at construction and holds shared handles to
// them, so the store and the layer always see the same values.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mpath/params.hpp"
#include "mpath/tensor.hpp"

namespace mpath {

enum class Activation { identity, tanh, softmax };

// Glorot-uniform [fan_in x fan_out] matrix drawn from `rng`.
template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out,
                         std::mt19937_64& rng);

template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore<T>& store, const std::string& name, PathTag path,
        std::size_t in, std::size_t out, Activation activation,
        std::mt19937_64& rng);

  Variable<T> forward(Tape<T>& tape, const Variable<T>& x) const;

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  const Variable<T>& weight() const { return w_; }
  const Variable<T>& bias() const { return b_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  Activation activation_ = Activation::identity;
  Variable<T> w_, b_;
};

template <typename T>
class Embedding {
 public:
  Embedding() = default;
  // `table` is [V x d]; row 0 is the padding row.
  Embedding(ParameterStore<T>& store, const std::string& name, PathTag path,
            Tensor<T> table);

  // tokens is a row-major [batch x steps] index matrix -> [batch x steps x d].
  Variable<T> forward(Tape<T>& tape, std::span<const std::int32_t> tokens,
                      std::size_t batch, std::size_t steps) const;

  std::size_t vocab_size() const { return table_.shape()[0]; }
  std::size_t dim() const { return table_.shape()[1]; }
  const Variable<T>& table() const { return table_; }

 private:
  Variable<T> table_;
};

template <typename T>
struct GruOutput {
  Variable<T> states;  // [batch x T x units]; null unless requested
  Variable<T> last;    // [batch x units]
};

// Cho-style GRU:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   c = tanh(x W_h + (r * h) U_h + b_h)
//   h' = (1 - z) * h + z * c
// With recurrent dropout the recurrent terms see h * m, where m is one
// inverted-dropout mask per sample reused at every step. Steps whose `valid`
// flag is 0 (padding) carry the previous state through unchanged.
template <typename T>
class Gru {
 public:
  Gru() = default;
  Gru(ParameterStore<T>& store, const std::string& name, PathTag path,
      std::size_t input_dim, std::size_t units, double recurrent_dropout,
      std::mt19937_64& rng);

  // x: [batch x T x d]; valid: [batch x T] flags (empty = all valid);
  // h0: [batch x units]. `rng` is only used when train && dropout > 0.
  GruOutput<T> forward(Tape<T>& tape, const Variable<T>& x,
                       const std::vector<std::uint8_t>& valid,
                       const Variable<T>& h0, bool train, std::mt19937_64* rng,
                       bool keep_states) const;

  std::size_t units() const { return units_; }
  std::size_t input_dim() const { return input_dim_; }
  double recurrent_dropout() const { return dropout_; }

 private:
  std::size_t input_dim_ = 0, units_ = 0;
  double dropout_ = 0.0;
  Variable<T> w_z_, w_r_, w_h_, u_z_, u_r_, u_h_, b_z_, b_r_, b_h_;
};

// Additive attention: e_t = v_a . tanh(h_t W_a), weights = masked softmax over
// t, output = sum_t weight_t h_t.
template <typename T>
class Attention {
 public:
  Attention() = default;
  Attention(ParameterStore<T>& store, const std::string& name, PathTag path,
            std::size_t units, std::mt19937_64& rng);

  Variable<T> forward(Tape<T>& tape, const Variable<T>& states,
                      const std::vector<std::uint8_t>& valid) const;
  // Attention weights [batch x T] for inspection.
  Variable<T> weights(Tape<T>& tape, const Variable<T>& states,
                      const std::vector<std::uint8_t>& valid) const;

 private:
  std::size_t units_ = 0;
  Variable<T> w_a_, v_a_;
};

template <typename T>
class BatchNorm {
 public:
  static constexpr double kMomentum = 0.99;
  static constexpr double kEpsilon = 1e-5;

  BatchNorm() = default;
  BatchNorm(ParameterStore<T>& store, const std::string& name, PathTag path,
            std::size_t features);

  // train: normalise with batch moments and fold them into the running
  // statistics; otherwise normalise with the running statistics.
  Variable<T> forward(Tape<T>& tape, const Variable<T>& x, bool train) const;

  const Variable<T>& gamma() const { return gamma_; }
  const Variable<T>& beta() const { return beta_; }
  const Variable<T>& running_mean() const { return running_mean_; }
  const Variable<T>& running_var() const { return running_var_; }

 private:
  Variable<T> gamma_, beta_;
  // Mutated from const forward(); these are buffers, not parameters.
  mutable Variable<T> running_mean_, running_var_;
};

extern template class Dense<float>;
extern template class Dense<double>;
extern template class Embedding<float>;
extern template class Embedding<double>;
extern template class Gru<float>;
extern template class Gru<double>;
extern template class Attention<float>;
extern template class Attention<double>;
extern template class BatchNorm<float>;
extern template class BatchNorm<double>;

}  // namespace mpath
