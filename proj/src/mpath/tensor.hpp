#pragma once

// Dense row-major tensors with a reverse-mode gradient tape.
//
// A Tensor is a plain value (shape + data). A Variable is a shared handle to a
// node holding a value and, when it participates in differentiation, a
// same-shape gradient accumulator. Operations take the Tape explicitly and
// record a backward closure only when recording is on and at least one input
// requires a gradient.

#include <algorithm>
#include <type_traits>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mpath/error.hpp"

namespace mpath {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

template <typename T>
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    require(shape_size(shape_) == data_.size(), ErrorKind::dimension,
            "tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  // 2-D access; the tensor must be rank 2.
  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  T item() const {
    require(data_.size() == 1, ErrorKind::contract,
            "item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  void reshape(Shape shape) {
    require(shape_size(shape) == data_.size(), ErrorKind::dimension,
            "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    shape_ = std::move(shape);
  }

  // Bitwise-style equality (same shape, identical values).
  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
struct VariableNode {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool has_grad = false;
};

template <typename T>
class Variable {
 public:
  Variable() = default;
  explicit Variable(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<VariableNode<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  bool same_node(const Variable& other) const noexcept {
    return node_ == other.node_;
  }

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const noexcept { return node_->has_grad; }
  // Gradient accumulator; zero-filled on first access.
  Tensor<T>& grad() const {
    if (!node_->has_grad) {
      node_->grad = Tensor<T>(node_->value.shape());
      node_->has_grad = true;
    }
    return node_->grad;
  }
  void zero_grad() const {
    if (node_->has_grad) node_->grad.fill(T(0));
  }

 private:
  std::shared_ptr<VariableNode<T>> node_;
};

template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }

  bool tracks(std::initializer_list<const Variable<T>*> inputs) const {
    if (!recording_) return false;
    for (const auto* v : inputs)
      if (v->requires_grad()) return true;
    return false;
  }

  void record(std::function<void()> backward_fn) {
    entries_.push_back(std::move(backward_fn));
  }

  // Seeds d(loss)/d(loss) = 1 and runs the recorded closures in exact reverse
  // order. Gradients accumulate; callers zero them between steps.
  void backward(const Variable<T>& loss);

  // Drops every closure, releasing the intermediates they captured.
  void clear() { entries_.clear(); }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> entries_;
};

// Accumulates `src` into the gradient of `v`.
template <typename T>
void accumulate_grad(const Variable<T>& v, std::span<const std::type_identity_t<T>> src);

// C (+)= op(A) * op(B) on row-major buffers.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, const T* b, T* c, bool accumulate);

namespace ops {

template <typename T>
Variable<T> matmul(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b);

template <typename T>
Variable<T> add(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b);
template <typename T>
Variable<T> sub(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b);
template <typename T>
Variable<T> mul(Tape<T>& tape, const Variable<T>& a, const Variable<T>& b);

// Elementwise product with a constant (no gradient flows into `mask`).
template <typename T>
Variable<T> mul_const(Tape<T>& tape, const Variable<T>& a,
                      const Tensor<T>& mask);

// alpha * a + beta.
template <typename T>
Variable<T> affine(Tape<T>& tape, const Variable<T>& a, T alpha, T beta);

// x[..., n] + b[n], broadcast over all leading axes.
template <typename T>
Variable<T> add_bias(Tape<T>& tape, const Variable<T>& x,
                     const Variable<T>& b);
// x[..., n] * g[n], broadcast over all leading axes.
template <typename T>
Variable<T> scale_columns(Tape<T>& tape, const Variable<T>& x,
                          const Variable<T>& g);

template <typename T>
Variable<T> sigmoid(Tape<T>& tape, const Variable<T>& x);
template <typename T>
Variable<T> tanh(Tape<T>& tape, const Variable<T>& x);

// Softmax over the trailing axis with max subtraction.
template <typename T>
Variable<T> softmax(Tape<T>& tape, const Variable<T>& x);

// Softmax over axis 1 of x[B x T]; positions with mask == 0 get exactly 0.
template <typename T>
Variable<T> masked_softmax(Tape<T>& tape, const Variable<T>& x,
                           const std::vector<std::uint8_t>& mask);

template <typename T>
Variable<T> gather_rows(Tape<T>& tape, const Variable<T>& table,
                        std::span<const std::int32_t> indices);

template <typename T>
Variable<T> concat_last(Tape<T>& tape, const Variable<T>& a,
                        const Variable<T>& b);

template <typename T>
Variable<T> reshape(Tape<T>& tape, const Variable<T>& x, Shape shape);

// x[B x T x d] -> x[:, t, :] as [B x d].
template <typename T>
Variable<T> slice_time(Tape<T>& tape, const Variable<T>& x, std::size_t t);

// T tensors of [B x d] -> [B x T x d].
template <typename T>
Variable<T> stack_time(Tape<T>& tape, const std::vector<Variable<T>>& steps);

// Row b of the result is a[b] when keep[b] != 0, otherwise fallback[b].
template <typename T>
Variable<T> where_rows(Tape<T>& tape, const std::vector<std::uint8_t>& keep,
                       const Variable<T>& a, const Variable<T>& fallback);

// sum_t weights[b, t] * states[b, t, :] -> [B x d].
template <typename T>
Variable<T> weighted_sum_time(Tape<T>& tape, const Variable<T>& weights,
                              const Variable<T>& states);

template <typename T>
Variable<T> sum(Tape<T>& tape, const Variable<T>& x);
template <typename T>
Variable<T> mean(Tape<T>& tape, const Variable<T>& x);

struct BatchMoments {
  std::vector<double> mean;
  std::vector<double> var;
};

// Per-column (x - mean_B) / sqrt(var_B + eps) over a [B x f] batch with
// biased batch variance. The batch moments are written to `moments`.
template <typename T>
Variable<T> batch_normalize(Tape<T>& tape, const Variable<T>& x, T eps,
                            BatchMoments* moments);

// Per-column (x - mean) / sqrt(var + eps) with fixed statistics.
template <typename T>
Variable<T> normalize_fixed(Tape<T>& tape, const Variable<T>& x,
                            const Tensor<T>& mean, const Tensor<T>& var, T eps);

}  // namespace ops

struct GradCheckTarget {
  std::string name;
  Variable<double> var;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// Compares tape gradients with central finite differences. The error of one
// entry is |analytic - fd| / max(1, |analytic|, |fd|); the maximum is returned.
// With max_entries_per_param > 0, a seeded subset of each parameter's entries
// is checked instead of all of them.
GradCheckResult grad_check(
    const std::function<Variable<double>(Tape<double>&)>& forward,
    const std::vector<GradCheckTarget>& params, double eps,
    std::size_t max_entries_per_param = 0, std::uint64_t seed = 0);

}  // namespace mpath
