#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mpath/tensor.hpp"

namespace mpath {

// Which sub-network a parameter belongs to. Every parameter has exactly one.
enum class PathTag : std::uint8_t { text = 0, metadata = 1, head = 2 };

const char* to_string(PathTag tag) noexcept;
PathTag path_tag_from_string(std::string_view s);

template <typename T>
struct Parameter {
  std::string name;  // hierarchical, e.g. "text.gru.W_z"
  Variable<T> var;
  PathTag path = PathTag::head;
  bool trainable = true;
  // Buffers (batch-norm running statistics) are written by the forward pass,
  // never by the optimizer, and do not count as parameters.
  bool buffer = false;
};

template <typename T>
class ParameterStore {
 public:
  // Registers a parameter. The name must be unique and start with the path
  // prefix ("text.", "metadata." or "head.").
  Variable<T> add(std::string name, PathTag path, Tensor<T> init,
                  bool buffer = false);

  std::vector<Parameter<T>>& all() noexcept { return params_; }
  const std::vector<Parameter<T>>& all() const noexcept { return params_; }

  Parameter<T>* find(std::string_view name);
  const Parameter<T>* find(std::string_view name) const;
  Parameter<T>& at(std::string_view name);

  void set_trainable(PathTag path, bool trainable);
  void set_all_trainable(bool trainable);
  void zero_grad();

  // Element count over trainable, non-buffer parameters.
  std::size_t trainable_count(bool include_embeddings) const;

  // Values of every parameter and buffer, in registration order.
  std::vector<Tensor<T>> snapshot() const;
  void restore(const std::vector<Tensor<T>>& values);

 private:
  std::vector<Parameter<T>> params_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace mpath
