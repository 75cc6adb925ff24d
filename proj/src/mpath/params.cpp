#include "mpath/params.hpp"

namespace mpath {

const char* to_string(PathTag tag) noexcept {
  switch (tag) {
    case PathTag::text: return "text";
    case PathTag::metadata: return "metadata";
    case PathTag::head: return "head";
  }
  return "?";
}

PathTag path_tag_from_string(std::string_view s) {
  if (s == "text") return PathTag::text;
  if (s == "metadata") return PathTag::metadata;
  if (s == "head") return PathTag::head;
  fail(ErrorKind::parse, "unknown path tag '" + std::string(s) + "'");
}

template <typename T>
Variable<T> ParameterStore<T>::add(std::string name, PathTag path,
                                   Tensor<T> init, bool buffer) {
  const std::string prefix = std::string(to_string(path)) + ".";
  require(name.starts_with(prefix), ErrorKind::contract,
          "parameter '" + name + "' is tagged " + to_string(path) +
              " but lacks the '" + prefix + "' prefix");
  require(find(name) == nullptr, ErrorKind::contract,
          "duplicate parameter name '" + name + "'");
  Parameter<T> p;
  p.name = std::move(name);
  p.var = Variable<T>(std::move(init), !buffer);
  p.path = path;
  p.trainable = !buffer;
  p.buffer = buffer;
  params_.push_back(p);
  return p.var;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
Parameter<T>& ParameterStore<T>::at(std::string_view name) {
  auto* p = find(name);
  if (!p) fail(ErrorKind::lookup, "no parameter named '" + std::string(name) + "'");
  return *p;
}

template <typename T>
void ParameterStore<T>::set_trainable(PathTag path, bool trainable) {
  for (auto& p : params_)
    if (p.path == path && !p.buffer) {
      p.trainable = trainable;
      p.var.set_requires_grad(trainable);  // frozen tensors need no gradient
    }
}

template <typename T>
void ParameterStore<T>::set_all_trainable(bool trainable) {
  for (auto& p : params_)
    if (!p.buffer) {
      p.trainable = trainable;
      p.var.set_requires_grad(trainable);
    }
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

template <typename T>
std::size_t ParameterStore<T>::trainable_count(bool include_embeddings) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.buffer || !p.trainable) continue;
    if (!include_embeddings && p.name == "text.embedding.table") continue;
    n += p.var.size();
  }
  return n;
}

template <typename T>
std::vector<Tensor<T>> ParameterStore<T>::snapshot() const {
  std::vector<Tensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var.value());
  return out;
}

template <typename T>
void ParameterStore<T>::restore(const std::vector<Tensor<T>>& values) {
  require(values.size() == params_.size(), ErrorKind::contract,
          "restore: snapshot has " + std::to_string(values.size()) +
              " tensors for " + std::to_string(params_.size()) + " parameters");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    require(values[i].shape() == params_[i].var.shape(), ErrorKind::dimension,
            "restore: shape mismatch for " + params_[i].name);
    params_[i].var.mutable_value() = values[i];
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace mpath
