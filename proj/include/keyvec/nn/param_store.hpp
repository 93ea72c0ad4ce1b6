#ifndef KEYVEC_NN_PARAM_STORE_HPP
#define KEYVEC_NN_PARAM_STORE_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "keyvec/nn/tensor.hpp"

namespace keyvec::nn {

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named trainable tensors with paired gradient buffers. Iteration is in
/// name order, which fixes the order of every reduction over parameters.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, Parameter<T>>;

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Parameter<T>& add(const std::string& name, Tensor<T> value) {
    if (entries_.count(name)) throw InvalidConfig("duplicate parameter name: " + name);
    Tensor<T> grad(value.shape());
    auto [it, _] = entries_.emplace(name, Parameter<T>{std::move(value), std::move(grad)});
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  Parameter<T>& get(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InvalidConfig("unknown parameter: " + name);
    return it->second;
  }
  const Parameter<T>& get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw InvalidConfig("unknown parameter: " + name);
    return it->second;
  }

  typename Map::iterator begin() { return entries_.begin(); }
  typename Map::iterator end() { return entries_.end(); }
  typename Map::const_iterator begin() const { return entries_.begin(); }
  typename Map::const_iterator end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, p] : entries_) p.grad.fill(T{0});
  }

  /// Global L2 norm over every gradient buffer, accumulated in double.
  double grad_norm() const {
    double sq = 0.0;
    for (const auto& [_, p] : entries_) {
      for (T g : p.grad.data()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    return std::sqrt(sq);
  }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(seed_);
    for (const auto& [name, p] : entries_) out.add(name, p.value.template cast<U>());
    return out;
  }

 private:
  Map entries_;
  std::uint64_t seed_;
};

}  // namespace keyvec::nn

#endif  // KEYVEC_NN_PARAM_STORE_HPP
