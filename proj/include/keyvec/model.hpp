#ifndef KEYVEC_MODEL_HPP
#define KEYVEC_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "keyvec/corpus.hpp"
#include "keyvec/nn/ops.hpp"
#include "keyvec/nn/param_store.hpp"
#include "keyvec/nn/tape.hpp"

namespace keyvec {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t word_dim = 100;
  /// Ascending convolution widths; one block of filters_per_width filters each.
  std::vector<std::size_t> filter_widths{1, 2, 3};
  std::size_t filters_per_width = 50;
  std::size_t lstm_hidden = 100;
  std::size_t doc_dim = 100;
  nn::Activation conv_activation = nn::Activation::kRelu;

  /// Sentence embedding size: 50 filters x 3 widths = 150 by default.
  std::size_t sent_dim() const { return filters_per_width * filter_widths.size(); }
  std::size_t state_dim() const { return 2 * lstm_hidden; }
  std::size_t max_width() const { return filter_widths.empty() ? 0 : filter_widths.back(); }

  void validate() const;

  /// Recovers the configuration from parameter shapes (the activation is not
  /// recoverable and is left at its default).
  template <typename T>
  static ModelConfig infer(const nn::ParamStore<T>& store);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

namespace param_names {
inline const std::string kEmbedding = "reader.embedding";
inline std::string conv_filters(std::size_t width) { return "reader.conv.w" + std::to_string(width) + ".filters"; }
inline std::string conv_bias(std::size_t width) { return "reader.conv.w" + std::to_string(width) + ".bias"; }
inline std::string lstm(const std::string& dir, const char* part) { return "reader.lstm." + dir + "." + part; }
inline const std::string kSalienceW = "reader.salience.w";
inline const std::string kSalienceB = "reader.salience.b";
inline const std::string kPoolW = "encoder.pool.w";
inline const std::string kPoolB = "encoder.pool.b";
inline const std::string kKeywordU = "encoder.keyword.u";
inline const std::string kKeywordC = "encoder.keyword.c";
}  // namespace param_names

/// All trainable parameters of the Reader and the Encoder.
template <typename T>
struct Model {
  ModelConfig config;
  nn::ParamStore<T> params;
};

namespace detail {

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace detail

/// Fresh parameters: Glorot-uniform weights, zero biases (LSTM forget gate
/// +1), embeddings uniform in +-0.05. Draws happen in a fixed order so a seed
/// yields the same values for float and double models up to rounding.
template <typename T>
Model<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model<T> model{cfg, nn::ParamStore<T>(seed)};
  std::mt19937_64 rng(seed);
  auto uniform = [&](nn::Shape shape, double limit) {
    nn::Tensor<T> t(std::move(shape));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
  };
  auto& ps = model.params;
  const std::size_t s = cfg.sent_dim(), h = cfg.lstm_hidden, e = cfg.word_dim;
  ps.add(param_names::kEmbedding, uniform({cfg.vocab_size, e}, 0.05));
  for (std::size_t w : cfg.filter_widths) {
    ps.add(param_names::conv_filters(w),
           uniform({cfg.filters_per_width, w, e}, detail::glorot_limit(w * e, cfg.filters_per_width)));
    ps.add(param_names::conv_bias(w), nn::Tensor<T>({cfg.filters_per_width}));
  }
  for (const std::string dir : {"fwd", "bwd"}) {
    ps.add(param_names::lstm(dir, "wx"), uniform({4 * h, s}, detail::glorot_limit(s, 4 * h)));
    ps.add(param_names::lstm(dir, "wh"), uniform({4 * h, h}, detail::glorot_limit(h, 4 * h)));
    nn::Tensor<T> b({4 * h});
    for (std::size_t k = h; k < 2 * h; ++k) b[k] = T{1};
    ps.add(param_names::lstm(dir, "b"), std::move(b));
  }
  ps.add(param_names::kSalienceW, uniform({2 * h}, detail::glorot_limit(2 * h, 1)));
  ps.add(param_names::kSalienceB, nn::Tensor<T>({1}));
  ps.add(param_names::kPoolW, uniform({cfg.doc_dim, 2 * h}, detail::glorot_limit(2 * h, cfg.doc_dim)));
  ps.add(param_names::kPoolB, nn::Tensor<T>({cfg.doc_dim}));
  ps.add(param_names::kKeywordU, uniform({cfg.vocab_size, cfg.doc_dim}, detail::glorot_limit(cfg.doc_dim, cfg.vocab_size)));
  ps.add(param_names::kKeywordC, nn::Tensor<T>({cfg.vocab_size}));
  return model;
}

/// Expected shape of every parameter under `cfg`.
inline std::map<std::string, nn::Shape> param_shapes(const ModelConfig& cfg) {
  namespace pn = param_names;
  const std::size_t s = cfg.sent_dim(), h = cfg.lstm_hidden, e = cfg.word_dim, v = cfg.vocab_size;
  std::map<std::string, nn::Shape> shapes{
      {pn::kEmbedding, {v, e}},        {pn::kSalienceW, {2 * h}},         {pn::kSalienceB, {1}},
      {pn::kPoolW, {cfg.doc_dim, 2 * h}}, {pn::kPoolB, {cfg.doc_dim}},     {pn::kKeywordU, {v, cfg.doc_dim}},
      {pn::kKeywordC, {v}},
  };
  for (std::size_t w : cfg.filter_widths) {
    shapes[pn::conv_filters(w)] = {cfg.filters_per_width, w, e};
    shapes[pn::conv_bias(w)] = {cfg.filters_per_width};
  }
  for (const std::string dir : {"fwd", "bwd"}) {
    shapes[pn::lstm(dir, "wx")] = {4 * h, s};
    shapes[pn::lstm(dir, "wh")] = {4 * h, h};
    shapes[pn::lstm(dir, "b")] = {4 * h};
  }
  return shapes;
}

template <typename T>
struct ConvVars {
  std::size_t width = 0;
  nn::Var<T> filters;
  nn::Var<T> bias;
};

template <typename T>
struct LstmVars {
  nn::Var<T> w_x;
  nn::Var<T> w_h;
  nn::Var<T> b;
};

/// Parameters as tape leaves for one forward pass.
template <typename T>
struct ModelVars {
  nn::Var<T> embedding;
  std::vector<ConvVars<T>> conv;
  LstmVars<T> fwd;
  LstmVars<T> bwd;
  nn::Var<T> salience_w;
  nn::Var<T> salience_b;
  nn::Var<T> pool_w;
  nn::Var<T> pool_b;
  nn::Var<T> keyword_u;
  nn::Var<T> keyword_c;
};

/// Builds ModelVars from a name -> Var lookup, which lets the same forward code
/// run on bound parameters or on gradient-check leaves.
template <typename T, typename Lookup>
ModelVars<T> make_vars(const ModelConfig& cfg, Lookup&& lookup) {
  namespace pn = param_names;
  ModelVars<T> v;
  v.embedding = lookup(pn::kEmbedding);
  for (std::size_t w : cfg.filter_widths) v.conv.push_back({w, lookup(pn::conv_filters(w)), lookup(pn::conv_bias(w))});
  v.fwd = {lookup(pn::lstm("fwd", "wx")), lookup(pn::lstm("fwd", "wh")), lookup(pn::lstm("fwd", "b"))};
  v.bwd = {lookup(pn::lstm("bwd", "wx")), lookup(pn::lstm("bwd", "wh")), lookup(pn::lstm("bwd", "b"))};
  v.salience_w = lookup(pn::kSalienceW);
  v.salience_b = lookup(pn::kSalienceB);
  v.pool_w = lookup(pn::kPoolW);
  v.pool_b = lookup(pn::kPoolB);
  v.keyword_u = lookup(pn::kKeywordU);
  v.keyword_c = lookup(pn::kKeywordC);
  return v;
}

template <typename T>
ModelVars<T> bind(nn::Tape<T>& tape, Model<T>& model) {
  return make_vars<T>(model.config, [&](const std::string& name) { return tape.bind(model.params.get(name)); });
}

/// Binding for inference; the tape never writes through these leaves.
template <typename T>
ModelVars<T> bind_frozen(nn::Tape<T>& tape, const Model<T>& model) {
  tape.set_grad_enabled(false);
  auto& params = const_cast<nn::ParamStore<T>&>(model.params);
  return make_vars<T>(model.config, [&](const std::string& name) { return tape.bind(params.get(name)); });
}

/// Overwrites embedding rows from a text vector file (`V E` header, then
/// `word v1 ... vE`). Words outside the vocabulary are skipped. Returns the
/// number of rows replaced.
template <typename T>
std::size_t load_pretrained_embeddings(Model<T>& model, const Vocabulary& vocab, const std::string& path);

template <typename T>
ModelConfig ModelConfig::infer(const nn::ParamStore<T>& store) {
  namespace pn = param_names;
  ModelConfig cfg;
  const auto& emb = store.get(pn::kEmbedding).value;
  cfg.vocab_size = emb.dim(0);
  cfg.word_dim = emb.dim(1);
  cfg.filter_widths.clear();
  cfg.filters_per_width = 0;
  for (const auto& [name, p] : store) {
    const std::string prefix = "reader.conv.w";
    const std::string suffix = ".filters";
    if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      cfg.filter_widths.push_back(p.value.dim(1));
      cfg.filters_per_width = p.value.dim(0);
    }
  }
  std::sort(cfg.filter_widths.begin(), cfg.filter_widths.end());
  cfg.lstm_hidden = store.get(pn::lstm("fwd", "wh")).value.dim(1);
  cfg.doc_dim = store.get(pn::kPoolW).value.dim(0);
  return cfg;
}

}  // namespace keyvec

#endif  // KEYVEC_MODEL_HPP
