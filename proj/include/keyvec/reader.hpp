#ifndef KEYVEC_READER_HPP
#define KEYVEC_READER_HPP

#include <algorithm>
#include <span>
#include <vector>

#include "keyvec/model.hpp"

namespace keyvec {

/// Sentence embedding: embedding lookup, then one convolution + max-pool per
/// filter width, concatenated in ascending width order.
template <typename T>
nn::Var<T> encode_sentence(const ModelVars<T>& vars, const ModelConfig& cfg, std::span<const WordId> ids) {
  nn::Var<T> words = nn::embedding_lookup(vars.embedding, ids);
  std::vector<nn::Var<T>> features;
  features.reserve(vars.conv.size());
  for (const auto& c : vars.conv) features.push_back(nn::conv1d_maxpool(words, c.filters, c.bias, cfg.conv_activation));
  return nn::concat<T>(features);
}

/// Bidirectional LSTM over sentence embeddings starting from zero states.
/// Output i is (forward state after sentence i, backward state after sentence i
/// when scanning from the end).
template <typename T>
std::vector<nn::Var<T>> contextualize(const ModelVars<T>& vars, std::span<const nn::Var<T>> sentences) {
  if (sentences.empty()) throw EmptyDocument("contextualize needs at least one sentence");
  nn::Tape<T>& tape = sentences[0].tape();
  const std::size_t h = vars.fwd.w_h.shape()[1];
  const std::size_t n = sentences.size();
  auto run = [&](const LstmVars<T>& p, bool reverse) {
    std::vector<nn::Var<T>> states(n);
    nn::Var<T> hs = tape.constant(nn::Tensor<T>({h}));
    nn::Var<T> cs = tape.constant(nn::Tensor<T>({h}));
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = reverse ? n - 1 - step : step;
      auto next = nn::lstm_step(sentences[i], hs, cs, p.w_x, p.w_h, p.b);
      hs = next.h;
      cs = next.c;
      states[i] = hs;
    }
    return states;
  };
  auto fwd = run(vars.fwd, false);
  auto bwd = run(vars.bwd, true);
  std::vector<nn::Var<T>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const nn::Var<T> pair[2] = {fwd[i], bwd[i]};
    out.push_back(nn::concat<T>(pair));
  }
  return out;
}

/// p_i = sigmoid(w . h_i + b) for the rows of `states` [N x 2H].
template <typename T>
nn::Var<T> salience(const ModelVars<T>& vars, const nn::Var<T>& states) {
  return nn::sigmoid(nn::add_scalar(nn::linear(vars.salience_w, states), vars.salience_b));
}

/// Per-document negative log likelihood of the salient set: salient sentences
/// should have p -> 1 and all others p -> 0.
template <typename T>
nn::Var<T> reader_loss(const nn::Var<T>& probs, std::span<const std::size_t> salient) {
  std::vector<bool> positive(probs.size(), false);
  for (std::size_t i : salient) {
    if (i >= positive.size()) throw IndexOutOfRange("salient index " + std::to_string(i) + " outside document");
    positive[i] = true;
  }
  return nn::binary_nll(probs, positive);
}

}  // namespace keyvec

#endif  // KEYVEC_READER_HPP
