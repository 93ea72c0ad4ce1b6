#ifndef KEYVEC_ENCODER_HPP
#define KEYVEC_ENCODER_HPP

#include <span>
#include <vector>

#include "keyvec/reader.hpp"

namespace keyvec {

/// d = tanh(W_d (sum_i p_i h_i / sum_j p_j) + b_d).
template <typename T>
nn::Var<T> pool_document(const ModelVars<T>& vars, const nn::Var<T>& states, const nn::Var<T>& probs) {
  return nn::tanh_op(nn::linear(nn::weighted_mean(states, probs), vars.pool_w, vars.pool_b));
}

template <typename T>
nn::Var<T> keyword_logits(const ModelVars<T>& vars, const nn::Var<T>& doc) {
  return nn::linear(doc, vars.keyword_u, vars.keyword_c);
}

/// -sum_{w in keywords} ln softmax(U d + c)_w over the full vocabulary.
template <typename T>
nn::Var<T> keyword_loss(const ModelVars<T>& vars, const nn::Var<T>& doc, std::span<const WordId> keywords) {
  if (keywords.empty()) throw EmptyKeywordSet("keyword loss needs at least one keyword");
  return nn::softmax_nll(keyword_logits(vars, doc), keywords);
}

template <typename T>
struct DocumentGraph {
  nn::Var<T> states;     // [N x 2H]
  nn::Var<T> salience;   // [N]
  nn::Var<T> embedding;  // [D_doc]
};

/// Full Reader + Encoder forward pass for one document.
template <typename T>
DocumentGraph<T> forward_document(const ModelVars<T>& vars, const ModelConfig& cfg, const Document& doc) {
  if (doc.sentences.empty()) throw EmptyDocument("document '" + doc.id + "' has no sentences");
  std::vector<nn::Var<T>> sentences;
  sentences.reserve(doc.sentences.size());
  for (const auto& s : doc.sentences) sentences.push_back(encode_sentence(vars, cfg, s));
  auto states_list = contextualize<T>(vars, sentences);
  DocumentGraph<T> g;
  g.states = nn::stack<T>(states_list);
  g.salience = salience(vars, g.states);
  g.embedding = pool_document(vars, g.states, g.salience);
  return g;
}

template <typename T>
struct DocumentEmbedding {
  std::vector<T> embedding;
  std::vector<T> salience;
};

/// Single feed-forward pass against frozen parameters.
template <typename T>
DocumentEmbedding<T> embed_document(const Model<T>& model, const Document& doc) {
  nn::Tape<T> tape;
  auto vars = bind_frozen(tape, model);
  auto g = forward_document(vars, model.config, doc);
  auto e = g.embedding.value();
  auto p = g.salience.value();
  return {{e.begin(), e.end()}, {p.begin(), p.end()}};
}

/// Joint per-document loss lambda_read * reader + lambda_enc * keyword; the
/// keyword term is skipped when the document has no keywords.
template <typename T>
struct JointLoss {
  nn::Var<T> total;
  nn::Var<T> reader;
  nn::Var<T> keyword;  // invalid when skipped
  DocumentGraph<T> graph;
};

template <typename T>
JointLoss<T> joint_loss(const ModelVars<T>& vars, const ModelConfig& cfg, const Document& doc,
                        std::span<const std::size_t> salient, std::span<const WordId> keywords,
                        double lambda_read = 1.0, double lambda_enc = 1.0) {
  JointLoss<T> out;
  out.graph = forward_document(vars, cfg, doc);
  out.reader = reader_loss(out.graph.salience, salient);
  out.total = nn::scale(out.reader, static_cast<T>(lambda_read));
  if (!keywords.empty()) {
    out.keyword = keyword_loss(vars, out.graph.embedding, keywords);
    out.total = nn::add(out.total, nn::scale(out.keyword, static_cast<T>(lambda_enc)));
  }
  return out;
}

}  // namespace keyvec

#endif  // KEYVEC_ENCODER_HPP
