#ifndef KEYVEC_TRAIN_HPP
#define KEYVEC_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "keyvec/encoder.hpp"
#include "keyvec/nn/sgd.hpp"
#include "keyvec/supervision.hpp"

namespace keyvec {

struct TrainConfig {
  std::size_t epochs = 60;
  double learning_rate = 0.1;
  /// Multiplicative learning-rate decay applied after every epoch.
  double lr_decay = 0.95;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  double lambda_read = 1.0;
  double lambda_enc = 1.0;
  bool shuffle = true;
  bool freeze_embeddings = false;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double reader_loss = 0.0;  // mean over training documents
  double enc_loss = 0.0;     // mean over documents with keywords
  double salience_acc = 0.0;
  double keyword_recall = 0.0;

  double total(double lambda_read = 1.0, double lambda_enc = 1.0) const {
    return lambda_read * reader_loss + lambda_enc * enc_loss;
  }
};

/// Training-set diagnostics for a frozen model.
struct FitReport {
  double reader_loss = 0.0;
  double enc_loss = 0.0;
  /// Fraction of sentences whose thresholded salience (p >= 0.5) matches the label.
  double salience_acc = 0.0;
  /// Mean fraction of W_k found among the top-k predicted words.
  double keyword_recall = 0.0;
};

namespace detail {

/// Pairs every example with its document; rejects dangling or invalid labels.
inline std::vector<std::pair<const Document*, const TrainingExample*>> join_examples(
    std::span<const Document> docs, std::span<const TrainingExample> examples) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, &d);
  std::vector<std::pair<const Document*, const TrainingExample*>> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto it = by_id.find(ex.doc_id);
    if (it == by_id.end()) throw InvalidConfig("training example for unknown document '" + ex.doc_id + "'");
    for (std::size_t i : ex.salient) {
      if (i >= it->second->sentences.size()) {
        throw IndexOutOfRange("salient index " + std::to_string(i) + " outside document '" + ex.doc_id + "'");
      }
    }
    out.emplace_back(it->second, &ex);
  }
  return out;
}

/// Fraction of `keywords` among the k highest logits (ties to the lower id).
template <typename T>
double keyword_recall(std::span<const T> logits, std::span<const WordId> keywords, std::size_t k) {
  if (keywords.empty()) return 0.0;
  k = std::min(k, logits.size());
  std::vector<WordId> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](WordId a, WordId b) { return logits[a] != logits[b] ? logits[a] > logits[b] : a < b; });
  std::size_t hits = 0;
  for (WordId w : keywords) {
    if (std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), w) != order.begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(keywords.size());
}

struct Tally {
  double reader_loss = 0.0, enc_loss = 0.0, recall = 0.0;
  std::size_t docs = 0, keyword_docs = 0, sentences = 0, correct = 0;

  template <typename T>
  void add(const JointLoss<T>& loss, const ModelVars<T>& vars, const TrainingExample& ex, std::size_t recall_k) {
    ++docs;
    reader_loss += static_cast<double>(loss.reader.item());
    auto p = loss.graph.salience.value();
    std::vector<bool> positive(p.size(), false);
    for (std::size_t i : ex.salient) positive[i] = true;
    for (std::size_t i = 0; i < p.size(); ++i) correct += ((p[i] >= T(0.5)) == positive[i]) ? 1 : 0;
    sentences += p.size();
    if (!ex.keywords.empty()) {
      ++keyword_docs;
      enc_loss += static_cast<double>(loss.keyword.item());
      // logits are the input node of the softmax loss; recompute them from d
      auto& tape = loss.graph.embedding.tape();
      const bool was = tape.grad_enabled();
      tape.set_grad_enabled(false);
      auto logits = keyword_logits(vars, loss.graph.embedding);
      tape.set_grad_enabled(was);
      auto lv = logits.value();
      recall += keyword_recall<T>(std::span<const T>(lv.data(), lv.size()), ex.keywords,
                                  recall_k ? recall_k : ex.keywords.size());
    }
  }
};

}  // namespace detail

/// Evaluates losses, salience accuracy and keyword recall@recall_k (recall_k = 0
/// means |W_k| per document) without updating the model.
template <typename T>
FitReport evaluate_fit(const Model<T>& model, std::span<const Document> docs, std::span<const TrainingExample> examples,
                       std::size_t recall_k = 0) {
  auto joined = detail::join_examples(docs, examples);
  detail::Tally tally;
  for (const auto& [doc, ex] : joined) {
    nn::Tape<T> tape;
    auto vars = bind_frozen(tape, model);
    auto loss = joint_loss(vars, model.config, *doc, ex->salient, ex->keywords);
    tally.add(loss, vars, *ex, recall_k);
  }
  FitReport r;
  if (tally.docs) r.reader_loss = tally.reader_loss / static_cast<double>(tally.docs);
  if (tally.keyword_docs) {
    r.enc_loss = tally.enc_loss / static_cast<double>(tally.keyword_docs);
    r.keyword_recall = tally.recall / static_cast<double>(tally.keyword_docs);
  }
  if (tally.sentences) r.salience_acc = static_cast<double>(tally.correct) / static_cast<double>(tally.sentences);
  return r;
}

/// Joint SGD over the surrogate training set, one document per update.
/// Returns one log row per epoch; statistics are gathered from the forward
/// pass preceding each update.
template <typename T>
std::vector<EpochLog> train_model(Model<T>& model, std::span<const Document> docs,
                                  std::span<const TrainingExample> examples, const TrainConfig& cfg,
                                  const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (examples.empty()) throw EmptyTrainingSet("no training examples");
  auto joined = detail::join_examples(docs, examples);
  std::vector<std::size_t> order(joined.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<EpochLog> log;
  double lr = cfg.learning_rate;
  auto& embedding_grad = model.params.get(param_names::kEmbedding).grad;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    detail::Tally tally;
    for (std::size_t idx : order) {
      const auto& [doc, ex] = joined[idx];
      nn::Tape<T> tape;
      auto vars = bind(tape, model);
      auto loss = joint_loss(vars, model.config, *doc, ex->salient, ex->keywords, cfg.lambda_read, cfg.lambda_enc);
      tape.backward(loss.total);
      tally.add(loss, vars, *ex, 0);
      if (cfg.freeze_embeddings) embedding_grad.fill(T{0});
      nn::sgd_step(model.params, lr, cfg.clip_norm);
    }
    EpochLog row;
    row.epoch = epoch;
    row.reader_loss = tally.reader_loss / static_cast<double>(tally.docs);
    if (tally.keyword_docs) {
      row.enc_loss = tally.enc_loss / static_cast<double>(tally.keyword_docs);
      row.keyword_recall = tally.recall / static_cast<double>(tally.keyword_docs);
    }
    row.salience_acc = static_cast<double>(tally.correct) / static_cast<double>(tally.sentences);
    log.push_back(row);
    if (on_epoch) on_epoch(row);
    lr *= cfg.lr_decay;
  }
  return log;
}

template <typename T>
struct TrainResult {
  Model<T> model;
  std::vector<EpochLog> log;
};

/// Initializes a model from cfg.seed and trains it.
template <typename T>
TrainResult<T> train(std::span<const Document> docs, std::span<const TrainingExample> examples,
                     const ModelConfig& model_cfg, const TrainConfig& cfg,
                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (examples.empty()) throw EmptyTrainingSet("no training examples");
  TrainResult<T> out{init_model<T>(model_cfg, cfg.seed), {}};
  out.log = train_model(out.model, docs, examples, cfg, on_epoch);
  return out;
}

/// CSV with header `epoch,reader_loss,enc_loss,salience_acc,keyword_recall`.
void write_training_log(const std::string& path, std::span<const EpochLog> log);

}  // namespace keyvec

#endif  // KEYVEC_TRAIN_HPP
