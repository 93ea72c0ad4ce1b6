#ifndef KEYVEC_SUPERVISION_HPP
#define KEYVEC_SUPERVISION_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "keyvec/corpus.hpp"

namespace keyvec {

struct SupervisionConfig {
  std::size_t top_k = 10;
  double sim_threshold = 0.3;
  std::size_t num_keywords = 30;

  void validate() const;
};

/// Surrogate labels for one document: salient sentence indices (0-based,
/// ascending) and keyword ids (ascending).
struct TrainingExample {
  std::string doc_id;
  std::vector<std::size_t> salient;
  std::vector<WordId> keywords;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

/// Sentence-to-sentence similarity in [0, 1]. Implementations must be
/// symmetric; a learned model can replace the TF-IDF cosine default.
class SentenceSimilarity {
 public:
  virtual ~SentenceSimilarity() = default;
  virtual double operator()(std::span<const WordId> a, std::span<const WordId> b) const = 0;
};

class TfIdfCosine final : public SentenceSimilarity {
 public:
  explicit TfIdfCosine(const TfIdfModel& tfidf) : tfidf_(tfidf) {}
  double operator()(std::span<const WordId> a, std::span<const WordId> b) const override;

 private:
  const TfIdfModel& tfidf_;
};

/// Cosine of the TF-IDF vectors of a and b; 0 when either is all-zero.
double sentence_similarity(std::span<const WordId> a, std::span<const WordId> b, const TfIdfModel& tfidf);

/// Scores each sentence by its best similarity to any summary sentence and
/// keeps those scoring >= sim_threshold, best first (ties to the lower
/// index), at most top_k. Returned indices are sorted ascending.
std::vector<std::size_t> select_salient_sentences(const Document& doc, const SupervisionConfig& cfg,
                                                  const SentenceSimilarity& similarity);
std::vector<std::size_t> select_salient_sentences(const Document& doc, const SupervisionConfig& cfg,
                                                  const TfIdfModel& tfidf);

/// Top num_keywords words of the concatenated summary by TF-IDF weight (ties
/// to the smaller id). Zero-weight words, PAD and UNK never qualify.
std::vector<WordId> select_keywords(const Document& doc, const SupervisionConfig& cfg, const TfIdfModel& tfidf);

struct TrainingSet {
  std::vector<TrainingExample> examples;
  /// Documents with a summary whose salient and keyword sets were both empty.
  std::size_t dropped = 0;
};

TrainingSet build_training_set(std::span<const Document> docs, const SupervisionConfig& cfg, const TfIdfModel& tfidf);

/// Labels file: JSON Lines {"doc_id", "salient": [i...], "keywords": ["w"...]}.
void write_labels(const std::string& path, std::span<const TrainingExample> examples, const Vocabulary& vocab);
std::vector<TrainingExample> read_labels(const std::string& path, const Vocabulary& vocab);

}  // namespace keyvec

#endif  // KEYVEC_SUPERVISION_HPP
