#ifndef KEYVEC_PLANTED_HPP
#define KEYVEC_PLANTED_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "keyvec/corpus.hpp"
#include "keyvec/eval/retrieval.hpp"

namespace keyvec {

/// Synthetic corpus with known structure. Every document mixes topic
/// sentences (drawn from its topic's private word pool) with noise sentences
/// (drawn from a shared pool); its summary is exactly its topic sentences.
struct PlantedConfig {
  std::size_t topics = 8;
  std::size_t docs_per_topic = 10;
  std::size_t queries_per_topic = 1;
  std::size_t noise_sentences = 6;
  std::size_t topic_sentences = 2;
  std::size_t words_per_topic = 12;
  std::size_t noise_words = 400;
  std::size_t sentence_length = 8;
  std::uint64_t seed = 1;
};

struct PlantedCorpus {
  std::vector<RawDocument> docs;
  /// Held-out documents generated the same way, one set per topic.
  std::vector<RawDocument> queries;
  /// Query id -> ids of training documents on the same topic.
  eval::Qrels qrels;
};

PlantedCorpus generate_planted_corpus(const PlantedConfig& cfg);

/// Deterministic pronounceable pseudo-word for an index; distinct indices give
/// distinct words.
std::string pseudo_word(std::size_t index);

}  // namespace keyvec

#endif  // KEYVEC_PLANTED_HPP
