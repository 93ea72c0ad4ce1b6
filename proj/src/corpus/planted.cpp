#include "keyvec/planted.hpp"

#include <algorithm>
#include <random>

namespace keyvec {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kSyllables = kConsonants.size() * kVowels.size();  // 70
constexpr std::size_t kSpace = kSyllables * kSyllables * kSyllables;     // 343000 = 2^3 5^3 7^3
constexpr std::size_t kScatter = 7919;                                   // coprime with kSpace

}  // namespace

std::string pseudo_word(std::size_t index) {
  std::size_t code = (index % kSpace) * kScatter % kSpace;
  std::string word;
  for (int i = 0; i < 3; ++i) {
    const std::size_t syl = code % kSyllables;
    code /= kSyllables;
    word += kConsonants[syl / kVowels.size()];
    word += kVowels[syl % kVowels.size()];
  }
  if (index >= kSpace) word += std::to_string(index / kSpace);
  return word;
}

PlantedCorpus generate_planted_corpus(const PlantedConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::string> noise(cfg.noise_words);
  for (std::size_t i = 0; i < cfg.noise_words; ++i) noise[i] = pseudo_word(i);
  std::vector<std::vector<std::string>> pools(cfg.topics);
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t j = 0; j < cfg.words_per_topic; ++j) {
      pools[t].push_back(pseudo_word(cfg.noise_words + t * cfg.words_per_topic + j));
    }
  }

  auto sentence_from = [&](const std::vector<std::string>& pool) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::string s;
    for (std::size_t i = 0; i < cfg.sentence_length; ++i) {
      if (i) s += ' ';
      s += pool[pick(rng)];
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s + '.';
  };

  auto make_doc = [&](std::string id, std::size_t topic) {
    RawDocument doc;
    doc.id = std::move(id);
    doc.label = "topic" + std::to_string(topic);
    const std::size_t n = cfg.noise_sentences + cfg.topic_sentences;
    std::vector<bool> is_topic(n, false);
    std::fill(is_topic.begin(), is_topic.begin() + static_cast<std::ptrdiff_t>(cfg.topic_sentences), true);
    std::shuffle(is_topic.begin(), is_topic.end(), rng);
    std::vector<std::string> summary;
    for (std::size_t i = 0; i < n; ++i) {
      doc.sentences.push_back(sentence_from(is_topic[i] ? pools[topic] : noise));
      if (is_topic[i]) summary.push_back(doc.sentences.back());
    }
    doc.summary = std::move(summary);
    return doc;
  };

  PlantedCorpus out;
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t j = 0; j < cfg.docs_per_topic; ++j) {
      out.docs.push_back(make_doc("d" + std::to_string(t) + "_" + std::to_string(j), t));
    }
  }
  for (std::size_t t = 0; t < cfg.topics; ++t) {
    for (std::size_t j = 0; j < cfg.queries_per_topic; ++j) {
      auto q = make_doc("q" + std::to_string(t) + "_" + std::to_string(j), t);
      for (const auto& d : out.docs) {
        if (d.label == q.label) out.qrels[q.id].insert(d.id);
      }
      out.queries.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace keyvec
