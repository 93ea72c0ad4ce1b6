#include "keyvec/supervision.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "keyvec/error.hpp"

namespace keyvec {

using nlohmann::json;

void SupervisionConfig::validate() const {
  if (top_k < 1) throw InvalidConfig("top_k must be >= 1");
  // A threshold above 1 is allowed and selects nothing.
  if (!(sim_threshold >= 0.0)) throw InvalidConfig("sim_threshold must be >= 0");
  if (num_keywords < 1) throw InvalidConfig("num_keywords must be >= 1");
}

double sentence_similarity(std::span<const WordId> a, std::span<const WordId> b, const TfIdfModel& tfidf) {
  auto va = tfidf.vector(a);
  auto vb = tfidf.vector(b);
  double na = 0.0, nb = 0.0, dot = 0.0;
  for (const auto& [_, x] : va) na += x * x;
  for (const auto& [_, x] : vb) nb += x * x;
  if (na == 0.0 || nb == 0.0) return 0.0;
  auto ia = va.begin();
  auto ib = vb.begin();
  while (ia != va.end() && ib != vb.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      dot += ia->second * ib->second;
      ++ia;
      ++ib;
    }
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double TfIdfCosine::operator()(std::span<const WordId> a, std::span<const WordId> b) const {
  return sentence_similarity(a, b, tfidf_);
}

std::vector<std::size_t> select_salient_sentences(const Document& doc, const SupervisionConfig& cfg,
                                                  const SentenceSimilarity& similarity) {
  if (!doc.summary) throw MissingSummary("document '" + doc.id + "' has no summary");
  std::vector<double> score(doc.sentences.size(), 0.0);
  for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
    for (const auto& ref : *doc.summary) score[i] = std::max(score[i], similarity(doc.sentences[i], ref));
  }
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::vector<std::size_t> picked;
  for (std::size_t i : order) {
    if (picked.size() >= cfg.top_k || score[i] < cfg.sim_threshold) break;
    picked.push_back(i);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<std::size_t> select_salient_sentences(const Document& doc, const SupervisionConfig& cfg,
                                                  const TfIdfModel& tfidf) {
  return select_salient_sentences(doc, cfg, TfIdfCosine(tfidf));
}

std::vector<WordId> select_keywords(const Document& doc, const SupervisionConfig& cfg, const TfIdfModel& tfidf) {
  if (!doc.summary) throw MissingSummary("document '" + doc.id + "' has no summary");
  Sentence all;
  for (const auto& s : *doc.summary) all.insert(all.end(), s.begin(), s.end());
  std::vector<std::pair<WordId, double>> weighted;
  for (const auto& [w, weight] : tfidf.vector(all)) {
    if (weight > 0.0) weighted.emplace_back(w, weight);
  }
  std::sort(weighted.begin(), weighted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (weighted.size() > cfg.num_keywords) weighted.resize(cfg.num_keywords);
  std::vector<WordId> ids;
  for (const auto& [w, _] : weighted) ids.push_back(w);
  std::sort(ids.begin(), ids.end());
  return ids;
}

TrainingSet build_training_set(std::span<const Document> docs, const SupervisionConfig& cfg, const TfIdfModel& tfidf) {
  cfg.validate();
  TrainingSet set;
  TfIdfCosine similarity(tfidf);
  for (const auto& doc : docs) {
    if (!doc.has_summary()) continue;
    TrainingExample ex;
    ex.doc_id = doc.id;
    ex.salient = select_salient_sentences(doc, cfg, similarity);
    ex.keywords = select_keywords(doc, cfg, tfidf);
    if (ex.salient.empty() && ex.keywords.empty()) {
      ++set.dropped;
      continue;
    }
    set.examples.push_back(std::move(ex));
  }
  return set;
}

void write_labels(const std::string& path, std::span<const TrainingExample> examples, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write labels file " + path);
  for (const auto& ex : examples) {
    json j{{"doc_id", ex.doc_id}, {"salient", ex.salient}, {"keywords", vocab.decode(ex.keywords)}};
    out << j.dump() << '\n';
  }
}

std::vector<TrainingExample> read_labels(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read labels file " + path);
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      TrainingExample ex;
      ex.doc_id = j.at("doc_id").get<std::string>();
      ex.salient = j.at("salient").get<std::vector<std::size_t>>();
      for (const auto& w : j.at("keywords").get<std::vector<std::string>>()) {
        if (!vocab.contains(w)) throw ParseError("keyword '" + w + "' not in vocabulary");
        ex.keywords.push_back(vocab.id(w));
      }
      std::sort(ex.keywords.begin(), ex.keywords.end());
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace keyvec
