#include "keyvec/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "keyvec/error.hpp"

namespace keyvec {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  push(std::string(kPadToken), 0);
  push(std::string(kUnkToken), 0);
}

void Vocabulary::push(std::string word, std::uint64_t freq) {
  ids_.emplace(word, static_cast<WordId>(words_.size()));
  words_.push_back(std::move(word));
  freq_.push_back(freq);
}

Vocabulary Vocabulary::build(std::span<const RawDocument> docs, std::size_t min_count, std::size_t max_size) {
  if (min_count < 1) throw InvalidConfig("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> counts;
  auto count_all = [&](const std::vector<std::string>& sentences) {
    for (const auto& s : sentences) {
      for (auto& tok : tokenize(s)) ++counts[tok];
    }
  };
  for (const auto& d : docs) {
    count_all(d.sentences);
    if (d.summary) count_all(*d.summary);
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (auto& [w, c] : counts) {
    if (c >= min_count) ranked.emplace_back(w, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary vocab;
  for (auto& [w, c] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.push(w, c);
  }
  return vocab;
}

WordId Vocabulary::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

const std::string& Vocabulary::word(WordId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw IndexOutOfRange("word id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[static_cast<std::size_t>(id)];
}

Sentence Vocabulary::encode(std::span<const std::string> tokens) const {
  Sentence out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const WordId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (WordId i : ids) out.push_back(word(i));
  return out;
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << freq_[i] << '\n';
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file " + path);
  save(out);
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  vocab.words_.clear();
  vocab.freq_.clear();
  vocab.ids_.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("vocabulary line " + std::to_string(lineno) + ": expected word<TAB>frequency");
    }
    std::string word = line.substr(0, tab);
    std::uint64_t freq = 0;
    try {
      freq = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("vocabulary line " + std::to_string(lineno) + ": bad frequency");
    }
    if (vocab.ids_.count(word)) throw ParseError("vocabulary line " + std::to_string(lineno) + ": duplicate word");
    vocab.push(std::move(word), freq);
  }
  if (vocab.size() < 2 || vocab.words_[kPad] != kPadToken || vocab.words_[kUnk] != kUnkToken) {
    throw ParseError("vocabulary must start with " + std::string(kPadToken) + " and " + std::string(kUnkToken));
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary file " + path);
  return load(in);
}

// ---------------------------------------------------------------------------
// Documents

namespace {

std::vector<Sentence> encode_sentences(const Vocabulary& vocab, const std::vector<std::string>& text) {
  std::vector<Sentence> out;
  for (const auto& s : text) {
    auto tokens = tokenize(s);
    if (!tokens.empty()) out.push_back(vocab.encode(tokens));
  }
  return out;
}

}  // namespace

Document encode_document(const Vocabulary& vocab, const RawDocument& raw) {
  Document doc;
  doc.id = raw.id;
  doc.sentences = encode_sentences(vocab, raw.sentences);
  if (doc.sentences.empty()) throw EmptyDocument("document '" + raw.id + "' has no non-empty sentence");
  if (raw.summary) doc.summary = encode_sentences(vocab, *raw.summary);
  doc.label = raw.label;
  return doc;
}

// ---------------------------------------------------------------------------
// TF-IDF

TfIdfModel::TfIdfModel(std::vector<std::uint32_t> doc_freq, std::uint32_t num_docs)
    : doc_freq_(std::move(doc_freq)), num_docs_(num_docs) {}

TfIdfModel TfIdfModel::fit(std::span<const Document> docs) {
  if (docs.empty()) throw InvalidConfig("TF-IDF needs at least one document");
  std::vector<std::uint32_t> df;
  std::vector<std::size_t> last_seen;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& s : docs[d].sentences) {
      for (WordId w : s) {
        auto idx = static_cast<std::size_t>(w);
        if (idx >= df.size()) {
          df.resize(idx + 1, 0);
          last_seen.resize(idx + 1, SIZE_MAX);
        }
        if (last_seen[idx] != d) {
          last_seen[idx] = d;
          ++df[idx];
        }
      }
    }
  }
  return TfIdfModel(std::move(df), static_cast<std::uint32_t>(docs.size()));
}

std::uint32_t TfIdfModel::doc_freq(WordId w) const {
  auto idx = static_cast<std::size_t>(w);
  return w >= 0 && idx < doc_freq_.size() ? doc_freq_[idx] : 0;
}

double TfIdfModel::idf(WordId w) const {
  const double df = std::max<std::uint32_t>(1, doc_freq(w));
  return std::log(static_cast<double>(num_docs_) / df);
}

std::map<WordId, double> TfIdfModel::vector(std::span<const WordId> tokens) const {
  std::map<WordId, double> tf;
  for (WordId w : tokens) {
    if (w == Vocabulary::kPad || w == Vocabulary::kUnk) continue;
    tf[w] += 1.0;
  }
  for (auto& [w, weight] : tf) weight *= idf(w);
  return tf;
}

void TfIdfModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write TF-IDF file " + path);
  out << json{{"num_docs", num_docs_}, {"doc_freq", doc_freq_}}.dump() << '\n';
}

TfIdfModel TfIdfModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read TF-IDF file " + path);
  try {
    json j = json::parse(in);
    return TfIdfModel(j.at("doc_freq").get<std::vector<std::uint32_t>>(), j.at("num_docs").get<std::uint32_t>());
  } catch (const json::exception& e) {
    throw ParseError("TF-IDF file " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Corpus files

namespace {

std::vector<std::string> string_array(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string("field '") + field + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ParseError(std::string("field '") + field + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

RawDocument parse_raw(const std::string& line) {
  json j = json::parse(line);
  if (!j.is_object()) throw ParseError("expected a JSON object");
  if (!j.contains("id") || !j["id"].is_string()) throw ParseError("missing string field 'id'");
  if (!j.contains("sentences")) throw ParseError("missing field 'sentences'");
  RawDocument doc;
  doc.id = j["id"].get<std::string>();
  doc.sentences = string_array(j["sentences"], "sentences");
  if (j.contains("summary") && !j["summary"].is_null()) doc.summary = string_array(j["summary"], "summary");
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw ParseError("field 'label' must be a string");
    doc.label = j["label"].get<std::string>();
  }
  return doc;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<RawDocument> read_raw_corpus(std::istream& in) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      docs.push_back(parse_raw(line));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<RawDocument> read_raw_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus file " + path);
  return read_raw_corpus(in);
}

void write_raw_corpus(std::ostream& out, std::span<const RawDocument> docs) {
  for (const auto& d : docs) {
    json j{{"id", d.id}, {"sentences", d.sentences}};
    if (d.summary) j["summary"] = *d.summary;
    if (d.label) j["label"] = *d.label;
    out << j.dump() << '\n';
  }
}

void write_encoded_corpus(const std::string& path, std::span<const Document> docs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write encoded corpus " + path);
  for (const auto& d : docs) {
    json j{{"id", d.id}, {"sentences", d.sentences}};
    if (d.summary) j["summary"] = *d.summary;
    if (d.label) j["label"] = *d.label;
    out << j.dump() << '\n';
  }
}

std::vector<Document> read_encoded_corpus(const std::string& path, std::size_t vocab_size) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read encoded corpus " + path);
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  auto check_ids = [&](const std::vector<Sentence>& ss) {
    for (const auto& s : ss) {
      if (s.empty()) throw ParseError("empty sentence");
      for (WordId w : s) {
        if (w < 0 || static_cast<std::size_t>(w) >= vocab_size) throw ParseError("word id out of vocabulary range");
      }
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      json j = json::parse(line);
      Document d;
      d.id = j.at("id").get<std::string>();
      d.sentences = j.at("sentences").get<std::vector<Sentence>>();
      if (d.sentences.empty()) throw ParseError("document without sentences");
      check_ids(d.sentences);
      if (j.contains("summary")) {
        d.summary = j["summary"].get<std::vector<Sentence>>();
        check_ids(*d.summary);
      }
      if (j.contains("label")) d.label = j["label"].get<std::string>();
      docs.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace keyvec
