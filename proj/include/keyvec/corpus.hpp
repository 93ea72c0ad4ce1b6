#ifndef KEYVEC_CORPUS_HPP
#define KEYVEC_CORPUS_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace keyvec {

using WordId = std::int32_t;
using Sentence = std::vector<WordId>;

/// A document as read from the corpus file, before tokenization.
struct RawDocument {
  std::string id;
  std::vector<std::string> sentences;
  std::optional<std::vector<std::string>> summary;
  std::optional<std::string> label;
};

/// Lowercases and splits on every non-alphanumeric byte.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr WordId kPad = 0;
  static constexpr WordId kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  /// Counts every token in sentences and summaries. Keeps words with
  /// count >= min_count, most frequent first, ties in lexicographic order,
  /// then truncates so that size() <= max_size (specials included).
  static Vocabulary build(std::span<const RawDocument> docs, std::size_t min_count, std::size_t max_size);

  WordId id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(WordId id) const;
  std::uint64_t frequency(WordId id) const { return freq_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return words_.size(); }

  Sentence encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const WordId> ids) const;

  /// One `word<TAB>frequency` line per entry, in id order.
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.freq_ == b.freq_;
  }

 private:
  void push(std::string word, std::uint64_t freq);

  std::vector<std::string> words_;
  std::vector<std::uint64_t> freq_;
  std::unordered_map<std::string, WordId> ids_;
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
  std::optional<std::vector<Sentence>> summary;
  std::optional<std::string> label;

  std::size_t num_sentences() const { return sentences.size(); }
  bool has_summary() const { return summary.has_value() && !summary->empty(); }
};

/// Tokenizes and maps words to ids; unknown words become UNK and empty
/// sentences are dropped. Throws EmptyDocument when nothing remains.
Document encode_document(const Vocabulary& vocab, const RawDocument& raw);

class TfIdfModel {
 public:
  TfIdfModel() = default;
  TfIdfModel(std::vector<std::uint32_t> doc_freq, std::uint32_t num_docs);

  /// Document frequencies over the body sentences of `docs`.
  static TfIdfModel fit(std::span<const Document> docs);

  /// ln(num_docs / max(1, doc_freq(w))).
  double idf(WordId w) const;
  std::uint32_t doc_freq(WordId w) const;
  std::uint32_t num_docs() const { return num_docs_; }
  const std::vector<std::uint32_t>& doc_freqs() const { return doc_freq_; }

  /// tf(w) * idf(w) with raw counts as tf; PAD and UNK are skipped.
  std::map<WordId, double> vector(std::span<const WordId> tokens) const;

  void save(const std::string& path) const;
  static TfIdfModel load(const std::string& path);

 private:
  std::vector<std::uint32_t> doc_freq_;
  std::uint32_t num_docs_ = 0;
};

inline TfIdfModel compute_tfidf(std::span<const Document> docs) { return TfIdfModel::fit(docs); }

// Corpus files: JSON Lines, one document per line.

/// Parses raw documents. Throws ParseError naming the offending line.
std::vector<RawDocument> read_raw_corpus(std::istream& in);
std::vector<RawDocument> read_raw_corpus(const std::string& path);
void write_raw_corpus(std::ostream& out, std::span<const RawDocument> docs);

/// Encoded corpus: sentences stored as arrays of word ids.
void write_encoded_corpus(const std::string& path, std::span<const Document> docs);
std::vector<Document> read_encoded_corpus(const std::string& path, std::size_t vocab_size);

}  // namespace keyvec

#endif  // KEYVEC_CORPUS_HPP
