#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "keyvec/corpus.hpp"
#include "keyvec/error.hpp"
#include "support/temp_dir.hpp"

using namespace keyvec;

namespace {

RawDocument raw(std::string id, std::vector<std::string> sentences) {
  RawDocument d;
  d.id = std::move(id);
  d.sentences = std::move(sentences);
  return d;
}

std::vector<std::string> words_of(const Vocabulary& v) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v.word(static_cast<WordId>(i)));
  return out;
}

// The two-document corpus {"a b", "a c"} encoded against its own vocabulary.
struct TwoDocs {
  Vocabulary vocab;
  std::vector<Document> docs;
  TfIdfModel tfidf;

  TwoDocs() {
    std::vector<RawDocument> r{raw("1", {"a b"}), raw("2", {"a c"})};
    vocab = Vocabulary::build(r, 1, 100);
    for (const auto& d : r) docs.push_back(encode_document(vocab, d));
    tfidf = compute_tfidf(docs);
  }
};

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Deep Learning!") == std::vector<std::string>{"deep", "learning"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("word2vec, 2013") == std::vector<std::string>{"word2vec", "2013"});
  CHECK(tokenize("  --a--B  ") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("tokenize is idempotent on its joined output") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "aZ9 .,-!x\tQ";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const auto len = std::uniform_int_distribution<int>(0, 40)(rng);
    for (int i = 0; i < len; ++i) text += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
    auto once = tokenize(text);
    std::string joined;
    for (const auto& t : once) joined += (joined.empty() ? "" : " ") + t;
    CHECK(tokenize(joined) == once);
  }
}

TEST_CASE("vocabulary ordering, thresholds and ties") {
  std::vector<RawDocument> corpus{raw("1", {"a a b"}), raw("2", {"a c"})};
  CHECK(words_of(Vocabulary::build(corpus, 1, 10)) == std::vector<std::string>{"<pad>", "<unk>", "a", "b", "c"});
  CHECK(words_of(Vocabulary::build(corpus, 2, 10)) == std::vector<std::string>{"<pad>", "<unk>", "a"});
  std::vector<RawDocument> ties{raw("1", {"x y"}), raw("2", {"y x"})};
  CHECK(words_of(Vocabulary::build(ties, 1, 10)) == std::vector<std::string>{"<pad>", "<unk>", "x", "y"});
  CHECK(Vocabulary::build(corpus, 1, 3).size() == 3);
  CHECK_THROWS_AS(Vocabulary::build(corpus, 0, 10), InvalidConfig);
}

TEST_CASE("vocabulary counts summary words too") {
  auto d = raw("1", {"a"});
  d.summary = std::vector<std::string>{"zeta zeta"};
  auto v = Vocabulary::build(std::vector<RawDocument>{d}, 2, 10);
  CHECK(v.contains("zeta"));
  CHECK_FALSE(v.contains("a"));
}

TEST_CASE("vocabulary ids and words are mutually inverse") {
  std::vector<RawDocument> corpus{raw("1", {"the cat sat on the mat", "a dog"}), raw("2", {"the end"})};
  auto v = Vocabulary::build(corpus, 1, 100);
  CHECK(v.id("<pad>") == Vocabulary::kPad);
  CHECK(v.id("<unk>") == Vocabulary::kUnk);
  for (std::size_t i = 2; i < v.size(); ++i) CHECK(v.id(v.word(static_cast<WordId>(i))) == static_cast<WordId>(i));
  CHECK(v.id("never-seen") == Vocabulary::kUnk);
  CHECK_THROWS_AS(v.word(static_cast<WordId>(v.size())), IndexOutOfRange);
  auto toks = tokenize("the cat sat on the mat");
  CHECK(v.decode(v.encode(toks)) == toks);
}

TEST_CASE("vocabulary save/load round trip") {
  std::vector<RawDocument> corpus{raw("1", {"b b a c"})};
  auto v = Vocabulary::build(corpus, 1, 100);
  std::stringstream ss;
  v.save(ss);
  CHECK(ss.str().rfind("<pad>\t0\n<unk>\t0\nb\t2\n", 0) == 0);
  auto back = Vocabulary::load(ss);
  CHECK(back == v);
  std::stringstream bad("<pad>\t0\n<unk>\t0\nx\tnotanumber\n");
  CHECK_THROWS_AS(Vocabulary::load(bad), ParseError);
  std::stringstream missing("x\t1\n");
  CHECK_THROWS_AS(Vocabulary::load(missing), ParseError);
}

TEST_CASE("encode_document maps OOV to UNK and drops empty sentences") {
  auto v = Vocabulary::build(std::vector<RawDocument>{raw("v", {"a b"})}, 1, 10);
  auto d = encode_document(v, raw("d", {"a b", "", "zzz"}));
  REQUIRE(d.sentences.size() == 2);
  CHECK(d.sentences[0] == Sentence{v.id("a"), v.id("b")});
  CHECK(d.sentences[1] == Sentence{Vocabulary::kUnk});
  CHECK(encode_document(v, raw("d", {"a"})).sentences == std::vector<Sentence>{{v.id("a")}});
  CHECK_THROWS_AS(encode_document(v, raw("d", {"", ""})), EmptyDocument);
  CHECK_THROWS_AS(encode_document(v, raw("d", {"!!", "?"})), EmptyDocument);
}

TEST_CASE("encode_document keeps summary and label") {
  auto v = Vocabulary::build(std::vector<RawDocument>{raw("v", {"a b"})}, 1, 10);
  auto r = raw("d", {"a"});
  r.summary = std::vector<std::string>{"b", ""};
  r.label = "venue";
  auto d = encode_document(v, r);
  REQUIRE(d.has_summary());
  CHECK(d.summary->size() == 1);
  CHECK(d.label == "venue");
}

TEST_CASE("idf on the two-document corpus") {
  TwoDocs c;
  CHECK(c.tfidf.num_docs() == 2);
  CHECK(c.tfidf.idf(c.vocab.id("a")) == 0.0);
  CHECK(c.tfidf.idf(c.vocab.id("b")) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // absent word: doc_freq clamps to 1
  CHECK(c.tfidf.idf(static_cast<WordId>(c.vocab.size() + 50)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  auto single = compute_tfidf(std::span<const Document>(c.docs.data(), 1));
  CHECK(single.idf(c.vocab.id("a")) == 0.0);
  CHECK(single.idf(c.vocab.id("b")) == 0.0);
  CHECK_THROWS_AS(compute_tfidf(std::span<const Document>()), InvalidConfig);
}

TEST_CASE("tfidf_vector weights") {
  TwoDocs c;
  Sentence aab{c.vocab.id("a"), c.vocab.id("a"), c.vocab.id("b")};
  auto w = c.tfidf.vector(aab);
  REQUIRE(w.size() == 2);
  CHECK(w.at(c.vocab.id("a")) == 0.0);
  CHECK(w.at(c.vocab.id("b")) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(c.tfidf.vector(Sentence{}).empty());
  CHECK(c.tfidf.vector(Sentence{Vocabulary::kUnk, Vocabulary::kUnk, Vocabulary::kPad}).empty());
}

TEST_CASE("idf bounds and tfidf sign on random corpora") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n_docs = std::uniform_int_distribution<int>(1, 12)(rng);
    std::vector<Document> docs;
    for (int i = 0; i < n_docs; ++i) {
      Document d;
      d.id = std::to_string(i);
      const auto n_sent = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int s = 0; s < n_sent; ++s) {
        Sentence sent;
        const auto len = std::uniform_int_distribution<int>(1, 6)(rng);
        for (int k = 0; k < len; ++k) sent.push_back(std::uniform_int_distribution<WordId>(1, 20)(rng));
        d.sentences.push_back(sent);
      }
      docs.push_back(d);
    }
    auto m = compute_tfidf(docs);
    const double upper = std::log(static_cast<double>(n_docs));
    for (WordId w = 2; w <= 20; ++w) {
      const double idf = m.idf(w);
      CHECK(idf >= 0.0);
      CHECK(idf <= upper + 1e-12);
      // the df clamp makes absent words look ubiquitous in a one-document corpus
      if (m.doc_freq(w) > 0) CHECK((idf == 0.0) == (m.doc_freq(w) == static_cast<std::uint32_t>(n_docs)));
    }
    for (const auto& d : docs) {
      for (const auto& s : d.sentences) {
        for (const auto& [w, weight] : m.vector(s)) {
          CHECK(weight >= 0.0);
          CHECK((weight == 0.0) == (m.idf(w) == 0.0));
        }
      }
    }
  }
}

TEST_CASE("tfidf model save/load") {
  TwoDocs c;
  keyvec::testing::TempDir dir;
  c.tfidf.save(dir.file("tfidf.json"));
  auto back = TfIdfModel::load(dir.file("tfidf.json"));
  CHECK(back.num_docs() == c.tfidf.num_docs());
  CHECK(back.doc_freqs() == c.tfidf.doc_freqs());
}

TEST_CASE("raw corpus parsing") {
  std::stringstream good(
      R"({"id": "a", "sentences": ["One two."], "summary": ["One."], "label": "x"})"
      "\n\n"
      R"({"id": "b", "sentences": ["Three"]})"
      "\n");
  auto docs = read_raw_corpus(good);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].summary == std::vector<std::string>{"One."});
  CHECK(docs[0].label == "x");
  CHECK_FALSE(docs[1].summary.has_value());

  std::stringstream round;
  write_raw_corpus(round, docs);
  auto again = read_raw_corpus(round);
  CHECK(again[0].sentences == docs[0].sentences);
  CHECK(again[1].id == "b");

  std::stringstream missing(R"({"id": "a", "sentences": ["x"]})"
                            "\n"
                            R"({"id": "b"})"
                            "\n");
  try {
    read_raw_corpus(missing);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("sentences") != std::string::npos);
  }
  std::stringstream broken("{not json\n");
  CHECK_THROWS_AS(read_raw_corpus(broken), ParseError);
}

TEST_CASE("encoded corpus round trip and validation") {
  TwoDocs c;
  c.docs[0].summary = std::vector<Sentence>{{c.vocab.id("b")}};
  c.docs[1].label = "lbl";
  keyvec::testing::TempDir dir;
  const auto path = dir.file("corpus.jsonl");
  write_encoded_corpus(path, c.docs);
  auto back = read_encoded_corpus(path, c.vocab.size());
  REQUIRE(back.size() == 2);
  CHECK(back[0].sentences == c.docs[0].sentences);
  CHECK(back[0].summary == c.docs[0].summary);
  CHECK(back[1].label == "lbl");
  CHECK_THROWS_AS(read_encoded_corpus(path, 2), ParseError);
  CHECK_THROWS_AS(read_encoded_corpus(dir.file("missing.jsonl"), 10), IoError);
}
