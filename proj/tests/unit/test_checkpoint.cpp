#include "doctest.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

#include "keyvec/checkpoint.hpp"
#include "keyvec/encoder.hpp"
#include "keyvec/error.hpp"
#include "support/model_fixture.hpp"
#include "support/temp_dir.hpp"

using namespace keyvec;

namespace {

// Bit-at-a-time reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t reference_crc(const std::uint8_t* data, std::size_t n) {
  std::uint32_t crc = 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

void put32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
}

// Rewrites the trailing checksum after a deliberate edit.
void reseal(std::vector<std::uint8_t>& b) { put32(b, b.size() - 4, reference_crc(b.data(), b.size() - 4)); }

Model<float> small_model(std::uint64_t seed, nn::Activation act = nn::Activation::kRelu) {
  ModelConfig cfg;
  cfg.vocab_size = 11;
  cfg.word_dim = 5;
  cfg.filters_per_width = 4;
  cfg.lstm_hidden = 6;
  cfg.doc_dim = 7;
  cfg.conv_activation = act;
  return init_model<float>(cfg, seed);
}

Vocabulary small_vocab() {
  std::vector<RawDocument> raw(1);
  raw[0].id = "v";
  raw[0].sentences = {"a b c d e f g h i"};
  return Vocabulary::build(raw, 1, 100);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("crc32 matches the bitwise reference") {
  const std::string check = "123456789";
  const auto* p = reinterpret_cast<const std::uint8_t*>(check.data());
  CHECK(crc32(p, check.size()) == 0xCBF43926u);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> buf(std::uniform_int_distribution<std::size_t>(0, 300)(rng));
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
    CHECK(crc32(buf.data(), buf.size()) == reference_crc(buf.data(), buf.size()));
  }
}

TEST_CASE("encoded layout follows the documented format") {
  auto model = small_model(3);
  auto bytes = encode_checkpoint(make_checkpoint(model));
  REQUIRE(bytes.size() > 16);
  CHECK(std::memcmp(bytes.data(), "KVEC", 4) == 0);
  CHECK(le32(bytes, 4) == 1);
  CHECK(le32(bytes, 8) == model.params.size() + 1);
  CHECK(le32(bytes, bytes.size() - 4) == reference_crc(bytes.data(), bytes.size() - 4));

  // walk the tensor records by hand
  std::size_t pos = 12;
  std::vector<std::string> names;
  for (std::uint32_t k = 0; k < le32(bytes, 8); ++k) {
    const std::size_t len = bytes[pos] | (bytes[pos + 1] << 8);
    pos += 2;
    names.emplace_back(reinterpret_cast<const char*>(&bytes[pos]), len);
    pos += len;
    const std::size_t rank = bytes[pos++];
    std::size_t count = 1;
    nn::Shape shape;
    for (std::size_t r = 0; r < rank; ++r, pos += 4) {
      shape.push_back(le32(bytes, pos));
      count *= shape.back();
    }
    if (model.params.contains(names.back())) {
      const auto& t = model.params.get(names.back()).value;
      CHECK(t.shape() == shape);
      float first;
      const std::uint32_t bits = le32(bytes, pos);
      std::memcpy(&first, &bits, 4);
      CHECK(first == t[0]);
    }
    pos += 4 * count;
  }
  CHECK(pos == bytes.size() - 4);
  CHECK(names.back() == "meta.conv_activation");
}

TEST_CASE("round trip reproduces every tensor bitwise") {
  for (auto act : {nn::Activation::kRelu, nn::Activation::kTanh}) {
    auto model = small_model(5, act);
    auto back = decode_checkpoint(encode_checkpoint(make_checkpoint(model)));
    CHECK(back.config == model.config);
    REQUIRE(back.params.size() == model.params.size());
    for (const auto& [name, p] : model.params) {
      const auto& q = back.params.get(name).value;
      CHECK(q.shape() == p.value.shape());
      CHECK(std::memcmp(q.data().data(), p.value.data().data(), 4 * q.size()) == 0);
    }
  }
}

TEST_CASE("save/load preserves embeddings and vocabulary") {
  auto model = small_model(6);
  auto vocab = small_vocab();
  REQUIRE(vocab.size() == model.config.vocab_size);
  keyvec::testing::TempDir dir;
  const auto path = dir.file("model.kvec");
  save_checkpoint(make_checkpoint(model, vocab), path);
  auto ckpt = load_checkpoint(path);
  REQUIRE(ckpt.vocab.has_value());
  CHECK(*ckpt.vocab == vocab);
  auto loaded = model_from_checkpoint(ckpt);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 5; ++i) {
    auto doc = keyvec::testing::random_document(rng, model.config.vocab_size);
    auto a = embed_document(model, doc);
    auto b = embed_document(loaded, doc);
    CHECK(a.embedding == b.embedding);
    CHECK(a.salience == b.salience);
  }
}

TEST_CASE("damaged files are rejected") {
  auto model = small_model(7);
  auto good = encode_checkpoint(make_checkpoint(model));
  keyvec::testing::TempDir dir;
  const auto path = dir.file("m.kvec");

  SUBCASE("truncated") {
    auto cut = good;
    cut.resize(cut.size() / 2);
    CHECK_THROWS_AS(decode_checkpoint(cut), CorruptFile);
    cut.resize(6);
    CHECK_THROWS_AS(decode_checkpoint(cut), CorruptFile);
  }
  SUBCASE("any flipped byte") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
      auto bad = good;
      const auto at = std::uniform_int_distribution<std::size_t>(0, bad.size() - 1)(rng);
      bad[at] ^= static_cast<std::uint8_t>(1u << (trial % 8));
      CHECK_THROWS_AS(decode_checkpoint(bad), CorruptFile);
    }
  }
  SUBCASE("future version") {
    auto future = good;
    put32(future, 4, 2);
    reseal(future);
    CHECK_THROWS_AS(decode_checkpoint(future), FormatVersionMismatch);
  }
  SUBCASE("foreign magic") {
    auto foreign = good;
    foreign[0] = 'X';
    reseal(foreign);
    CHECK_THROWS_AS(decode_checkpoint(foreign), CorruptFile);
  }
  SUBCASE("missing tensors") {
    auto partial = make_checkpoint(model);
    nn::ParamStore<float> fewer;
    for (const auto& [name, p] : partial.params) {
      if (name != param_names::kPoolB) fewer.add(name, p.value);
    }
    partial.params = fewer;
    CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(partial)), CorruptFile);
  }
  SUBCASE("on disk") {
    CHECK_THROWS_AS(load_checkpoint(dir.file("absent.kvec")), IoError);
    auto bad = good;
    bad[bad.size() / 3] ^= 0x40;
    write_bytes(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), CorruptFile);
    write_bytes(path, good);
    CHECK_NOTHROW(load_checkpoint(path));
    CHECK(read_bytes(path) == good);
    // a vocabulary of the wrong size is a mismatch, not a silent reuse
    std::vector<RawDocument> raw(1);
    raw[0].id = "x";
    raw[0].sentences = {"only"};
    Vocabulary::build(raw, 1, 10).save(vocab_path_for(path));
    CHECK_THROWS_AS(load_checkpoint(path), CorruptFile);
  }
}
