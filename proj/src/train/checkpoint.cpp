#include "keyvec/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace keyvec {

namespace {

constexpr char kMagic[4] = {'K', 'V', 'E', 'C'};
const std::string kActivationTensor = "meta.conv_activation";

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void tensor(const std::string& name, const nn::Tensor<float>& t) {
    if (name.size() > 0xffff) throw InvalidConfig("tensor name too long: " + name);
    u16(static_cast<std::uint16_t>(name.size()));
    bytes(name.data(), name.size());
    u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) f32(v);
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw CorruptFile("checkpoint truncated");
  }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.params.size() + 1));
  for (const auto& [name, p] : ckpt.params) w.tensor(name, p.value);
  const float act = ckpt.config.conv_activation == nn::Activation::kTanh ? 1.0f : 0.0f;
  w.tensor(kActivationTensor, nn::Tensor<float>({1}, {act}));
  auto& buf = w.buffer();
  w.u32(crc32(buf.data(), buf.size()));
  return std::move(buf);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw CorruptFile("checkpoint truncated");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc32(bytes.data(), body)) throw CorruptFile("checkpoint CRC mismatch");

  Reader r(bytes.data(), body);
  if (r.str(4) != std::string(kMagic, 4)) throw CorruptFile("not a KVEC checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatVersionMismatch("checkpoint format version " + std::to_string(version) + ", expected " +
                                std::to_string(kCheckpointVersion));
  }
  const std::uint32_t count = r.u32();
  Checkpoint ckpt;
  bool tanh_act = false;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    nn::Shape shape(rank);
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw CorruptFile("zero dimension in tensor " + name);
    }
    const std::size_t n = nn::shape_size(shape);
    r.need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32();
    nn::Tensor<float> t(std::move(shape), std::move(data));
    if (name == kActivationTensor) {
      tanh_act = t[0] != 0.0f;
      continue;
    }
    ckpt.params.add(name, std::move(t));
  }
  if (r.pos() != body) throw CorruptFile("trailing bytes in checkpoint");
  try {
    ckpt.config = ModelConfig::infer(ckpt.params);
  } catch (const InvalidConfig& e) {
    throw CorruptFile(std::string("checkpoint is missing model tensors: ") + e.what());
  }
  ckpt.config.conv_activation = tanh_act ? nn::Activation::kTanh : nn::Activation::kRelu;
  const auto expected = param_shapes(ckpt.config);
  if (expected.size() != ckpt.params.size()) throw CorruptFile("checkpoint has unexpected tensors");
  for (const auto& [name, shape] : expected) {
    if (!ckpt.params.contains(name) || ckpt.params.get(name).value.shape() != shape) {
      throw CorruptFile("checkpoint tensor " + name + " is missing or misshapen");
    }
  }
  return ckpt;
}

std::string vocab_path_for(const std::string& checkpoint_path) { return checkpoint_path + ".vocab"; }

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path);
  if (ckpt.vocab) ckpt.vocab->save(vocab_path_for(path));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ckpt = decode_checkpoint(bytes);
  if (std::filesystem::exists(vocab_path_for(path))) {
    ckpt.vocab = Vocabulary::load(vocab_path_for(path));
    if (ckpt.vocab->size() != ckpt.config.vocab_size) {
      throw CorruptFile("vocabulary " + vocab_path_for(path) + " has " + std::to_string(ckpt.vocab->size()) +
                        " entries, checkpoint expects " + std::to_string(ckpt.config.vocab_size));
    }
  }
  return ckpt;
}

Checkpoint make_checkpoint(const Model<float>& model, std::optional<Vocabulary> vocab) {
  Checkpoint ckpt{model.config, nn::ParamStore<float>(model.params.seed()), std::move(vocab)};
  for (const auto& [name, p] : model.params) ckpt.params.add(name, p.value);
  return ckpt;
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  Model<float> model{ckpt.config, nn::ParamStore<float>(ckpt.params.seed())};
  for (const auto& [name, p] : ckpt.params) model.params.add(name, p.value);
  return model;
}

}  // namespace keyvec
