#ifndef KEYVEC_CHECKPOINT_HPP
#define KEYVEC_CHECKPOINT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "keyvec/corpus.hpp"
#include "keyvec/model.hpp"

namespace keyvec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trained model state. Parameters are stored in single precision.
struct Checkpoint {
  ModelConfig config;
  nn::ParamStore<float> params;
  std::optional<Vocabulary> vocab;
};

/// Layout (little-endian):
///   "KVEC" | u32 version | u32 tensor count |
///   per tensor: u16 name length, name bytes, u8 rank, u32 dims[rank], f32 payload |
///   u32 CRC32 of everything before it.
/// The convolution activation travels as a one-element tensor
/// "meta.conv_activation" (0 = relu, 1 = tanh).
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes `path`, plus `path.vocab` when the checkpoint carries a vocabulary.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Reads `path` and, if present, `path.vocab`.
Checkpoint load_checkpoint(const std::string& path);

std::string vocab_path_for(const std::string& checkpoint_path);

Checkpoint make_checkpoint(const Model<float>& model, std::optional<Vocabulary> vocab = std::nullopt);
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

/// CRC-32 (IEEE) as used by zlib.
std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

}  // namespace keyvec

#endif  // KEYVEC_CHECKPOINT_HPP
