#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "segkey/image.hpp"
#include "segkey/key.hpp"

namespace segkey {

// Keyed block-wise input transforms of the conventional learnable-encryption
// baseline.
enum class BlockKind { kShf, kNp, kFfx };

std::string_view to_string(BlockKind kind);
// "shf" | "np" | "ffx"; throws InvalidArgument otherwise.
BlockKind parse_block_kind(std::string_view name);

struct BlockTransformConfig {
  BlockKind kind = BlockKind::kShf;
  std::size_t block_size = 1;
  SecretKey key{SecretKey::Bytes{}};
};

// Throws InvalidArgument unless block_size >= 1 divides both dimensions.
void check_block_divides(const ImageU8& img, std::size_t block_size);

// Permutation of the B*B positions inside a block, shared by all blocks.
ChannelPermutation shf_permutation(const SecretKey& key, std::size_t block_size);

// out[block position i] = in[block position perm(i)] for every block, all
// channels moving together.
ImageU8 shuffle_blocks(const ImageU8& img, const ChannelPermutation& perm,
                       std::size_t block_size);

ImageU8 shf(const ImageU8& img, const BlockTransformConfig& cfg);

// One bit per (channel, row, col) inside a block; 1 means negate.
struct NpMask {
  std::size_t channels = 0;
  std::size_t block_size = 0;
  std::vector<std::uint8_t> bits;
};

// Bits are taken LSB-first from successive stream words.
NpMask np_mask_from_stream(RandomStream& stream, std::size_t channels,
                           std::size_t block_size);
NpMask derive_np_mask(const SecretKey& key, std::size_t channels,
                      std::size_t block_size);
ImageU8 apply_np_mask(const ImageU8& img, const NpMask& mask);

ImageU8 np_transform(const ImageU8& img, const BlockTransformConfig& cfg);

// Format-preserving cipher on [0, 255]: an 8-round balanced Feistel network
// over 4-bit halves. The round function is the top nibble of
// SHA-256(subkey || round || channel || half). Tables are precomputed per
// channel, so construction costs 128 hashes per channel.
class FfxCipher {
 public:
  static constexpr int kRounds = 8;
  using Subkey = std::array<std::uint8_t, 32>;

  FfxCipher(const SecretKey& key, std::size_t channels);

  std::uint8_t encrypt(std::uint8_t v, std::size_t channel) const {
    return forward_[channel][v];
  }
  std::uint8_t decrypt(std::uint8_t v, std::size_t channel) const {
    return inverse_[channel][v];
  }

  static Subkey subkey(const SecretKey& key);
  static std::uint8_t round_function(const Subkey& subkey, int round,
                                     std::size_t channel, std::uint8_t half);

 private:
  std::vector<std::array<std::uint8_t, 256>> forward_;
  std::vector<std::array<std::uint8_t, 256>> inverse_;
};

// Value-only and position-independent; block_size is not consulted.
ImageU8 ffx_transform(const ImageU8& img, const BlockTransformConfig& cfg,
                      bool decrypt);

// Dispatches on cfg.kind. For SHF the inverse shuffle is used when decrypting;
// NP is its own inverse.
ImageU8 apply_block_transform(const ImageU8& img,
                              const BlockTransformConfig& cfg,
                              bool decrypt = false);

}  // namespace segkey
