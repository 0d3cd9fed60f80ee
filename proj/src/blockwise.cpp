#include "segkey/blockwise.hpp"

#include "segkey/errors.hpp"

namespace segkey {

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kShf: return "shf";
    case BlockKind::kNp: return "np";
    case BlockKind::kFfx: return "ffx";
  }
  return "?";
}

BlockKind parse_block_kind(std::string_view name) {
  if (name == "shf") return BlockKind::kShf;
  if (name == "np") return BlockKind::kNp;
  if (name == "ffx") return BlockKind::kFfx;
  throw InvalidArgument("unknown block transform '" + std::string(name) + "'");
}

void check_block_divides(const ImageU8& img, std::size_t block_size) {
  if (block_size == 0 || img.height % block_size != 0 ||
      img.width % block_size != 0) {
    throw InvalidArgument("block size " + std::to_string(block_size) +
                          " does not divide image size " +
                          std::to_string(img.height) + "x" +
                          std::to_string(img.width));
  }
}

ChannelPermutation shf_permutation(const SecretKey& key, std::size_t block_size) {
  const std::size_t n = block_size * block_size;
  SplitMix64 stream = derive_stream(key, {Purpose::kShfPerm, 0, n});
  return permutation_from_stream(stream, n);
}

ImageU8 shuffle_blocks(const ImageU8& img, const ChannelPermutation& perm,
                       std::size_t block_size) {
  check_block_divides(img, block_size);
  if (perm.size() != block_size * block_size) {
    throw InvalidArgument("shuffle permutation size does not match block");
  }
  ImageU8 out(img.channels, img.height, img.width);
  for (std::size_t by = 0; by < img.height; by += block_size) {
    for (std::size_t bx = 0; bx < img.width; bx += block_size) {
      for (std::size_t i = 0; i < perm.size(); ++i) {
        const std::size_t src = perm.source(i);
        const std::size_t dy = by + i / block_size, dx = bx + i % block_size;
        const std::size_t sy = by + src / block_size, sx = bx + src % block_size;
        for (std::size_t c = 0; c < img.channels; ++c) {
          out.at(c, dy, dx) = img.at(c, sy, sx);
        }
      }
    }
  }
  return out;
}

ImageU8 shf(const ImageU8& img, const BlockTransformConfig& cfg) {
  check_block_divides(img, cfg.block_size);
  return shuffle_blocks(img, shf_permutation(cfg.key, cfg.block_size),
                        cfg.block_size);
}

NpMask np_mask_from_stream(RandomStream& stream, std::size_t channels,
                           std::size_t block_size) {
  NpMask mask{channels, block_size, {}};
  const std::size_t n = channels * block_size * block_size;
  mask.bits.resize(n);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) word = stream.next_u64();
    mask.bits[i] = static_cast<std::uint8_t>(word & 1);
    word >>= 1;
  }
  return mask;
}

NpMask derive_np_mask(const SecretKey& key, std::size_t channels,
                      std::size_t block_size) {
  SplitMix64 stream = derive_stream(
      key, {Purpose::kNpMask, 0, channels * block_size * block_size});
  return np_mask_from_stream(stream, channels, block_size);
}

ImageU8 apply_np_mask(const ImageU8& img, const NpMask& mask) {
  check_block_divides(img, mask.block_size);
  if (mask.channels != img.channels) {
    throw InvalidArgument("NP mask channel count does not match image");
  }
  const std::size_t b = mask.block_size;
  ImageU8 out = img;
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x)
        if (mask.bits[(c * b + y % b) * b + x % b]) {
          out.at(c, y, x) = static_cast<std::uint8_t>(255 - img.at(c, y, x));
        }
  return out;
}

ImageU8 np_transform(const ImageU8& img, const BlockTransformConfig& cfg) {
  check_block_divides(img, cfg.block_size);
  return apply_np_mask(img,
                       derive_np_mask(cfg.key, img.channels, cfg.block_size));
}

FfxCipher::Subkey FfxCipher::subkey(const SecretKey& key) {
  SplitMix64 stream = derive_stream(key, {Purpose::kFfxKey, 0, 32});
  Subkey out{};
  stream.fill_bytes(out);
  return out;
}

std::uint8_t FfxCipher::round_function(const Subkey& subkey, int round,
                                       std::size_t channel, std::uint8_t half) {
  std::array<std::uint8_t, 35> message{};
  std::copy(subkey.begin(), subkey.end(), message.begin());
  message[32] = static_cast<std::uint8_t>(round);
  message[33] = static_cast<std::uint8_t>(channel);
  message[34] = half;
  return sha256(message)[0] >> 4;
}

FfxCipher::FfxCipher(const SecretKey& key, std::size_t channels)
    : forward_(channels), inverse_(channels) {
  const Subkey sk = subkey(key);
  for (std::size_t c = 0; c < channels; ++c) {
    std::array<std::array<std::uint8_t, 16>, kRounds> table{};
    for (int r = 0; r < kRounds; ++r)
      for (std::uint8_t h = 0; h < 16; ++h)
        table[r][h] = round_function(sk, r, c, h);
    for (int v = 0; v < 256; ++v) {
      std::uint8_t left = static_cast<std::uint8_t>(v >> 4);
      std::uint8_t right = static_cast<std::uint8_t>(v & 0xF);
      for (int r = 0; r < kRounds; ++r) {
        const std::uint8_t next = left ^ table[r][right];
        left = right;
        right = next;
      }
      const auto e = static_cast<std::uint8_t>(left << 4 | right);
      forward_[c][v] = e;
      inverse_[c][e] = static_cast<std::uint8_t>(v);
    }
  }
}

ImageU8 ffx_transform(const ImageU8& img, const BlockTransformConfig& cfg,
                      bool decrypt) {
  const FfxCipher cipher(cfg.key, img.channels);
  ImageU8 out = img;
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      std::uint8_t& v = out.data[c * plane + i];
      v = decrypt ? cipher.decrypt(v, c) : cipher.encrypt(v, c);
    }
  }
  return out;
}

ImageU8 apply_block_transform(const ImageU8& img,
                              const BlockTransformConfig& cfg, bool decrypt) {
  check_block_divides(img, cfg.block_size);
  switch (cfg.kind) {
    case BlockKind::kShf: {
      ChannelPermutation perm = shf_permutation(cfg.key, cfg.block_size);
      if (decrypt) perm = invert_permutation(perm);
      return shuffle_blocks(img, perm, cfg.block_size);
    }
    case BlockKind::kNp:
      return np_transform(img, cfg);
    case BlockKind::kFfx:
      return ffx_transform(img, cfg, decrypt);
  }
  throw InvalidArgument("unknown block transform");
}

}  // namespace segkey
