#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace segkey {

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 of a byte string.
Digest sha256(std::span<const std::uint8_t> bytes);

// 32-byte secret from which every permutation and mask is derived.
class SecretKey {
 public:
  static constexpr std::size_t kSize = 32;
  using Bytes = std::array<std::uint8_t, kSize>;

  explicit SecretKey(const Bytes& bytes) : bytes_(bytes) {}

  // Accepts exactly 64 hex digits (either case); throws KeyError otherwise.
  static SecretKey from_hex(std::string_view hex);
  std::string to_hex() const;

  const Bytes& bytes() const { return bytes_; }

  friend bool operator==(const SecretKey&, const SecretKey&) = default;

 private:
  Bytes bytes_;
};

// Key file: one line of 64 lowercase hex characters, optional trailing newline.
SecretKey read_key_file(const std::filesystem::path& path);
void write_key_file(const std::filesystem::path& path, const SecretKey& key);

// Source of 64-bit words. Everything that consumes randomness goes through
// this interface so tests can substitute a fixed stream.
class RandomStream {
 public:
  virtual ~RandomStream() = default;
  virtual std::uint64_t next_u64() = 0;

  // Uniform integer in [0, n) by rejection; n must be >= 1.
  std::uint64_t uniform_below(std::uint64_t n);
  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Standard normal via Box-Muller.
  double normal();
  // Little-endian serialization of successive words.
  void fill_bytes(std::span<std::uint8_t> out);
};

// splitmix64 counter-mode generator.
class SplitMix64 final : public RandomStream {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() override;

 private:
  std::uint64_t state_;
};

// Emits zeros forever. Drives Fisher-Yates to the identity and masks to zero.
class ZeroStream final : public RandomStream {
 public:
  std::uint64_t next_u64() override { return 0; }
};

enum class Purpose : std::uint8_t {
  kChannelPerm = 1,
  kShfPerm = 2,
  kNpMask = 3,
  kFfxKey = 4,
};

struct DeriveContext {
  Purpose purpose = Purpose::kChannelPerm;
  std::uint64_t id = 0;  // hook or block identifier
  std::uint64_t size = 1;
};

// seed = first 8 bytes (big-endian) of
//   SHA-256(key || purpose || id as u64 BE || size as u64 BE)
std::uint64_t derive_seed(const SecretKey& key, const DeriveContext& ctx);

// Deterministic stream for (key, ctx). Throws InvalidArgument when size == 0.
SplitMix64 derive_stream(const SecretKey& key, const DeriveContext& ctx);

// Bijection over channels. Stored 0-based: output channel i reads input
// channel source(i). The serialized form is 1-based.
class ChannelPermutation {
 public:
  ChannelPermutation() = default;

  static ChannelPermutation identity(std::size_t n);
  // Validates that `mapping` is a permutation of 1..n.
  static ChannelPermutation from_one_based(std::span<const std::int64_t> mapping);
  static ChannelPermutation from_zero_based(std::vector<std::uint32_t> mapping);

  std::size_t size() const { return map_.size(); }
  std::uint32_t source(std::size_t i) const { return map_[i]; }
  std::span<const std::uint32_t> zero_based() const { return map_; }
  std::vector<std::int64_t> one_based() const;
  bool is_identity() const;

  friend bool operator==(const ChannelPermutation&,
                         const ChannelPermutation&) = default;

 private:
  std::vector<std::uint32_t> map_;
};

// Unbiased forward Fisher-Yates: for i in [0, n-1), swap(i, i + U[0, n-i)).
ChannelPermutation permutation_from_stream(RandomStream& stream, std::size_t n);

// Channel permutation for hook `hook_id` of width `channels`.
ChannelPermutation derive_permutation(const SecretKey& key,
                                      std::uint64_t hook_id,
                                      std::size_t channels);

// q with q[p[i]] = i.
ChannelPermutation invert_permutation(const ChannelPermutation& p);

// Permutation equivalent to applying `first` then `second`.
ChannelPermutation compose(const ChannelPermutation& first,
                           const ChannelPermutation& second);

SecretKey random_key(RandomStream& entropy);
// Uses std::random_device.
SecretKey random_key();
// Redraws until the result differs from `exclude`.
SecretKey random_key_excluding(RandomStream& entropy, const SecretKey& exclude);

}  // namespace segkey
