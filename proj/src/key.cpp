#include "segkey/key.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "segkey/errors.hpp"

namespace segkey {

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest out{};
  SHA256(bytes.data(), bytes.size(), out.data());
  return out;
}

namespace {

int hex_value(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

void append_u64_be(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

}  // namespace

SecretKey SecretKey::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kSize) {
    throw KeyError("key must be " + std::to_string(2 * kSize) +
                   " hex characters, got " + std::to_string(hex.size()));
  }
  Bytes bytes{};
  for (std::size_t i = 0; i < kSize; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw KeyError("key contains a non-hex character");
    bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return SecretKey(bytes);
}

std::string SecretKey::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * kSize);
  for (std::uint8_t b : bytes_) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

SecretKey read_key_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KeyError("cannot open key file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  if (!text.empty() && text.back() == '\n') text.pop_back();
  if (!text.empty() && text.back() == '\r') text.pop_back();
  try {
    return SecretKey::from_hex(text);
  } catch (const KeyError& e) {
    throw KeyError(path.string() + ": " + e.what());
  }
}

void write_key_file(const std::filesystem::path& path, const SecretKey& key) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write key file " + path.string());
  out << key.to_hex() << '\n';
}

std::uint64_t RandomStream::uniform_below(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("uniform_below: bound must be positive");
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  // Draws above the last complete block of n residues are rejected.
  const std::uint64_t last = kMax - (kMax % n + 1) % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x <= last) return x % n;
  }
}

double RandomStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

void RandomStream::fill_bytes(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i < out.size()) {
    std::uint64_t word = next_u64();
    for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
}

std::uint64_t SplitMix64::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(const SecretKey& key, const DeriveContext& ctx) {
  std::vector<std::uint8_t> message(key.bytes().begin(), key.bytes().end());
  message.push_back(static_cast<std::uint8_t>(ctx.purpose));
  append_u64_be(message, ctx.id);
  append_u64_be(message, ctx.size);
  const Digest digest = sha256(message);
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = seed << 8 | digest[i];
  return seed;
}

SplitMix64 derive_stream(const SecretKey& key, const DeriveContext& ctx) {
  if (ctx.size == 0) throw InvalidArgument("derive context size must be >= 1");
  return SplitMix64(derive_seed(key, ctx));
}

ChannelPermutation ChannelPermutation::identity(std::size_t n) {
  ChannelPermutation p;
  p.map_.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.map_[i] = static_cast<std::uint32_t>(i);
  return p;
}

ChannelPermutation ChannelPermutation::from_zero_based(
    std::vector<std::uint32_t> mapping) {
  std::vector<bool> seen(mapping.size(), false);
  for (std::uint32_t v : mapping) {
    if (v >= mapping.size() || seen[v]) {
      throw InvalidArgument("mapping is not a permutation");
    }
    seen[v] = true;
  }
  ChannelPermutation p;
  p.map_ = std::move(mapping);
  return p;
}

ChannelPermutation ChannelPermutation::from_one_based(
    std::span<const std::int64_t> mapping) {
  std::vector<std::uint32_t> zero(mapping.size());
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    if (mapping[i] < 1 || mapping[i] > static_cast<std::int64_t>(mapping.size())) {
      throw InvalidArgument("permutation entry " + std::to_string(mapping[i]) +
                            " outside 1.." + std::to_string(mapping.size()));
    }
    zero[i] = static_cast<std::uint32_t>(mapping[i] - 1);
  }
  return from_zero_based(std::move(zero));
}

std::vector<std::int64_t> ChannelPermutation::one_based() const {
  std::vector<std::int64_t> out(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) out[i] = map_[i] + 1;
  return out;
}

bool ChannelPermutation::is_identity() const {
  for (std::size_t i = 0; i < map_.size(); ++i) {
    if (map_[i] != i) return false;
  }
  return true;
}

ChannelPermutation permutation_from_stream(RandomStream& stream, std::size_t n) {
  if (n == 0) throw InvalidArgument("permutation size must be >= 1");
  std::vector<std::uint32_t> map(n);
  for (std::size_t i = 0; i < n; ++i) map[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + stream.uniform_below(n - i);
    std::swap(map[i], map[j]);
  }
  return ChannelPermutation::from_zero_based(std::move(map));
}

ChannelPermutation derive_permutation(const SecretKey& key,
                                      std::uint64_t hook_id,
                                      std::size_t channels) {
  if (channels == 0) throw InvalidArgument("channel count must be >= 1");
  SplitMix64 stream =
      derive_stream(key, {Purpose::kChannelPerm, hook_id, channels});
  return permutation_from_stream(stream, channels);
}

ChannelPermutation invert_permutation(const ChannelPermutation& p) {
  std::vector<std::uint32_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    inv[p.source(i)] = static_cast<std::uint32_t>(i);
  }
  return ChannelPermutation::from_zero_based(std::move(inv));
}

ChannelPermutation compose(const ChannelPermutation& first,
                           const ChannelPermutation& second) {
  if (first.size() != second.size()) {
    throw InvalidArgument("compose: permutation sizes differ");
  }
  std::vector<std::uint32_t> out(first.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = first.source(second.source(i));
  }
  return ChannelPermutation::from_zero_based(std::move(out));
}

SecretKey random_key(RandomStream& entropy) {
  SecretKey::Bytes bytes{};
  entropy.fill_bytes(bytes);
  return SecretKey(bytes);
}

SecretKey random_key() {
  std::random_device device;
  SecretKey::Bytes bytes{};
  for (std::size_t i = 0; i < bytes.size(); i += 4) {
    std::uint32_t word = device();
    for (std::size_t b = 0; b < 4; ++b) {
      bytes[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
    }
  }
  return SecretKey(bytes);
}

SecretKey random_key_excluding(RandomStream& entropy, const SecretKey& exclude) {
  for (;;) {
    SecretKey candidate = random_key(entropy);
    if (candidate != exclude) return candidate;
  }
}

}  // namespace segkey
