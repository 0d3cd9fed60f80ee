#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segkey/blockwise.hpp"
#include "segkey/minifcn.hpp"

namespace segkey {

struct BlockScheme {
  BlockKind kind = BlockKind::kShf;
  std::size_t block_size = 1;

  friend bool operator==(const BlockScheme&, const BlockScheme&) = default;
};

// Key-free description of how a model is protected: permuted hooks, or a
// block-wise transform of its inputs, or neither (baseline).
struct ModelProtection {
  std::vector<int> hooks;
  std::optional<BlockScheme> block;

  bool is_baseline() const { return hooks.empty() && !block; }
  // Throws InvalidArgument for invalid hooks or when both forms are set.
  void validate() const;

  friend bool operator==(const ModelProtection&, const ModelProtection&) = default;
};

// "none" | "hooks=6" | "hooks=1,3" | "shf=16" | "np=8" | "ffx=4"
ModelProtection parse_protection(std::string_view text);
std::string to_string(const ModelProtection& protection);
// "baseline", "model-6", "model-1+3", "shf-b16", ...
std::string default_model_id(const ModelProtection& protection);

struct Checkpoint {
  std::string model_id;
  MiniFcnConfig config;
  ModelProtection protection;
  ModelParams params;

  // Canonical JSON of everything except the weights.
  std::string header_json() const;
  // Hex SHA-256 of header_json().
  std::string config_digest() const;
};

// Layout (little-endian):
//   "SEGKEYCK" | u32 version | u32 header length | header JSON
//   | u32 tensor count | per tensor: u16 name length, name, u32 rank,
//     u64 dims[rank], f64 values[]
// The key is never stored.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes,
                                  const std::string& source = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segkey
