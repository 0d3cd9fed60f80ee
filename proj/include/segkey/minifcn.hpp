#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segkey/feature_map.hpp"
#include "segkey/key.hpp"
#include "segkey/layers.hpp"

namespace segkey {

// Small fully convolutional segmenter with six permutation hook sites:
//
//   stem conv s2 -> [1] -> stage1 conv s2 -> [2] -> stage2 conv s2 -> [3]
//   -> stage3 conv s1 -> [4] -> neck 1x1 -> [5] -> bilinear x8 -> [6]
//   -> classifier 1x1
//
// Every conv except the classifier is followed by ReLU, applied before the
// hook. Hook 6 sits in front of the classifier so a permutation never
// relabels output classes directly.
struct MiniFcnConfig {
  static constexpr int kHookCount = 6;
  static constexpr std::size_t kDownsample = 8;

  std::size_t in_channels = 3;
  std::size_t num_classes = 4;
  std::array<std::size_t, 4> widths{16, 32, 64, 64};
  std::size_t input_size = 32;

  // Throws InvalidArgument on non-positive widths or a side length not
  // divisible by 8.
  void validate() const;
  // Channel count seen at hook `hook` (1-based).
  std::size_t hook_channels(int hook) const;

  friend bool operator==(const MiniFcnConfig&, const MiniFcnConfig&) = default;
};

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// Ordered weights of a MiniFCN. Each instance carries a revision number that
// changes whenever the object is copied or marked modified, so a forward
// cache can detect that it no longer matches.
class ModelParams {
 public:
  ModelParams() : revision_(next_revision()) {}
  ModelParams(const ModelParams& other);
  ModelParams& operator=(const ModelParams& other);
  ModelParams(ModelParams&& other) noexcept;
  ModelParams& operator=(ModelParams&& other) noexcept;

  // Kaiming-normal weights (std sqrt(2 / fan_in)), zero biases.
  static ModelParams initialize(const MiniFcnConfig& cfg, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);

  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }
  NamedTensor& get(std::string_view name);
  const NamedTensor& get(std::string_view name) const;

  // Throws InvalidArgument unless names and shapes match `cfg`.
  void check_matches(const MiniFcnConfig& cfg) const;
  bool all_finite() const;

  std::uint64_t revision() const { return revision_; }
  void touch() { revision_ = next_revision(); }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.tensors_.size() == b.tensors_.size() &&
           std::equal(a.tensors_.begin(), a.tensors_.end(), b.tensors_.begin(),
                      [](const NamedTensor& x, const NamedTensor& y) {
                        return x.name == y.name && x.shape == y.shape &&
                               x.values == y.values;
                      });
  }

 private:
  static std::uint64_t next_revision();

  std::vector<NamedTensor> tensors_;
  std::uint64_t revision_;
};

using HookPlan = std::array<std::optional<ChannelPermutation>,
                            MiniFcnConfig::kHookCount>;

// Which hooks are permuted and with which key. An absent key is only valid
// together with an empty hook set.
struct ProtectionSpec {
  std::vector<int> permuted_hooks;
  std::optional<SecretKey> key;
};

// Throws InvalidArgument for duplicate or out-of-range hooks.
void validate_hooks(const std::vector<int>& hooks);

// Resolves the per-hook permutations for `spec`. Throws KeyError when hooks
// are named but no key is given.
HookPlan make_hook_plan(const MiniFcnConfig& cfg, const ProtectionSpec& spec);

// Plan whose permutations come from a caller-supplied stream, one draw per
// listed hook in ascending order.
HookPlan make_hook_plan(const MiniFcnConfig& cfg, const std::vector<int>& hooks,
                        RandomStream& stream);

struct ForwardCache {
  std::uint64_t params_revision = 0;
  HookPlan plan;
  // Input of each conv layer in order stem, stage1, stage2, stage3, neck,
  // classifier (i.e. the hooked activations).
  std::array<FeatureMap, 6> conv_inputs;
  // Post-ReLU outputs of the five hidden convs.
  std::array<FeatureMap, 5> relu_outputs;
};

struct ForwardResult {
  FeatureMap logits;  // C x S x S
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const MiniFcnConfig& cfg,
                      const FeatureMap& image, const HookPlan& plan);

// Logits only; skips keeping the cache.
FeatureMap infer(const ModelParams& params, const MiniFcnConfig& cfg,
                 const FeatureMap& image, const HookPlan& plan);

// Accumulates parameter gradients into `grads` (shaped like `params`) and
// returns dL/dimage. Throws InvalidArgument when the cache was produced by a
// different parameter revision.
FeatureMap backward(const ModelParams& params, const MiniFcnConfig& cfg,
                    const ForwardCache& cache, const FeatureMap& upstream,
                    ModelParams& grads);

}  // namespace segkey
