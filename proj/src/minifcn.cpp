#include "segkey/minifcn.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <string>

#include "segkey/errors.hpp"

namespace segkey {

namespace {

struct LayerSpec {
  const char* name;
  ConvShape shape;
};

std::array<LayerSpec, 6> layer_specs(const MiniFcnConfig& cfg) {
  const auto& w = cfg.widths;
  return {{
      {"stem", {cfg.in_channels, w[0], 3, 2}},
      {"stage1", {w[0], w[1], 3, 2}},
      {"stage2", {w[1], w[2], 3, 2}},
      {"stage3", {w[2], w[3], 3, 1}},
      {"neck", {w[3], w[3], 1, 1}},
      {"classifier", {w[3], cfg.num_classes, 1, 1}},
  }};
}

std::string weight_name(const LayerSpec& l) { return std::string(l.name) + ".weight"; }
std::string bias_name(const LayerSpec& l) { return std::string(l.name) + ".bias"; }

FeatureMap apply_hook(FeatureMap x, const HookPlan& plan, int hook) {
  const auto& p = plan[static_cast<std::size_t>(hook - 1)];
  if (!p) return x;
  return permute_channels(x, *p);
}

FeatureMap unapply_hook(FeatureMap g, const HookPlan& plan, int hook) {
  const auto& p = plan[static_cast<std::size_t>(hook - 1)];
  if (!p) return g;
  return permute_channels_grad(g, *p);
}

}  // namespace

void MiniFcnConfig::validate() const {
  if (in_channels == 0 || num_classes == 0) {
    throw InvalidArgument("MiniFCN channel counts must be positive");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidArgument("MiniFCN widths must be positive");
  }
  if (input_size == 0 || input_size % kDownsample != 0) {
    throw InvalidArgument("MiniFCN input size must be a positive multiple of 8, got " +
                          std::to_string(input_size));
  }
  if (num_classes > 255) throw InvalidArgument("at most 255 classes supported");
}

std::size_t MiniFcnConfig::hook_channels(int hook) const {
  switch (hook) {
    case 1: return widths[0];
    case 2: return widths[1];
    case 3: return widths[2];
    case 4:
    case 5:
    case 6: return widths[3];
    default:
      throw InvalidArgument("hook " + std::to_string(hook) + " outside 1..6");
  }
}

std::uint64_t ModelParams::next_revision() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

ModelParams::ModelParams(const ModelParams& other)
    : tensors_(other.tensors_), revision_(next_revision()) {}

ModelParams& ModelParams::operator=(const ModelParams& other) {
  tensors_ = other.tensors_;
  revision_ = next_revision();
  return *this;
}

ModelParams::ModelParams(ModelParams&& other) noexcept
    : tensors_(std::move(other.tensors_)), revision_(next_revision()) {
  other.touch();
}

ModelParams& ModelParams::operator=(ModelParams&& other) noexcept {
  tensors_ = std::move(other.tensors_);
  revision_ = next_revision();
  other.touch();
  return *this;
}

ModelParams ModelParams::initialize(const MiniFcnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams params;
  SplitMix64 rng(seed);
  for (const LayerSpec& layer : layer_specs(cfg)) {
    const ConvShape& s = layer.shape;
    NamedTensor weight{weight_name(layer),
                       {s.out_channels, s.in_channels, s.kernel, s.kernel},
                       std::vector<double>(s.weight_count())};
    const double std_dev =
        std::sqrt(2.0 / static_cast<double>(s.in_channels * s.kernel * s.kernel));
    for (double& v : weight.values) v = std_dev * rng.normal();
    params.tensors_.push_back(std::move(weight));
    params.tensors_.push_back(NamedTensor{bias_name(layer), {s.out_channels},
                                          std::vector<double>(s.out_channels)});
  }
  return params;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams out;
  out.tensors_ = other.tensors_;
  for (auto& t : out.tensors_) std::ranges::fill(t.values, 0.0);
  return out;
}

NamedTensor& ModelParams::get(std::string_view name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("no parameter named " + std::string(name));
}

const NamedTensor& ModelParams::get(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("no parameter named " + std::string(name));
}

void ModelParams::check_matches(const MiniFcnConfig& cfg) const {
  const auto layers = layer_specs(cfg);
  if (tensors_.size() != 2 * layers.size()) {
    throw InvalidArgument("parameter count does not match MiniFCN config");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const ConvShape& s = layers[i].shape;
    const NamedTensor& w = tensors_[2 * i];
    const NamedTensor& b = tensors_[2 * i + 1];
    const std::vector<std::size_t> w_shape{s.out_channels, s.in_channels,
                                           s.kernel, s.kernel};
    if (w.name != weight_name(layers[i]) || w.shape != w_shape ||
        w.values.size() != s.weight_count() || b.name != bias_name(layers[i]) ||
        b.shape != std::vector<std::size_t>{s.out_channels} ||
        b.values.size() != s.out_channels) {
      throw InvalidArgument("parameter " + w.name + " does not match config");
    }
  }
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors_) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void validate_hooks(const std::vector<int>& hooks) {
  std::set<int> seen;
  for (int h : hooks) {
    if (h < 1 || h > MiniFcnConfig::kHookCount) {
      throw InvalidArgument("hook " + std::to_string(h) + " outside 1..6");
    }
    if (!seen.insert(h).second) {
      throw InvalidArgument("hook " + std::to_string(h) + " listed twice");
    }
  }
}

HookPlan make_hook_plan(const MiniFcnConfig& cfg, const ProtectionSpec& spec) {
  validate_hooks(spec.permuted_hooks);
  HookPlan plan;
  if (spec.permuted_hooks.empty()) return plan;
  if (!spec.key) throw KeyError("permuted hooks require a key");
  for (int h : spec.permuted_hooks) {
    plan[static_cast<std::size_t>(h - 1)] = derive_permutation(
        *spec.key, static_cast<std::uint64_t>(h), cfg.hook_channels(h));
  }
  return plan;
}

HookPlan make_hook_plan(const MiniFcnConfig& cfg, const std::vector<int>& hooks,
                        RandomStream& stream) {
  validate_hooks(hooks);
  std::vector<int> sorted = hooks;
  std::ranges::sort(sorted);
  HookPlan plan;
  for (int h : sorted) {
    plan[static_cast<std::size_t>(h - 1)] =
        permutation_from_stream(stream, cfg.hook_channels(h));
  }
  return plan;
}

namespace {

void check_input(const MiniFcnConfig& cfg, const FeatureMap& image) {
  if (image.channels() != cfg.in_channels || image.height() != cfg.input_size ||
      image.width() != cfg.input_size) {
    throw InvalidArgument("MiniFCN expects a " + std::to_string(cfg.in_channels) +
                          "x" + std::to_string(cfg.input_size) + "x" +
                          std::to_string(cfg.input_size) + " input");
  }
}

void check_plan(const MiniFcnConfig& cfg, const HookPlan& plan) {
  for (int h = 1; h <= MiniFcnConfig::kHookCount; ++h) {
    const auto& p = plan[static_cast<std::size_t>(h - 1)];
    if (p && p->size() != cfg.hook_channels(h)) {
      throw InvalidArgument("permutation for hook " + std::to_string(h) +
                            " has the wrong width");
    }
  }
}

}  // namespace

ForwardResult forward(const ModelParams& params, const MiniFcnConfig& cfg,
                      const FeatureMap& image, const HookPlan& plan) {
  check_input(cfg, image);
  check_plan(cfg, plan);
  const auto layers = layer_specs(cfg);
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.params_revision = params.revision();
  cache.plan = plan;

  FeatureMap x = image;
  for (std::size_t i = 0; i < 5; ++i) {
    const LayerSpec& layer = layers[i];
    cache.conv_inputs[i] = x;
    FeatureMap z = conv2d(x, layer.shape, params.get(weight_name(layer)).values,
                          params.get(bias_name(layer)).values);
    relu_inplace(z);
    cache.relu_outputs[i] = z;
    x = apply_hook(std::move(z), plan, static_cast<int>(i + 1));
  }
  x = apply_hook(bilinear_upsample(x, MiniFcnConfig::kDownsample), plan, 6);
  cache.conv_inputs[5] = x;
  const LayerSpec& head = layers[5];
  result.logits = conv2d(x, head.shape, params.get(weight_name(head)).values,
                         params.get(bias_name(head)).values);
  return result;
}

FeatureMap infer(const ModelParams& params, const MiniFcnConfig& cfg,
                 const FeatureMap& image, const HookPlan& plan) {
  check_input(cfg, image);
  check_plan(cfg, plan);
  const auto layers = layer_specs(cfg);
  FeatureMap x = image;
  for (std::size_t i = 0; i < 5; ++i) {
    const LayerSpec& layer = layers[i];
    FeatureMap z = conv2d(x, layer.shape, params.get(weight_name(layer)).values,
                          params.get(bias_name(layer)).values);
    relu_inplace(z);
    x = apply_hook(std::move(z), plan, static_cast<int>(i + 1));
  }
  x = apply_hook(bilinear_upsample(x, MiniFcnConfig::kDownsample), plan, 6);
  const LayerSpec& head = layers[5];
  return conv2d(x, head.shape, params.get(weight_name(head)).values,
                params.get(bias_name(head)).values);
}

FeatureMap backward(const ModelParams& params, const MiniFcnConfig& cfg,
                    const ForwardCache& cache, const FeatureMap& upstream,
                    ModelParams& grads) {
  if (cache.params_revision != params.revision()) {
    throw InvalidArgument("forward cache is stale for these parameters");
  }
  const auto layers = layer_specs(cfg);
  const LayerSpec& head = layers[5];
  FeatureMap g = conv2d_backward(cache.conv_inputs[5], upstream, head.shape,
                                 params.get(weight_name(head)).values,
                                 grads.get(weight_name(head)).values,
                                 grads.get(bias_name(head)).values);
  g = unapply_hook(std::move(g), cache.plan, 6);
  g = bilinear_upsample_backward(g, MiniFcnConfig::kDownsample);
  for (std::size_t i = 5; i-- > 0;) {
    g = unapply_hook(std::move(g), cache.plan, static_cast<int>(i + 1));
    relu_backward_inplace(g, cache.relu_outputs[i]);
    const LayerSpec& layer = layers[i];
    g = conv2d_backward(cache.conv_inputs[i], g, layer.shape,
                        params.get(weight_name(layer)).values,
                        grads.get(weight_name(layer)).values,
                        grads.get(bias_name(layer)).values);
  }
  grads.touch();
  return g;
}

}  // namespace segkey
