#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segkey/checkpoint.hpp"
#include "segkey/dataset.hpp"
#include "segkey/metrics.hpp"

namespace segkey {

enum class ConditionKind { kCorrect, kNoPerm, kIncorrect, kPlain };

// correct | no_perm | incorrect | plain
std::string_view condition_name(ConditionKind kind);
ConditionKind parse_condition(std::string_view name);

struct EvalCondition {
  ConditionKind kind = ConditionKind::kCorrect;
  std::size_t n_keys = 1;  // Incorrect only
};

// Maps an input image to a predicted label map. Must be safe to call
// concurrently.
using Segmenter = std::function<LabelMap(const ImageU8&)>;

struct DatasetScore {
  double mean_iou = 0.0;
  // Mean over images where the class is present; nullopt if never present.
  std::vector<std::optional<double>> per_class;
};

// Per-image mean IoU averaged over images, summed in index order.
// Throws InvalidArgument on an empty sample list.
DatasetScore dataset_mean_iou(const Segmenter& segment,
                              const std::vector<SegSample>& samples,
                              std::size_t num_classes, std::size_t threads = 1);

// Network inference for a checkpoint with the given hook plan and optional
// input transform; argmax ties go to the lowest class.
Segmenter make_segmenter(const Checkpoint& ckpt, HookPlan plan,
                         std::optional<BlockTransformConfig> block = std::nullopt);

struct EvalReport {
  std::string model;
  ConditionKind condition = ConditionKind::kCorrect;
  std::size_t n_keys = 0;
  double mean_iou = 0.0;
  std::vector<std::optional<double>> per_class;
  std::uint64_t seed = 0;
  std::string config_digest;
  // One dataset mean IoU per evaluated key (Incorrect); mean_iou is their
  // arithmetic mean.
  std::vector<double> per_key;
};

using PlanFactory = std::function<HookPlan(const SecretKey&)>;

struct EvalOptions {
  // Seeds the stream that draws incorrect keys.
  std::uint64_t eval_seed = 2023;
  std::size_t threads = 1;
  // Overrides key-derived hook permutations when set.
  PlanFactory plan_factory;
};

// One report per condition.
//  Correct   hooks permuted (or inputs encrypted) with `key`
//  NoPerm    hooks disabled; hook-protected and baseline models only
//  Incorrect n fresh random keys != key, dataset mean IoU averaged over keys
//  Plain     unencrypted inputs; block-protected models only
// Throws KeyError if a protected model is evaluated under Correct without a
// key, and InvalidArgument for a condition that does not apply to the model.
std::vector<EvalReport> evaluate_conditions(
    const Checkpoint& ckpt, const std::optional<SecretKey>& key,
    const std::vector<SegSample>& samples,
    const std::vector<EvalCondition>& conditions, const EvalOptions& options = {});

struct AttackResult {
  SecretKey best_key{SecretKey::Bytes{}};
  double best_score = 0.0;
  std::vector<double> scores;  // one per trial, in draw order
  std::vector<SecretKey> keys;
};

// Adversary that draws n_trials random keys from `attack_seed`, scores each
// on `samples`, and keeps the best. For hook models the keys drive `hooks`;
// for block models they drive the input transform.
AttackResult key_estimation_attack(const Checkpoint& ckpt,
                                   const std::vector<int>& hooks,
                                   const std::vector<SegSample>& samples,
                                   std::size_t n_trials, std::uint64_t attack_seed,
                                   const EvalOptions& options = {});

}  // namespace segkey
