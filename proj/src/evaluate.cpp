#include "segkey/evaluate.hpp"

#include <string>

#include "segkey/errors.hpp"
#include "segkey/parallel.hpp"

namespace segkey {

std::string_view condition_name(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kCorrect: return "correct";
    case ConditionKind::kNoPerm: return "no_perm";
    case ConditionKind::kIncorrect: return "incorrect";
    case ConditionKind::kPlain: return "plain";
  }
  return "?";
}

ConditionKind parse_condition(std::string_view name) {
  if (name == "correct") return ConditionKind::kCorrect;
  if (name == "no_perm") return ConditionKind::kNoPerm;
  if (name == "incorrect") return ConditionKind::kIncorrect;
  if (name == "plain") return ConditionKind::kPlain;
  throw InvalidArgument("unknown condition '" + std::string(name) + "'");
}

DatasetScore dataset_mean_iou(const Segmenter& segment,
                              const std::vector<SegSample>& samples,
                              std::size_t num_classes, std::size_t threads) {
  if (samples.empty()) throw InvalidArgument("dataset_mean_iou: no samples");
  std::vector<double> image_scores(samples.size());
  std::vector<std::vector<std::optional<double>>> image_classes(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const LabelMap pred = segment(samples[i].image);
    image_classes[i] = iou_per_class(pred, samples[i].labels, num_classes);
    image_scores[i] = mean_iou(pred, samples[i].labels, num_classes);
  });

  DatasetScore score;
  double total = 0.0;
  for (double s : image_scores) total += s;
  score.mean_iou = total / static_cast<double>(samples.size());

  score.per_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& classes : image_classes) {
      if (classes[c]) {
        sum += *classes[c];
        ++present;
      }
    }
    if (present) score.per_class[c] = sum / static_cast<double>(present);
  }
  return score;
}

Segmenter make_segmenter(const Checkpoint& ckpt, HookPlan plan,
                         std::optional<BlockTransformConfig> block) {
  // Copies keep the segmenter valid independently of the caller's objects.
  return [params = ckpt.params, cfg = ckpt.config, plan = std::move(plan),
          block = std::move(block)](const ImageU8& img) {
    const ImageU8 input = block ? apply_block_transform(img, *block) : img;
    return argmax_channels(infer(params, cfg, to_feature_map(input), plan));
  };
}

namespace {

struct KeyedModel {
  const Checkpoint& ckpt;
  const EvalOptions& options;

  HookPlan plan_for(const SecretKey& key, const std::vector<int>& hooks) const {
    if (options.plan_factory) return options.plan_factory(key);
    return make_hook_plan(ckpt.config, ProtectionSpec{hooks, key});
  }

  Segmenter with_key(const SecretKey& key, const std::vector<int>& hooks) const {
    if (ckpt.protection.block) {
      return make_segmenter(ckpt, {},
                            BlockTransformConfig{ckpt.protection.block->kind,
                                                 ckpt.protection.block->block_size,
                                                 key});
    }
    return make_segmenter(ckpt, plan_for(key, hooks));
  }

  Segmenter unprotected() const { return make_segmenter(ckpt, {}); }

  DatasetScore score(const Segmenter& s, const std::vector<SegSample>& samples) const {
    return dataset_mean_iou(s, samples, ckpt.config.num_classes, options.threads);
  }
};

void average_into(EvalReport& report, const std::vector<DatasetScore>& scores) {
  double total = 0.0;
  for (const auto& s : scores) {
    total += s.mean_iou;
    report.per_key.push_back(s.mean_iou);
  }
  report.mean_iou = total / static_cast<double>(scores.size());
  const std::size_t classes = scores.front().per_class.size();
  report.per_class.assign(classes, std::nullopt);
  for (std::size_t c = 0; c < classes; ++c) {
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& s : scores) {
      if (s.per_class[c]) {
        sum += *s.per_class[c];
        ++present;
      }
    }
    if (present) report.per_class[c] = sum / static_cast<double>(present);
  }
}

}  // namespace

std::vector<EvalReport> evaluate_conditions(const Checkpoint& ckpt,
                                            const std::optional<SecretKey>& key,
                                            const std::vector<SegSample>& samples,
                                            const std::vector<EvalCondition>& conditions,
                                            const EvalOptions& options) {
  ckpt.protection.validate();
  if (samples.empty()) throw InvalidArgument("evaluation set is empty");
  const KeyedModel model{ckpt, options};
  const bool block_model = ckpt.protection.block.has_value();
  const std::vector<int>& hooks = ckpt.protection.hooks;

  std::vector<EvalReport> reports;
  for (const EvalCondition& cond : conditions) {
    EvalReport report;
    report.model = ckpt.model_id;
    report.condition = cond.kind;
    report.seed = options.eval_seed;
    report.config_digest = ckpt.config_digest();

    std::vector<DatasetScore> scores;
    switch (cond.kind) {
      case ConditionKind::kCorrect:
        if (ckpt.protection.is_baseline()) {
          scores.push_back(model.score(model.unprotected(), samples));
        } else {
          if (!key) throw KeyError("the correct condition requires the model key");
          scores.push_back(model.score(model.with_key(*key, hooks), samples));
        }
        report.n_keys = 1;
        break;
      case ConditionKind::kNoPerm:
        if (block_model) {
          throw InvalidArgument("no_perm applies to channel-permutation models; use plain");
        }
        scores.push_back(model.score(model.unprotected(), samples));
        report.n_keys = 0;
        break;
      case ConditionKind::kPlain:
        if (!block_model) {
          throw InvalidArgument("plain applies to block-transform models; use no_perm");
        }
        scores.push_back(model.score(model.unprotected(), samples));
        report.n_keys = 0;
        break;
      case ConditionKind::kIncorrect: {
        if (cond.n_keys == 0) throw InvalidArgument("incorrect needs n_keys >= 1");
        SplitMix64 stream(options.eval_seed);
        for (std::size_t k = 0; k < cond.n_keys; ++k) {
          const SecretKey wrong =
              key ? random_key_excluding(stream, *key) : random_key(stream);
          scores.push_back(model.score(model.with_key(wrong, hooks), samples));
        }
        report.n_keys = cond.n_keys;
        break;
      }
    }
    average_into(report, scores);
    if (cond.kind != ConditionKind::kIncorrect) report.per_key.clear();
    reports.push_back(std::move(report));
  }
  return reports;
}

AttackResult key_estimation_attack(const Checkpoint& ckpt,
                                   const std::vector<int>& hooks,
                                   const std::vector<SegSample>& samples,
                                   std::size_t n_trials, std::uint64_t attack_seed,
                                   const EvalOptions& options) {
  if (n_trials == 0) throw InvalidArgument("attack needs at least one trial");
  if (samples.empty()) throw InvalidArgument("attack sample set is empty");
  validate_hooks(hooks);
  const KeyedModel model{ckpt, options};
  SplitMix64 stream(attack_seed);
  AttackResult result;
  for (std::size_t t = 0; t < n_trials; ++t) {
    const SecretKey guess = random_key(stream);
    const double score = model.score(model.with_key(guess, hooks), samples).mean_iou;
    result.scores.push_back(score);
    result.keys.push_back(guess);
    if (t == 0 || score > result.best_score) {
      result.best_score = score;
      result.best_key = guess;
    }
  }
  return result;
}

}  // namespace segkey
