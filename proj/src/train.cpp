#include "segkey/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

#include "segkey/errors.hpp"
#include "segkey/parallel.hpp"

namespace segkey {

void TrainConfig::validate() const {
  if (!(lr_min < lr_max)) throw InvalidArgument("lr_min must be below lr_max");
  if (!(restart_period >= 1.0)) throw InvalidArgument("restart_period must be >= 1");
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  if (epochs == 0) throw InvalidArgument("epochs must be >= 1");
}

double lr_at(double epoch_fraction, const TrainConfig& cfg) {
  const double t_cur = std::fmod(epoch_fraction, cfg.restart_period);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) *
                          (1.0 + std::cos(std::numbers::pi * t_cur / cfg.restart_period));
}

void sgd_step(ModelParams& params, const ModelParams& grads,
              OptimizerState& state, double lr, const TrainConfig& cfg) {
  auto& p = params.tensors();
  const auto& g = grads.tensors();
  auto& v = state.velocity.tensors();
  if (p.size() != g.size() || p.size() != v.size()) {
    throw InvalidArgument("sgd_step: parameter, gradient and state differ");
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].values.size() != g[t].values.size() ||
        p[t].values.size() != v[t].values.size()) {
      throw InvalidArgument("sgd_step: shape mismatch in " + p[t].name);
    }
    for (double x : g[t].values) {
      if (!std::isfinite(x)) {
        throw DivergenceError("non-finite gradient in " + g[t].name, -1);
      }
    }
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    auto& w = p[t].values;
    auto& vel = v[t].values;
    const auto& grad = g[t].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double step = grad[i] + cfg.weight_decay * w[i];
      vel[i] = cfg.momentum * vel[i] + step;
      w[i] -= lr * vel[i];
    }
  }
  params.touch();
  state.velocity.touch();
}

AugmentParams sample_augment(RandomStream& rng, std::size_t height,
                             std::size_t width) {
  AugmentParams a;
  a.flip = rng.uniform01() < 0.5;
  const double area = static_cast<double>(height * width);
  const double log_lo = std::log(3.0 / 4.0), log_hi = std::log(4.0 / 3.0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(0.5, 1.0);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (w >= 1 && h >= 1 && w <= width && h <= height) {
      a.height = h;
      a.width = w;
      a.top = rng.uniform_below(height - h + 1);
      a.left = rng.uniform_below(width - w + 1);
      return a;
    }
  }
  a.top = a.left = 0;
  a.height = height;
  a.width = width;
  return a;
}

SegSample apply_augment(const SegSample& s, const AugmentParams& params) {
  SegSample out = params.flip
                      ? SegSample{flip_horizontal(s.image), flip_horizontal(s.labels)}
                      : s;
  if (params.top == 0 && params.left == 0 && params.height == s.image.height &&
      params.width == s.image.width) {
    return out;
  }
  return {resample_bilinear(out.image, params.top, params.left, params.height,
                            params.width, s.image.height, s.image.width),
          resample_nearest(out.labels, params.top, params.left, params.height,
                           params.width, s.labels.height, s.labels.width)};
}

SegSample augment_pair(const SegSample& s, RandomStream& rng) {
  if (s.image.height != s.labels.height || s.image.width != s.labels.width) {
    throw InvalidArgument("augment_pair: image and labels differ in size");
  }
  return apply_augment(s, sample_augment(rng, s.image.height, s.image.width));
}

namespace {

// Everything needed to turn a sample into network input under the job's
// protection.
struct Protector {
  HookPlan plan;
  std::optional<BlockTransformConfig> block;

  explicit Protector(const TrainJob& job) {
    job.protection.validate();
    if (job.protection.is_baseline()) return;
    if (!job.key) throw KeyError("protected training requires a key");
    if (job.protection.block) {
      block = BlockTransformConfig{job.protection.block->kind,
                                   job.protection.block->block_size, *job.key};
    } else {
      plan = make_hook_plan(job.model, ProtectionSpec{job.protection.hooks, job.key});
    }
  }

  FeatureMap input(const ImageU8& img) const {
    return to_feature_map(block ? apply_block_transform(img, *block) : img);
  }
};

std::uint64_t augment_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  SplitMix64 mix(seed ^ 0xA5A5A5A5DEADBEEFULL);
  const std::uint64_t base = mix.next_u64();
  SplitMix64 per(base + epoch * 0x100000001B3ULL + index * 0x9E3779B97F4A7C15ULL);
  return per.next_u64();
}

void check_sample(const SegSample& s, const MiniFcnConfig& cfg) {
  if (s.image.channels != cfg.in_channels || s.image.height != cfg.input_size ||
      s.image.width != cfg.input_size || s.labels.height != cfg.input_size ||
      s.labels.width != cfg.input_size) {
    throw InvalidArgument("sample size does not match the model input size " +
                          std::to_string(cfg.input_size));
  }
}

double loss_with(const ModelParams& params, const MiniFcnConfig& cfg,
                 const Protector& protector, const std::vector<SegSample>& samples,
                 std::size_t threads) {
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const FeatureMap logits =
        infer(params, cfg, protector.input(samples[i].image), protector.plan);
    losses[i] = cross_entropy(logits, samples[i].labels).loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(samples.size());
}

}  // namespace

double dataset_loss(const ModelParams& params, const TrainJob& job,
                    const std::vector<SegSample>& samples) {
  if (samples.empty()) throw InvalidArgument("dataset_loss: empty sample set");
  return loss_with(params, job.model, Protector(job), samples, job.train.threads);
}

TrainResult train(const TrainJob& job, const std::vector<SegSample>& train_set,
                  const std::vector<SegSample>& dev_set,
                  const EpochCallback& on_epoch) {
  job.model.validate();
  job.train.validate();
  if (train_set.empty() || dev_set.empty()) {
    throw InvalidArgument("training and development splits must be non-empty");
  }
  for (const auto& s : train_set) check_sample(s, job.model);
  for (const auto& s : dev_set) check_sample(s, job.model);

  const TrainConfig& tc = job.train;
  const Protector protector(job);
  ModelParams params = ModelParams::initialize(job.model, tc.seed);
  OptimizerState state = OptimizerState::zeros_like(params);
  SplitMix64 shuffle_rng(tc.seed ^ 0x5DEECE66DULL);

  TrainResult result;
  result.initial_dev_loss = loss_with(params, job.model, protector, dev_set, tc.threads);
  result.best = params;
  result.best_dev_loss = std::numeric_limits<double>::infinity();

  const std::size_t n = train_set.size();
  const std::size_t batches = (n + tc.batch_size - 1) / tc.batch_size;
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      std::swap(order[i], order[i + shuffle_rng.uniform_below(n - i)]);
    }

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * tc.batch_size;
      const std::size_t count = std::min(tc.batch_size, n - begin);
      std::vector<ModelParams> sample_grads(count);
      std::vector<double> sample_loss(count);

      parallel_for(count, tc.threads, [&](std::size_t k) {
        const std::size_t idx = order[begin + k];
        SegSample s = train_set[idx];
        if (tc.augment) {
          SplitMix64 rng(augment_seed(tc.seed, epoch, idx));
          s = augment_pair(s, rng);
        }
        ForwardResult fw =
            forward(params, job.model, protector.input(s.image), protector.plan);
        CrossEntropyResult ce = cross_entropy(fw.logits, s.labels);
        sample_loss[k] = ce.loss;
        sample_grads[k] = ModelParams::zeros_like(params);
        backward(params, job.model, fw.cache, ce.grad, sample_grads[k]);
      });

      ModelParams grads = ModelParams::zeros_like(params);
      for (std::size_t k = 0; k < count; ++k) {
        if (!std::isfinite(sample_loss[k])) {
          throw DivergenceError("non-finite training loss in epoch " +
                                    std::to_string(epoch),
                                static_cast<int>(epoch));
        }
        epoch_loss += sample_loss[k];
        auto& dst = grads.tensors();
        const auto& src = sample_grads[k].tensors();
        for (std::size_t t = 0; t < dst.size(); ++t) {
          for (std::size_t i = 0; i < dst[t].values.size(); ++i) {
            dst[t].values[i] += src[t].values[i];
          }
        }
      }
      const double scale = 1.0 / static_cast<double>(count);
      for (auto& t : grads.tensors()) {
        for (double& v : t.values) v *= scale;
      }

      const double lr = lr_at(static_cast<double>(epoch) +
                                  static_cast<double>(b) / static_cast<double>(batches),
                              tc);
      try {
        sgd_step(params, grads, state, lr, tc);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " in epoch " +
                                  std::to_string(epoch),
                              static_cast<int>(epoch));
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = epoch_loss / static_cast<double>(n);
    log.dev_loss = loss_with(params, job.model, protector, dev_set, tc.threads);
    log.lr = lr_at(static_cast<double>(epoch), tc);
    if (!std::isfinite(log.dev_loss)) {
      throw DivergenceError("non-finite development loss in epoch " +
                                std::to_string(epoch),
                            static_cast<int>(epoch));
    }
    result.history.push_back(log);
    if (log.dev_loss < result.best_dev_loss) {
      result.best_dev_loss = log.dev_loss;
      result.best_epoch = epoch;
      result.best = params;
    }
    if (on_epoch) on_epoch(log);
  }
  return result;
}

void write_loss_curves(const std::filesystem::path& path,
                       const std::vector<EpochLog>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_loss,dev_loss,lr\n";
  for (const EpochLog& e : history) {
    out << e.epoch << ',' << e.train_loss << ',' << e.dev_loss << ',' << e.lr << '\n';
  }
}

}  // namespace segkey
