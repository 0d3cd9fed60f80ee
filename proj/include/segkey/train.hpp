#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "segkey/checkpoint.hpp"
#include "segkey/dataset.hpp"
#include "segkey/key.hpp"
#include "segkey/minifcn.hpp"

namespace segkey {

// SGD with momentum, folded-in weight decay and cosine annealing with warm
// restarts of constant period. Defaults are the desk-scale setup; the
// optimizer constants are those of the full-size recipe.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr_max = 0.1;
  double lr_min = 0.0001;
  double restart_period = 10.0;  // epochs
  double momentum = 0.9;
  double weight_decay = 0.005;
  bool augment = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  // Throws InvalidArgument unless lr_min < lr_max, restart_period >= 1 and
  // batch_size >= 1.
  void validate() const;
};

// lr_min + (lr_max - lr_min) * (1 + cos(pi * (t mod T) / T)) / 2, t in epochs.
double lr_at(double epoch_fraction, const TrainConfig& cfg);

struct OptimizerState {
  ModelParams velocity;

  static OptimizerState zeros_like(const ModelParams& params) {
    return {ModelParams::zeros_like(params)};
  }
};

// g' = g + weight_decay * w; v = momentum * v + g'; w -= lr * v.
// Throws DivergenceError (epoch -1) on a non-finite gradient.
void sgd_step(ModelParams& params, const ModelParams& grads,
              OptimizerState& state, double lr, const TrainConfig& cfg);

// Geometry of one augmentation draw: optional horizontal flip followed by a
// crop of [top, top+height) x [left, left+width) resized back to full size.
struct AugmentParams {
  bool flip = false;
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

// Flip with probability 0.5; crop area fraction in [0.5, 1], aspect ratio
// log-uniform in [3/4, 4/3], falling back to the full extent after 10 misses.
AugmentParams sample_augment(RandomStream& rng, std::size_t height,
                             std::size_t width);
// Bilinear for the image, nearest for labels; both get the same geometry.
SegSample apply_augment(const SegSample& s, const AugmentParams& params);
SegSample augment_pair(const SegSample& s, RandomStream& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double lr = 0.0;
};

struct TrainJob {
  MiniFcnConfig model;
  ModelProtection protection;
  std::optional<SecretKey> key;
  TrainConfig train;
};

struct TrainResult {
  ModelParams best;
  std::size_t best_epoch = 0;
  double best_dev_loss = 0.0;
  double initial_dev_loss = 0.0;  // before the first update
  std::vector<EpochLog> history;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Protection is active on every forward pass, training and development
// alike. Block-protected models see augmented images encrypted with the key.
// Returns the parameters with the lowest development loss.
// Throws DivergenceError with the epoch index on a non-finite loss.
TrainResult train(const TrainJob& job, const std::vector<SegSample>& train_set,
                  const std::vector<SegSample>& dev_set,
                  const EpochCallback& on_epoch = {});

// Mean per-image cross-entropy under the job's protection.
double dataset_loss(const ModelParams& params, const TrainJob& job,
                    const std::vector<SegSample>& samples);

// CSV with header epoch,train_loss,dev_loss,lr.
void write_loss_curves(const std::filesystem::path& path,
                       const std::vector<EpochLog>& history);

}  // namespace segkey
