#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "segkey/feature_map.hpp"
#include "segkey/image.hpp"

namespace segkey {

// Square convolution, zero padding kernel/2, arbitrary stride.
// Weights are laid out [out][in][ky][kx].
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;

  std::size_t weight_count() const {
    return out_channels * in_channels * kernel * kernel;
  }
  std::size_t out_extent(std::size_t in_extent) const {
    const std::size_t pad = kernel / 2;
    return (in_extent + 2 * pad - kernel) / stride + 1;
  }
};

FeatureMap conv2d(const FeatureMap& x, const ConvShape& shape,
                  std::span<const double> weights, std::span<const double> bias);

// Accumulates into grad_weights / grad_bias and returns dL/dx.
FeatureMap conv2d_backward(const FeatureMap& x, const FeatureMap& grad_out,
                           const ConvShape& shape,
                           std::span<const double> weights,
                           std::span<double> grad_weights,
                           std::span<double> grad_bias);

void relu_inplace(FeatureMap& x);
// Zeroes grad wherever the activation output was not positive.
void relu_backward_inplace(FeatureMap& grad, const FeatureMap& activation);

// Half-pixel-center bilinear upsampling by an integer factor. factor 1 is the
// identity.
FeatureMap bilinear_upsample(const FeatureMap& x, std::size_t factor);
FeatureMap bilinear_upsample_backward(const FeatureMap& grad_out,
                                      std::size_t factor);

struct CrossEntropyResult {
  double loss = 0.0;
  FeatureMap grad;  // dL/dlogits, same shape as the logits
  std::size_t counted = 0;
};

// Mean over non-ignored pixels of -log softmax(logits)[label]. Throws
// InvalidArgument for labels outside [0, C) that are not ignore_index.
CrossEntropyResult cross_entropy(const FeatureMap& logits,
                                 const LabelMap& labels,
                                 std::optional<int> ignore_index = std::nullopt);

// Per-pixel argmax over channels, ties to the lowest index.
LabelMap argmax_channels(const FeatureMap& logits);

}  // namespace segkey
