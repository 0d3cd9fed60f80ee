#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "segkey/key.hpp"

namespace segkey {

// Dense c x h x w tensor of doubles, row-major (channel, row, column).
class FeatureMap {
 public:
  FeatureMap() = default;
  // Zero-filled.
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width);
  // Throws InvalidArgument when data.size() != c*h*w.
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
             std::vector<double> data);

  std::size_t channels() const { return c_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t plane_size() const { return h_ * w_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t ch, std::size_t row, std::size_t col) {
    return data_[(ch * h_ + row) * w_ + col];
  }
  double at(std::size_t ch, std::size_t row, std::size_t col) const {
    return data_[(ch * h_ + row) * w_ + col];
  }

  std::span<double> plane(std::size_t ch) {
    return {data_.data() + ch * plane_size(), plane_size()};
  }
  std::span<const double> plane(std::size_t ch) const {
    return {data_.data() + ch * plane_size(), plane_size()};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const FeatureMap& other) const {
    return c_ == other.c_ && h_ == other.h_ && w_ == other.w_;
  }
  bool all_finite() const;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t c_ = 0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> data_;
};

// x'(i, j, k) = x(p(i), j, k). Throws InvalidArgument if p.size() != x.channels().
FeatureMap permute_channels(const FeatureMap& x, const ChannelPermutation& p);

// Gradient of permute_channels with respect to its input: the upstream
// gradient with the inverse permutation applied to its channels.
FeatureMap permute_channels_grad(const FeatureMap& upstream,
                                 const ChannelPermutation& p);

struct HorizontalFlip {};
struct VerticalFlip {};
struct Crop {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};
// Shifts content by (dy, dx); vacated positions are zero.
struct Translate {
  long dy = 0;
  long dx = 0;
};
using SpatialOp = std::variant<HorizontalFlip, VerticalFlip, Crop, Translate>;

// Applies a (h, w)-only operation identically to every channel.
// Throws InvalidArgument for a crop that leaves the map.
FeatureMap spatial_transform(const FeatureMap& x, const SpatialOp& op);

}  // namespace segkey
