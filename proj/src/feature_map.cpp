#include "segkey/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "segkey/errors.hpp"

namespace segkey {

FeatureMap::FeatureMap(std::size_t channels, std::size_t height,
                       std::size_t width)
    : c_(channels), h_(height), w_(width), data_(channels * height * width) {}

FeatureMap::FeatureMap(std::size_t channels, std::size_t height,
                       std::size_t width, std::vector<double> data)
    : c_(channels), h_(height), w_(width), data_(std::move(data)) {
  if (data_.size() != c_ * h_ * w_) {
    throw InvalidArgument("feature map data has " +
                          std::to_string(data_.size()) + " values, expected " +
                          std::to_string(c_ * h_ * w_));
  }
}

bool FeatureMap::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace {

void check_width(const FeatureMap& x, const ChannelPermutation& p) {
  if (p.size() != x.channels()) {
    throw InvalidArgument("permutation of size " + std::to_string(p.size()) +
                          " applied to " + std::to_string(x.channels()) +
                          " channels");
  }
}

}  // namespace

FeatureMap permute_channels(const FeatureMap& x, const ChannelPermutation& p) {
  check_width(x, p);
  FeatureMap out(x.channels(), x.height(), x.width());
  for (std::size_t i = 0; i < x.channels(); ++i) {
    std::ranges::copy(x.plane(p.source(i)), out.plane(i).begin());
  }
  return out;
}

FeatureMap permute_channels_grad(const FeatureMap& upstream,
                                 const ChannelPermutation& p) {
  check_width(upstream, p);
  // Scatter instead of materializing the inverse.
  FeatureMap out(upstream.channels(), upstream.height(), upstream.width());
  for (std::size_t i = 0; i < upstream.channels(); ++i) {
    std::ranges::copy(upstream.plane(i), out.plane(p.source(i)).begin());
  }
  return out;
}

namespace {

struct SpatialVisitor {
  const FeatureMap& x;

  FeatureMap operator()(HorizontalFlip) const {
    FeatureMap out(x.channels(), x.height(), x.width());
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < x.height(); ++r)
        for (std::size_t k = 0; k < x.width(); ++k)
          out.at(c, r, k) = x.at(c, r, x.width() - 1 - k);
    return out;
  }

  FeatureMap operator()(VerticalFlip) const {
    FeatureMap out(x.channels(), x.height(), x.width());
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < x.height(); ++r)
        for (std::size_t k = 0; k < x.width(); ++k)
          out.at(c, r, k) = x.at(c, x.height() - 1 - r, k);
    return out;
  }

  FeatureMap operator()(const Crop& crop) const {
    if (crop.height == 0 || crop.width == 0 ||
        crop.top + crop.height > x.height() ||
        crop.left + crop.width > x.width()) {
      throw InvalidArgument("crop rectangle outside the feature map");
    }
    FeatureMap out(x.channels(), crop.height, crop.width);
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < crop.height; ++r)
        for (std::size_t k = 0; k < crop.width; ++k)
          out.at(c, r, k) = x.at(c, crop.top + r, crop.left + k);
    return out;
  }

  FeatureMap operator()(const Translate& t) const {
    FeatureMap out(x.channels(), x.height(), x.width());
    const long h = static_cast<long>(x.height());
    const long w = static_cast<long>(x.width());
    for (std::size_t c = 0; c < x.channels(); ++c) {
      for (long r = 0; r < h; ++r) {
        const long src_r = r - t.dy;
        if (src_r < 0 || src_r >= h) continue;
        for (long k = 0; k < w; ++k) {
          const long src_k = k - t.dx;
          if (src_k < 0 || src_k >= w) continue;
          out.at(c, r, k) = x.at(c, src_r, src_k);
        }
      }
    }
    return out;
  }
};

}  // namespace

FeatureMap spatial_transform(const FeatureMap& x, const SpatialOp& op) {
  return std::visit(SpatialVisitor{x}, op);
}

}  // namespace segkey
