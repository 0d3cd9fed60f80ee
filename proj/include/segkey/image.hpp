#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "segkey/feature_map.hpp"

namespace segkey {

// 8-bit planar image, row-major (channel, row, column).
struct ImageU8 {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(std::size_t c, std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::uint8_t& at(std::size_t ch, std::size_t row, std::size_t col) {
    return data[(ch * height + row) * width + col];
  }
  std::uint8_t at(std::size_t ch, std::size_t row, std::size_t col) const {
    return data[(ch * height + row) * width + col];
  }

  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

// Per-pixel class indices.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), data(h * w, fill) {}

  std::uint8_t& at(std::size_t row, std::size_t col) {
    return data[row * width + col];
  }
  std::uint8_t at(std::size_t row, std::size_t col) const {
    return data[row * width + col];
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// Maps u8 values to [0, 1].
FeatureMap to_feature_map(const ImageU8& img);

// Binary PPM (P6, maxval 255) for 3-channel images.
void write_ppm(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_ppm(const std::filesystem::path& path);

// Binary PGM (P5, maxval 255); label values are stored directly.
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

// Bilinear resampling (half-pixel centers) of the rectangle
// [top, top+crop_h) x [left, left+crop_w) to out_h x out_w, rounded to nearest.
ImageU8 resample_bilinear(const ImageU8& img, std::size_t top, std::size_t left,
                          std::size_t crop_h, std::size_t crop_w,
                          std::size_t out_h, std::size_t out_w);
// Nearest-neighbour counterpart for label maps.
LabelMap resample_nearest(const LabelMap& labels, std::size_t top,
                          std::size_t left, std::size_t crop_h,
                          std::size_t crop_w, std::size_t out_h,
                          std::size_t out_w);

ImageU8 flip_horizontal(const ImageU8& img);
LabelMap flip_horizontal(const LabelMap& labels);

}  // namespace segkey
