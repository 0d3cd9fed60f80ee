#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "segkey/image.hpp"

namespace segkey {

struct SegSample {
  ImageU8 image;   // 3 x S x S
  LabelMap labels; // S x S

  friend bool operator==(const SegSample&, const SegSample&) = default;
};

enum class Split { kTrain, kDev, kTest };
const char* split_name(Split split);

struct DatasetManifest {
  int version = 1;
  std::size_t size = 32;
  std::size_t num_classes = 4;
  std::vector<std::string> class_names{"background", "disk", "rectangle", "triangle"};
  std::size_t n_train = 0;
  std::size_t n_dev = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;

  std::size_t count(Split split) const;
};

struct GenerateOptions {
  std::uint64_t seed = 7;
  std::size_t n_train = 200;
  std::size_t n_dev = 40;
  std::size_t n_test = 80;
  std::size_t size = 32;
};

// Background-fraction bounds enforced per generated sample.
inline constexpr double kMinBackground = 0.3;
inline constexpr double kMaxBackground = 0.95;

// One sample of a split; a pure function of (seed, split, index, size).
// Classes: 0 background, 1 disk, 2 rectangle, 3 triangle. Each image holds
// 1-3 shapes over a textured background.
SegSample generate_sample(std::uint64_t seed, Split split, std::size_t index,
                          std::size_t size);

// Writes DIR/{train,dev,test}/img_%05d.ppm, lbl_%05d.pgm and DIR/manifest.json.
// Throws InvalidArgument for an empty split or size < 16.
DatasetManifest generate_dataset(const GenerateOptions& options,
                                 const std::filesystem::path& dir);

DatasetManifest read_manifest(const std::filesystem::path& dir);

std::filesystem::path image_path(const std::filesystem::path& dir, Split split,
                                 std::size_t index);
std::filesystem::path label_path(const std::filesystem::path& dir, Split split,
                                 std::size_t index);

// Validates equal sizes and labels < num_classes.
SegSample load_sample(const std::filesystem::path& image_file,
                      const std::filesystem::path& label_file,
                      std::size_t num_classes);
void save_sample(const std::filesystem::path& image_file,
                 const std::filesystem::path& label_file, const SegSample& s);

std::vector<SegSample> load_split(const std::filesystem::path& dir, Split split);

// Bilinear image, nearest labels, both to new_size x new_size.
SegSample resize_sample(const SegSample& s, std::size_t new_size);

}  // namespace segkey
