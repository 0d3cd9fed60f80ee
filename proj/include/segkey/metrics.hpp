#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "segkey/image.hpp"

namespace segkey {

// Pixel counts per class; pixels whose ground truth is ignored are skipped.
struct ClassConfusion {
  std::vector<std::uint64_t> tp;
  std::vector<std::uint64_t> fp;
  std::vector<std::uint64_t> fn;
};

// Throws InvalidArgument on a shape mismatch or a value >= num_classes that
// is not the ignore index.
ClassConfusion class_confusion(const LabelMap& pred, const LabelMap& gt,
                               std::size_t num_classes,
                               std::optional<int> ignore_index = std::nullopt);

// TP / (TP + FP + FN) per class; nullopt where the denominator is zero.
std::vector<std::optional<double>> iou_per_class(
    const LabelMap& pred, const LabelMap& gt, std::size_t num_classes,
    std::optional<int> ignore_index = std::nullopt);

// Average IoU over present classes. Throws InvalidArgument if no class is
// present (every pixel ignored).
double mean_iou(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes,
                std::optional<int> ignore_index = std::nullopt);

}  // namespace segkey
