#include "segkey/metrics.hpp"

#include <string>

#include "segkey/errors.hpp"

namespace segkey {

ClassConfusion class_confusion(const LabelMap& pred, const LabelMap& gt,
                               std::size_t num_classes,
                               std::optional<int> ignore_index) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw InvalidArgument("prediction and ground truth differ in size");
  }
  ClassConfusion cm{std::vector<std::uint64_t>(num_classes),
                    std::vector<std::uint64_t>(num_classes),
                    std::vector<std::uint64_t>(num_classes)};
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const int g = gt.data[i];
    if (ignore_index && g == *ignore_index) continue;
    const int p = pred.data[i];
    if (static_cast<std::size_t>(g) >= num_classes ||
        static_cast<std::size_t>(p) >= num_classes) {
      throw InvalidArgument("label value outside [0, " + std::to_string(num_classes) + ")");
    }
    if (p == g) {
      ++cm.tp[g];
    } else {
      ++cm.fp[p];
      ++cm.fn[g];
    }
  }
  return cm;
}

std::vector<std::optional<double>> iou_per_class(const LabelMap& pred,
                                                 const LabelMap& gt,
                                                 std::size_t num_classes,
                                                 std::optional<int> ignore_index) {
  const ClassConfusion cm = class_confusion(pred, gt, num_classes, ignore_index);
  std::vector<std::optional<double>> out(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::uint64_t denom = cm.tp[c] + cm.fp[c] + cm.fn[c];
    if (denom > 0) {
      out[c] = static_cast<double>(cm.tp[c]) / static_cast<double>(denom);
    }
  }
  return out;
}

double mean_iou(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes,
                std::optional<int> ignore_index) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& iou : iou_per_class(pred, gt, num_classes, ignore_index)) {
    if (iou) {
      sum += *iou;
      ++present;
    }
  }
  if (present == 0) throw InvalidArgument("mean_iou: no class present");
  return sum / static_cast<double>(present);
}

}  // namespace segkey
