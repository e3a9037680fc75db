#include "mtmc/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace mtmc {

double iou(const BoxPx& a, const BoxPx& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = std::max(0.0, ix2 - ix1);
  const double ih = std::max(0.0, iy2 - iy1);
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<std::optional<std::int64_t>> assign_targets_to_gt(
    std::span<const TargetObs> detections, std::span<const GtBox> gt_boxes) {
  const auto n_det = static_cast<Index>(detections.size());
  const auto n_gt = static_cast<Index>(gt_boxes.size());
  std::vector<std::optional<std::int64_t>> labels(
      static_cast<std::size_t>(n_det));
  if (n_det == 0 || n_gt == 0) return labels;

  for (std::size_t i = 1; i < detections.size(); ++i) {
    if (!(detections[i].frame == detections[0].frame)) {
      throw DataError("assign_targets_to_gt: detections span multiple frames");
    }
  }

  // Per GT: the arg-max-IoU detection (lowest index on exact ties), gated at
  // IoU > 0.6.
  std::vector<Index> claim(static_cast<std::size_t>(n_gt), -1);
  std::vector<double> claim_iou(static_cast<std::size_t>(n_gt), 0.0);
  for (Index g = 0; g < n_gt; ++g) {
    double best = kGtAssignIouThreshold;
    Index best_det = -1;
    for (Index d = 0; d < n_det; ++d) {
      const double v = iou(gt_boxes[static_cast<std::size_t>(g)].box,
                           detections[static_cast<std::size_t>(d)].box);
      if (v > best) {
        best = v;
        best_det = d;
      }
    }
    claim[static_cast<std::size_t>(g)] = best_det;
    claim_iou[static_cast<std::size_t>(g)] = best_det >= 0 ? best : 0.0;
  }

  // A detection claimed by several GTs goes to the higher IoU; earlier input
  // order wins exact ties.
  std::vector<Index> winner(static_cast<std::size_t>(n_det), -1);
  for (Index g = 0; g < n_gt; ++g) {
    const Index d = claim[static_cast<std::size_t>(g)];
    if (d < 0) continue;
    Index& w = winner[static_cast<std::size_t>(d)];
    if (w < 0 || claim_iou[static_cast<std::size_t>(g)] >
                     claim_iou[static_cast<std::size_t>(w)]) {
      w = g;
    }
  }
  for (Index d = 0; d < n_det; ++d) {
    const Index g = winner[static_cast<std::size_t>(d)];
    if (g >= 0) {
      labels[static_cast<std::size_t>(d)] =
          gt_boxes[static_cast<std::size_t>(g)].trajectory_id;
    }
  }
  return labels;
}

int window_start(int current_time, int window) {
  if (window <= 0) throw ConfigError("window size must be positive");
  return std::max(1, current_time - window + 1);
}

}  // namespace mtmc
