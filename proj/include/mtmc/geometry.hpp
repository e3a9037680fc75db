#pragma once

#include "mtmc/types.hpp"

#include <span>
#include <utility>

namespace mtmc {

/// Intersection-over-union of two boxes. Degenerate unions yield 0.
double iou(const BoxPx& a, const BoxPx& b);

/// One ground-truth box carrying its trajectory id.
struct GtBox {
  std::int64_t trajectory_id = 0;
  BoxPx box;
};

/// IoU threshold above which a ground-truth box claims a detection.
inline constexpr double kGtAssignIouThreshold = 0.6;

/// Labels each detection with the ground-truth trajectory that arg-maxes IoU
/// on it (strictly above the 0.6 gate), or nothing. All inputs must come from
/// one (camera, time) frame. Each GT labels at most one detection and each
/// detection carries at most one label; detection-side conflicts go to the
/// higher-IoU GT.
std::vector<std::optional<std::int64_t>> assign_targets_to_gt(
    std::span<const TargetObs> detections, std::span<const GtBox> gt_boxes);

/// First time index covered by a window of size `window` ending at
/// `current_time`: max(1, T - W + 1).
int window_start(int current_time, int window);

}  // namespace mtmc
