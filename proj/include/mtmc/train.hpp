#pragma once

#include "mtmc/grad.hpp"
#include "mtmc/params.hpp"
#include "mtmc/simworld.hpp"
#include "mtmc/types.hpp"

namespace mtmc {

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int iterations = 400;
  int window_frames = 8;          // frames per sampled training window
  Index max_batch_targets = 200;  // whole frames dropped past this cap
  std::uint64_t seed = 7;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;  // loss before each update
};

/// Identity labels for every rendered detection, via per-frame IoU
/// assignment against the scene's ground-truth boxes.
std::vector<std::vector<std::optional<std::int64_t>>> label_detections(
    const DetectionSet& det, const GroundTruthScene& scene);

/// Plain gradient descent with momentum over randomly sampled frame windows;
/// deterministic per seed. Aborts with DataError when the loss turns
/// non-finite.
TrainResult train(const DetectionSet& det, const GroundTruthScene& scene,
                  const ModelDims& dims, const TrainConfig& cfg);

}  // namespace mtmc
