#pragma once

#include "mtmc/rng.hpp"
#include "mtmc/types.hpp"

#include <utility>

namespace mtmc {

/// Ground-plane → image-plane map: (x, y) = [a b; c d]·(u, v) + (tx, ty).
struct AffineMap {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0, tx = 0.0, ty = 0.0;

  double det() const { return a * d - b * c; }
  std::pair<double, double> apply(double u, double v) const {
    return {a * u + b * v + tx, c * u + d * v + ty};
  }
};

/// Scenario shape: agents on a shared ground plane viewed by C cameras.
struct WorldConfig {
  int cameras = 2;
  int frames = 100;
  int identities = 5;
  double width = 1920.0;
  double height = 1080.0;
  double ground_width = 100.0;
  double ground_height = 60.0;
  /// Fraction of the ground width each default camera view covers. Views are
  /// evenly offset slices, so adjacent cameras overlap (0.62 with two cameras
  /// gives a 24% shared strip) and identities hand off through the overlap.
  double camera_span = 0.62;
  /// When false (default), agents spawn at points visible to at most one
  /// camera, so a new identity is born in a single view and acquired by the
  /// next camera through association rather than by a parallel birth.
  bool spawn_in_overlap = false;
  /// One map per camera; empty = defaults built from camera_span.
  std::vector<AffineMap> camera_maps;
  double speed_min = 0.4;
  double speed_max = 1.2;
  double box_w_min = 40.0;
  double box_w_max = 90.0;
  double box_h_scale = 2.2;
  /// Identity k enters at frame 1 + (k-1)·entry_gap.
  int entry_gap = 0;
  std::uint64_t seed = 1;

  SceneDims dims() const { return {width, height, frames, cameras}; }
};

/// Forced miss: `identity` emits no detections in `camera` during
/// [t_begin, t_end] (inclusive).
struct OcclusionSpan {
  std::int64_t identity = 0;
  int camera = 1;
  int t_begin = 1;
  int t_end = 1;
};

/// Detection corruption applied on top of ground truth.
struct NoiseModel {
  double box_jitter = 0.0;  // pixels, gaussian per corner coordinate
  double p_miss = 0.0;
  double lambda_fp = 0.0;   // expected false positives per (camera, frame)
  std::vector<OcclusionSpan> occlusions;
};

/// Identity-conditioned synthetic appearance embeddings.
struct EmbeddingModel {
  Index d_raw = 32;
  MatX anchors;      // identities × d_raw, unit rows; row k ↔ identity k+1
  MatX camera_bias;  // cameras × d_raw
  double sigma_app = 0.05;

  static EmbeddingModel make(Index d_raw, int identities, int cameras,
                             double bias_scale, double sigma_app,
                             std::uint64_t seed);
};

/// Ground truth: one global trajectory per identity, members across cameras.
struct GroundTruthScene {
  SceneDims dims;
  std::vector<Trajectory> trajectories;
};

/// Detections grouped by time step (index t−1), each with its GT identity or
/// nothing for false positives; rows within a step ordered by (camera, then
/// emission order).
struct DetectionSet {
  std::vector<std::vector<TargetObs>> by_time;
  std::vector<std::vector<std::optional<std::int64_t>>> labels_by_time;

  int frames() const { return static_cast<int>(by_time.size()); }
};

/// Deterministic waypoint-walk scenario; same config ⇒ identical scene.
GroundTruthScene generate_scene(const WorldConfig& config);

/// Corrupts ground truth into per-frame detections with labels.
DetectionSet render_detections(const GroundTruthScene& scene,
                               const NoiseModel& noise,
                               const EmbeddingModel& emb, std::uint64_t seed);

/// Canned two-camera scenario for the memory-bank regression: one identity
/// disappears from every camera for 152 consecutive frames (> window for
/// window ≤ 151) and then returns.
struct OcclusionScenario {
  GroundTruthScene scene;
  NoiseModel noise;
  std::int64_t occluded_identity = 0;
  int occlusion_begin = 0;
  int occlusion_end = 0;
};

OcclusionScenario scripted_occlusion_scene(int window);

}  // namespace mtmc
