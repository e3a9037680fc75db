#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtmc {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatX = Mat<double>;
using VecX = Vec<double>;
using Index = Eigen::Index;

/// Bad configuration or usage; maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad input data (files, streams); maps to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Axis-aligned pixel rectangle, corners (x1,y1) top-left, (x2,y2) bottom-right.
struct BoxPx {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 <= x2 && y1 <= y2;
  }
};

/// One (camera, time) slot. Both indices are 1-based.
struct FrameRef {
  int camera = 1;
  int time = 1;

  friend bool operator==(const FrameRef&, const FrameRef&) = default;
  /// Stream order: time first, then camera.
  friend bool operator<(const FrameRef& a, const FrameRef& b) {
    return a.time != b.time ? a.time < b.time : a.camera < b.camera;
  }
};

/// One detected target: box, frame slot, raw appearance vector, confidence.
struct TargetObs {
  BoxPx box;
  FrameRef frame;
  VecX app;
  double det_score = 1.0;
};

struct TrackPoint {
  FrameRef frame;
  BoxPx box;
};

/// A (possibly partial) global trajectory: at most one box per (camera, time),
/// members sorted by (time, camera).
struct Trajectory {
  std::int64_t id = 0;
  std::vector<TrackPoint> members;
};

/// Per-camera frame geometry plus stream extent.
struct SceneDims {
  double width = 0;
  double height = 0;
  int horizon = 0;  // total frames T
  int cameras = 0;  // camera count C

  bool valid() const { return width > 0 && height > 0 && horizon > 0 && cameras > 0; }
};

}  // namespace mtmc
