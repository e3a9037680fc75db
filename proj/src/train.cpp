#include "mtmc/train.hpp"

#include "mtmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mtmc {

std::vector<std::vector<std::optional<std::int64_t>>> label_detections(
    const DetectionSet& det, const GroundTruthScene& scene) {
  // Ground-truth boxes grouped by frame.
  std::map<FrameRef, std::vector<GtBox>> gt_by_frame;
  for (const Trajectory& traj : scene.trajectories)
    for (const TrackPoint& pt : traj.members)
      gt_by_frame[pt.frame].push_back({traj.id, pt.box});

  std::vector<std::vector<std::optional<std::int64_t>>> labels(
      det.by_time.size());
  for (std::size_t ti = 0; ti < det.by_time.size(); ++ti) {
    const auto& obs = det.by_time[ti];
    labels[ti].resize(obs.size());
    // Partition the step's detections by camera frame, preserving order.
    std::map<FrameRef, std::vector<std::size_t>> by_frame;
    for (std::size_t k = 0; k < obs.size(); ++k)
      by_frame[obs[k].frame].push_back(k);
    for (const auto& [frame, idxs] : by_frame) {
      std::vector<TargetObs> frame_obs;
      frame_obs.reserve(idxs.size());
      for (const std::size_t k : idxs) frame_obs.push_back(obs[k]);
      const auto it = gt_by_frame.find(frame);
      const std::vector<GtBox> empty;
      const auto frame_labels = assign_targets_to_gt(
          frame_obs, it == gt_by_frame.end() ? empty : it->second);
      for (std::size_t j = 0; j < idxs.size(); ++j)
        labels[ti][idxs[j]] = frame_labels[j];
    }
  }
  return labels;
}

TrainResult train(const DetectionSet& det, const GroundTruthScene& scene,
                  const ModelDims& dims, const TrainConfig& cfg) {
  if (cfg.iterations < 0) throw ConfigError("train: negative iterations");
  if (cfg.learning_rate <= 0) throw ConfigError("train: learning rate <= 0");
  if (cfg.momentum < 0 || cfg.momentum >= 1)
    throw ConfigError("train: momentum outside [0, 1)");
  if (cfg.window_frames < 1) throw ConfigError("train: window_frames < 1");
  const int horizon = det.frames();
  if (horizon < 1) throw DataError("train: empty detection stream");

  const auto labels = label_detections(det, scene);
  bool any_labeled = false;
  for (const auto& step : labels)
    for (const auto& l : step) any_labeled |= l.has_value();
  if (!any_labeled) throw DataError("train: no labeled detections to fit");

  TrainResult result;
  result.params = make_initialized_params(dims, cfg.seed);
  ModelParams grads = make_zero_params(dims);
  ModelParams velocity = make_zero_params(dims);
  auto param_refs = tensor_refs(result.params);
  auto grad_refs = tensor_refs(grads);
  auto vel_refs = tensor_refs(velocity);

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const int window = std::min(cfg.window_frames, horizon);
  const int max_start = horizon - window + 1;

  for (int it = 0; it < cfg.iterations; ++it) {
    // Sample a window with at least one labeled target; the bounded retry
    // keeps the draw sequence deterministic.
    TrainingBatch batch;
    bool found = false;
    for (int attempt = 0; attempt < 64 && !found; ++attempt) {
      const int t0 = rng.uniform_int(1, max_start);
      std::vector<TargetObs> obs;
      std::vector<std::optional<std::int64_t>> obs_labels;
      for (int t = t0; t < t0 + window; ++t) {
        const auto& step_obs = det.by_time[static_cast<std::size_t>(t - 1)];
        if (static_cast<Index>(obs.size() + step_obs.size()) >
                cfg.max_batch_targets &&
            !obs.empty())
          break;
        const auto& step_labels = labels[static_cast<std::size_t>(t - 1)];
        obs.insert(obs.end(), step_obs.begin(), step_obs.end());
        obs_labels.insert(obs_labels.end(), step_labels.begin(),
                          step_labels.end());
      }
      const bool labeled = std::any_of(
          obs_labels.begin(), obs_labels.end(),
          [](const std::optional<std::int64_t>& l) { return l.has_value(); });
      if (!obs.empty() && labeled) {
        batch = make_batch(obs, obs_labels, scene.dims);
        found = true;
      }
    }
    if (!found) throw DataError("train: no labeled window found in 64 draws");

    const LossBreakdown lb = loss_gradients(batch, result.params, grads);
    if (!std::isfinite(lb.total)) throw DataError("train: loss diverged");
    result.loss_curve.push_back(lb.total);

    grad_refs = tensor_refs(grads);  // loss_gradients reallocates grads
    for (std::size_t k = 0; k < param_refs.size(); ++k) {
      double* p = param_refs[k].data;
      const double* g = grad_refs[k].data;
      double* v = vel_refs[k].data;
      const Index n = param_refs[k].size();
      for (Index e = 0; e < n; ++e) {
        v[e] = cfg.momentum * v[e] - cfg.learning_rate * g[e];
        p[e] += v[e];
      }
    }
  }
  return result;
}

}  // namespace mtmc
