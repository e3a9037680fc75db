#pragma once

#include "mtmc/params.hpp"
#include "mtmc/types.hpp"

#include <span>

namespace mtmc {

struct TrackerConfig {
  int window = 60;  // W; the step size is fixed at 1 frame
  double theta1 = 0.1;
  double theta2 = 0.2;
  int n_mem = 10;
  int min_traj_len = 10;
  std::size_t memory_capacity = 0;  // 0 = unbounded
  bool memory_enabled = true;
  SceneDims dims;

  bool valid() const {
    return window >= 1 && theta1 >= 0 && theta1 <= 1 && theta2 >= 0 &&
           theta2 <= 1 && n_mem >= 1 && min_traj_len >= 1 && dims.valid();
  }
};

/// One window-cache row: an observed target, its fused feature, and the
/// trajectory it was assigned to.
struct CachedTarget {
  TargetObs obs;
  VecX feature;
  std::int64_t traj_id = -1;  // -1 while unassigned (current step only)
};

struct ActiveTrajectory {
  std::int64_t id = 0;
  std::vector<TrackPoint> members;
  std::vector<VecX> recent_features;  // newest last, trimmed to n_mem
  int last_seen = 0;
};

struct MemoryEntry {
  std::int64_t id = 0;
  VecX mean_feature;  // f̃: mean of the last ≤ N_mem features at retirement
  int last_seen = 0;
  std::vector<TrackPoint> members;
};

struct TrackerState {
  TrackerConfig config;
  std::vector<CachedTarget> cache;  // time ascending, ≤ W steps
  std::vector<ActiveTrajectory> active;
  std::vector<MemoryEntry> memory;
  std::int64_t next_id = 1;
  int last_time = 0;
};

/// Per-step diagnostics; `assigned_ids` aligns with the step's detections.
struct StepStats {
  std::vector<std::int64_t> assigned_ids;
  /// Gate probabilities of the per-camera Hungarian-selected window pairs,
  /// recorded before θ1 filtering (acceptance count at a threshold θ is the
  /// number of entries > θ).
  std::vector<double> window_match_probs;
  int window_accepted = 0;
  int revived = 0;
  int new_tracks = 0;
};

/// Binary indicator M over (cache ∪ current) rows × active-trajectory
/// columns; rows of unassigned targets are zero.
MatX membership_matrix(std::span<const CachedTarget> targets,
                       std::span<const std::int64_t> column_ids);

/// G′ = G·M with each column divided by that trajectory's member count.
MatX trajectory_scores(const MatX& g, const MatX& m);

/// Softmax of one query's trajectory scores against the constant null score
/// 0; returns the per-trajectory probabilities, and the null probability via
/// out-parameter if given.
VecX gate_scores(const VecX& row, double* null_prob = nullptr);

/// Mean of the min(n_mem, size) most recent features.
VecX memory_feature(std::span<const VecX> history, int n_mem);

/// One online step at time T (strictly increasing across calls): window
/// association via the transformer + Hungarian + θ1, memory-bank revival via
/// θ2, new-track creation, retirement of trajectories unseen for more than W
/// frames, and the window slide.
StepStats tracker_step(TrackerState& state,
                       std::span<const TargetObs> detections, int time,
                       const ModelParams& params);

/// All trajectories (active + memory) with ≥ min_traj_len members, members
/// sorted by (time, camera), trajectories sorted by id.
std::vector<Trajectory> finalize(const TrackerState& state);

}  // namespace mtmc
