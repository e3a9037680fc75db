#include "mtmc/tracker.hpp"

#include "mtmc/assoc.hpp"
#include "mtmc/features.hpp"
#include "mtmc/geometry.hpp"
#include "mtmc/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mtmc {

MatX membership_matrix(std::span<const CachedTarget> targets,
                       std::span<const std::int64_t> column_ids) {
  MatX m = MatX::Zero(static_cast<Index>(targets.size()),
                      static_cast<Index>(column_ids.size()));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::int64_t id = targets[i].traj_id;
    if (id < 0) continue;
    const auto it = std::find(column_ids.begin(), column_ids.end(), id);
    if (it == column_ids.end())
      throw DataError("membership_matrix: dangling trajectory reference");
    m(static_cast<Index>(i), static_cast<Index>(it - column_ids.begin())) = 1.0;
  }
  return m;
}

MatX trajectory_scores(const MatX& g, const MatX& m) {
  if (g.cols() != m.rows())
    throw DataError("trajectory_scores: shape mismatch");
  MatX gp = g * m;
  const VecX counts = m.colwise().sum().transpose();
  for (Index c = 0; c < gp.cols(); ++c) {
    if (counts(c) <= 0.0)
      throw DataError("trajectory_scores: trajectory with no window members");
    gp.col(c) /= counts(c);
  }
  return gp;
}

VecX gate_scores(const VecX& row, double* null_prob) {
  if (!row.allFinite()) throw DataError("gate_scores: non-finite scores");
  double m = 0.0;  // null score 0 participates in the max
  for (Index j = 0; j < row.size(); ++j) m = std::max(m, row(j));
  double denom = std::exp(-m);
  for (Index j = 0; j < row.size(); ++j) denom += std::exp(row(j) - m);
  VecX p(row.size());
  for (Index j = 0; j < row.size(); ++j)
    p(j) = std::exp(row(j) - m) / denom;
  if (null_prob) *null_prob = std::exp(-m) / denom;
  return p;
}

VecX memory_feature(std::span<const VecX> history, int n_mem) {
  if (history.empty()) throw DataError("memory_feature: empty history");
  if (n_mem < 1) throw ConfigError("memory_feature: n_mem must be >= 1");
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(n_mem), history.size());
  VecX mean = VecX::Zero(history[0].size());
  for (std::size_t k = history.size() - take; k < history.size(); ++k)
    mean += history[k];
  return mean / static_cast<double>(take);
}

namespace {

ActiveTrajectory* find_active(TrackerState& state, std::int64_t id) {
  for (ActiveTrajectory& t : state.active)
    if (t.id == id) return &t;
  return nullptr;
}

void append_to_trajectory(ActiveTrajectory& traj, const TargetObs& obs,
                          const VecX& feature, int n_mem) {
  traj.members.push_back({obs.frame, obs.box});
  traj.recent_features.push_back(feature);
  if (static_cast<int>(traj.recent_features.size()) > n_mem)
    traj.recent_features.erase(traj.recent_features.begin());
  traj.last_seen = obs.frame.time;
}

// Matched (query row, column, gate probability) triples from per-camera
// Hungarian assignments on a gated probability matrix.
struct MatchedPair {
  std::size_t query;
  Index column;
  double prob;
};

std::vector<MatchedPair> per_camera_matches(
    const MatX& probs, std::span<const TargetObs> detections,
    std::span<const std::size_t> query_idx) {
  std::map<int, std::vector<std::size_t>> by_camera;  // camera → rows of probs
  for (std::size_t r = 0; r < query_idx.size(); ++r)
    by_camera[detections[query_idx[r]].frame.camera].push_back(r);
  std::vector<MatchedPair> out;
  for (const auto& [camera, rows] : by_camera) {
    MatX sub(static_cast<Index>(rows.size()), probs.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      sub.row(static_cast<Index>(r)) = probs.row(static_cast<Index>(rows[r]));
    const Assignment asg = solve_assignment_max(sub);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Index col = asg.col_of[r];
      if (col < 0) continue;
      out.push_back({query_idx[rows[r]], col,
                     sub(static_cast<Index>(r), col)});
    }
  }
  return out;
}

}  // namespace

StepStats tracker_step(TrackerState& state,
                       std::span<const TargetObs> detections, int time,
                       const ModelParams& params) {
  if (!state.config.valid()) throw ConfigError("tracker_step: invalid config");
  const TrackerConfig& cfg = state.config;
  if (time <= state.last_time)
    throw DataError("tracker_step: time must strictly increase");
  if (time > cfg.dims.horizon)
    throw DataError("tracker_step: time beyond configured horizon");
  for (const TargetObs& d : detections) {
    if (d.frame.time != time)
      throw DataError("tracker_step: detection timestamped off-step");
    if (d.frame.camera < 1 || d.frame.camera > cfg.dims.cameras)
      throw DataError("tracker_step: camera index outside scene dims");
    constexpr double kBoundsTol = 1e-6;
    if (d.box.x1 < -kBoundsTol || d.box.y1 < -kBoundsTol ||
        d.box.x2 > cfg.dims.width + kBoundsTol ||
        d.box.y2 > cfg.dims.height + kBoundsTol)
      throw DataError("tracker_step: detection outside scene dims");
  }

  StepStats stats;
  stats.assigned_ids.assign(detections.size(), -1);

  const int ws = window_start(time, cfg.window);
  std::erase_if(state.cache, [&](const CachedTarget& c) {
    return c.obs.frame.time < ws;
  });

  std::vector<VecX> features;
  features.reserve(detections.size());
  for (const TargetObs& d : detections)
    features.push_back(fused_feature(d, cfg.dims, params.enc));

  if (!detections.empty()) {
    // Columns: active trajectories with at least one in-window member.
    std::map<std::int64_t, int> member_counts;
    for (const CachedTarget& c : state.cache)
      if (c.traj_id >= 0) ++member_counts[c.traj_id];
    std::vector<std::int64_t> column_ids;
    for (const ActiveTrajectory& t : state.active)
      if (member_counts.count(t.id)) column_ids.push_back(t.id);

    if (!column_ids.empty()) {
      // F = window cache plus the current frame's targets (zero M rows).
      std::vector<CachedTarget> f_targets = state.cache;
      for (std::size_t q = 0; q < detections.size(); ++q)
        f_targets.push_back({detections[q], features[q], -1});
      MatX f(static_cast<Index>(f_targets.size()), params.dims.d_model());
      for (std::size_t i = 0; i < f_targets.size(); ++i)
        f.row(static_cast<Index>(i)) = f_targets[i].feature.transpose();
      MatX q(static_cast<Index>(detections.size()), params.dims.d_model());
      for (std::size_t i = 0; i < detections.size(); ++i)
        q.row(static_cast<Index>(i)) = features[i].transpose();

      const MatX f_e = encoder_forward(f, params.assoc);
      const MatX q_d = decoder_forward(q, f_e, params.assoc);
      const MatX g = q_d * f_e.transpose();
      const MatX m = membership_matrix(f_targets, column_ids);
      const MatX gp = trajectory_scores(g, m);
      MatX probs(gp.rows(), gp.cols());
      for (Index r = 0; r < gp.rows(); ++r)
        probs.row(r) = gate_scores(gp.row(r).transpose()).transpose();

      std::vector<std::size_t> all_queries(detections.size());
      for (std::size_t i = 0; i < detections.size(); ++i) all_queries[i] = i;
      for (const MatchedPair& mp :
           per_camera_matches(probs, detections, all_queries)) {
        stats.window_match_probs.push_back(mp.prob);
        if (mp.prob > cfg.theta1) {
          ActiveTrajectory* traj =
              find_active(state, column_ids[static_cast<std::size_t>(mp.column)]);
          if (!traj) throw DataError("tracker_step: matched trajectory missing");
          append_to_trajectory(*traj, detections[mp.query],
                               features[mp.query], cfg.n_mem);
          stats.assigned_ids[mp.query] = traj->id;
          ++stats.window_accepted;
        }
      }
    }

    // Buffer: targets the window pass did not claim.
    std::vector<std::size_t> buffer;
    for (std::size_t i = 0; i < detections.size(); ++i)
      if (stats.assigned_ids[i] < 0) buffer.push_back(i);

    if (cfg.memory_enabled && !buffer.empty() && !state.memory.empty()) {
      // Second association pass: memory entries form the encoder input set.
      MatX f_mem(static_cast<Index>(state.memory.size()),
                 params.dims.d_model());
      for (std::size_t i = 0; i < state.memory.size(); ++i)
        f_mem.row(static_cast<Index>(i)) =
            state.memory[i].mean_feature.transpose();
      MatX q_buf(static_cast<Index>(buffer.size()), params.dims.d_model());
      for (std::size_t i = 0; i < buffer.size(); ++i)
        q_buf.row(static_cast<Index>(i)) = features[buffer[i]].transpose();

      const MatX f_me = encoder_forward(f_mem, params.assoc);
      const MatX q_bd = decoder_forward(q_buf, f_me, params.assoc);
      const MatX g_mem = q_bd * f_me.transpose();
      MatX probs(g_mem.rows(), g_mem.cols());
      for (Index r = 0; r < g_mem.rows(); ++r)
        probs.row(r) = gate_scores(g_mem.row(r).transpose()).transpose();

      std::vector<char> revived_here(state.memory.size(), 0);
      std::vector<MatchedPair> accepted;
      for (const MatchedPair& mp :
           per_camera_matches(probs, detections, buffer)) {
        if (mp.prob > cfg.theta2) accepted.push_back(mp);
      }
      for (const MatchedPair& mp : accepted) {
        MemoryEntry& entry = state.memory[static_cast<std::size_t>(mp.column)];
        ActiveTrajectory* traj = find_active(state, entry.id);
        if (!traj) {
          // Revive: the retired trajectory returns to the active set with its
          // original id; feature history restarts from the new observation.
          ActiveTrajectory revived;
          revived.id = entry.id;
          revived.members = std::move(entry.members);
          state.active.push_back(std::move(revived));
          traj = &state.active.back();
          revived_here[static_cast<std::size_t>(mp.column)] = 1;
          ++stats.revived;
        }
        append_to_trajectory(*traj, detections[mp.query], features[mp.query],
                             cfg.n_mem);
        stats.assigned_ids[mp.query] = traj->id;
      }
      // Drop revived entries; erase from the back to keep indices valid.
      for (std::size_t k = revived_here.size(); k-- > 0;)
        if (revived_here[k])
          state.memory.erase(state.memory.begin() +
                             static_cast<std::ptrdiff_t>(k));
    }

    // Remaining leftovers each create a new trajectory.
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (stats.assigned_ids[i] >= 0) continue;
      ActiveTrajectory traj;
      traj.id = state.next_id++;
      append_to_trajectory(traj, detections[i], features[i], cfg.n_mem);
      state.active.push_back(std::move(traj));
      stats.assigned_ids[i] = state.active.back().id;
      ++stats.new_tracks;
    }
  }

  // Retirement: unseen for more than W frames.
  {
    std::vector<ActiveTrajectory> keep;
    keep.reserve(state.active.size());
    for (ActiveTrajectory& t : state.active) {
      if (t.last_seen < time - cfg.window) {
        MemoryEntry e;
        e.id = t.id;
        e.mean_feature = memory_feature(t.recent_features, cfg.n_mem);
        e.last_seen = t.last_seen;
        e.members = std::move(t.members);
        state.memory.push_back(std::move(e));
      } else {
        keep.push_back(std::move(t));
      }
    }
    state.active = std::move(keep);
    if (cfg.memory_capacity > 0 && state.memory.size() > cfg.memory_capacity) {
      std::stable_sort(state.memory.begin(), state.memory.end(),
                       [](const MemoryEntry& a, const MemoryEntry& b) {
                         return a.last_seen < b.last_seen;
                       });
      state.memory.erase(
          state.memory.begin(),
          state.memory.begin() +
              static_cast<std::ptrdiff_t>(state.memory.size() -
                                          cfg.memory_capacity));
    }
  }

  // Slide: current targets join the cache with their assigned ids.
  for (std::size_t i = 0; i < detections.size(); ++i)
    state.cache.push_back({detections[i], features[i], stats.assigned_ids[i]});
  state.last_time = time;
  return stats;
}

std::vector<Trajectory> finalize(const TrackerState& state) {
  std::vector<Trajectory> out;
  auto emit = [&](std::int64_t id, const std::vector<TrackPoint>& members) {
    if (static_cast<int>(members.size()) < state.config.min_traj_len) return;
    Trajectory t;
    t.id = id;
    t.members = members;
    std::sort(t.members.begin(), t.members.end(),
              [](const TrackPoint& a, const TrackPoint& b) {
                return a.frame < b.frame;
              });
    out.push_back(std::move(t));
  };
  for (const ActiveTrajectory& t : state.active) emit(t.id, t.members);
  for (const MemoryEntry& e : state.memory) emit(e.id, e.members);
  std::sort(out.begin(), out.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; });
  return out;
}

}  // namespace mtmc
