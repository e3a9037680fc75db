#include "mtmc/simworld.hpp"

#include <algorithm>
#include <cmath>

namespace mtmc {

namespace {

std::vector<AffineMap> default_camera_maps(const WorldConfig& c) {
  // Each camera images one horizontal slice of the ground plane onto the full
  // frame (with a margin); even cameras are mirrored so views are distinct.
  std::vector<AffineMap> maps;
  const double span = std::clamp(c.camera_span, 0.05, 1.0) * c.ground_width;
  const double sx = 0.92 * c.width / span;
  const double sy = 0.92 * c.height / c.ground_height;
  for (int cam = 1; cam <= c.cameras; ++cam) {
    const double off =
        c.cameras == 1 ? 0.0
                       : (c.ground_width - span) * static_cast<double>(cam - 1) /
                             static_cast<double>(c.cameras - 1);
    AffineMap m;
    if (cam % 2 == 1) {
      m.a = sx;
      m.tx = 0.04 * c.width - sx * off;
    } else {
      m.a = -sx;
      m.tx = 0.96 * c.width + sx * off;
    }
    m.d = sy;
    m.ty = 0.04 * c.height;
    maps.push_back(m);
  }
  return maps;
}

std::optional<BoxPx> clipped_box(double cx, double cy, double w, double h,
                                 const WorldConfig& cfg) {
  BoxPx b{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
  b.x1 = std::clamp(b.x1, 0.0, cfg.width);
  b.x2 = std::clamp(b.x2, 0.0, cfg.width);
  b.y1 = std::clamp(b.y1, 0.0, cfg.height);
  b.y2 = std::clamp(b.y2, 0.0, cfg.height);
  // Visibility floor: a target that mostly left the view emits no member,
  // instead of lingering as an edge sliver.
  if (b.width() < 0.25 * w || b.height() < 0.25 * h) return std::nullopt;
  return b;
}

bool occluded(const NoiseModel& noise, std::int64_t id, int camera, int t) {
  for (const OcclusionSpan& s : noise.occlusions) {
    if (s.identity == id && s.camera == camera && t >= s.t_begin &&
        t <= s.t_end)
      return true;
  }
  return false;
}

}  // namespace

EmbeddingModel EmbeddingModel::make(Index d_raw, int identities, int cameras,
                                    double bias_scale, double sigma_app,
                                    std::uint64_t seed) {
  if (d_raw < 2) throw ConfigError("embedding dimension must be at least 2");
  if (identities < 1 || cameras < 1)
    throw ConfigError("embedding model needs identities and cameras >= 1");
  EmbeddingModel emb;
  emb.d_raw = d_raw;
  emb.sigma_app = sigma_app;
  Rng rng(seed);
  emb.anchors.resize(identities, d_raw);
  for (Index i = 0; i < emb.anchors.rows(); ++i) {
    VecX v = rng.gaussian_vec(d_raw);
    emb.anchors.row(i) = (v / v.norm()).transpose();
  }
  emb.camera_bias.resize(cameras, d_raw);
  for (Index c = 0; c < emb.camera_bias.rows(); ++c)
    emb.camera_bias.row(c) = (bias_scale * rng.gaussian_vec(d_raw)).transpose();
  return emb;
}

GroundTruthScene generate_scene(const WorldConfig& config) {
  if (config.frames < 1 || config.identities < 1 || config.cameras < 1)
    throw ConfigError("generate_scene: frames/identities/cameras must be >= 1");
  if (config.width <= 0 || config.height <= 0 || config.ground_width <= 0 ||
      config.ground_height <= 0)
    throw ConfigError("generate_scene: non-positive dimensions");
  if (!(config.speed_min > 0) || config.speed_max < config.speed_min)
    throw ConfigError("generate_scene: bad speed range");
  if (!(config.box_w_min > 0) || config.box_w_max < config.box_w_min)
    throw ConfigError("generate_scene: bad box size range");

  std::vector<AffineMap> maps =
      config.camera_maps.empty() ? default_camera_maps(config)
                                 : config.camera_maps;
  if (static_cast<int>(maps.size()) != config.cameras)
    throw ConfigError("generate_scene: camera map count mismatch");
  for (const AffineMap& m : maps)
    if (std::abs(m.det()) < 1e-9)
      throw ConfigError("generate_scene: singular camera transform");

  Rng rng(config.seed);
  GroundTruthScene scene;
  scene.dims = config.dims();

  const double margin_u = 0.08 * config.ground_width;
  const double margin_v = 0.08 * config.ground_height;
  auto random_point = [&] {
    return std::pair<double, double>{
        rng.uniform(margin_u, config.ground_width - margin_u),
        rng.uniform(margin_v, config.ground_height - margin_v)};
  };

  auto visible_cameras = [&](double u, double v, double bw, double bh) {
    int n = 0;
    for (const AffineMap& m : maps) {
      const auto [cx, cy] = m.apply(u, v);
      if (clipped_box(cx, cy, bw, bh, config)) ++n;
    }
    return n;
  };

  for (int id = 1; id <= config.identities; ++id) {
    const double box_w = rng.uniform(config.box_w_min, config.box_w_max);
    const double box_h = box_w * config.box_h_scale;
    const double speed = rng.uniform(config.speed_min, config.speed_max);
    auto [u0, v0] = random_point();
    if (!config.spawn_in_overlap) {
      int tries = 0;
      while (visible_cameras(u0, v0, box_w, box_h) > 1 && tries++ < 256)
        std::tie(u0, v0) = random_point();
      if (visible_cameras(u0, v0, box_w, box_h) > 1)
        throw ConfigError(
            "generate_scene: no single-view spawn region; widen camera "
            "offsets or set spawn_in_overlap");
    }
    auto [wu, wv] = random_point();
    const int entry = std::min(config.frames,
                               1 + (id - 1) * std::max(0, config.entry_gap));

    Trajectory traj;
    traj.id = id;
    double u = u0, v = v0;
    for (int t = 1; t <= config.frames; ++t) {
      if (t > entry) {
        double du = wu - u, dv = wv - v;
        const double dist = std::hypot(du, dv);
        if (dist <= speed) {
          u = wu;
          v = wv;
          std::tie(wu, wv) = random_point();
        } else {
          u += speed * du / dist;
          v += speed * dv / dist;
        }
      }
      if (t < entry) continue;
      for (int cam = 1; cam <= config.cameras; ++cam) {
        const auto [cx, cy] = maps[static_cast<std::size_t>(cam - 1)].apply(u, v);
        if (const auto box = clipped_box(cx, cy, box_w, box_h, config))
          traj.members.push_back({FrameRef{cam, t}, *box});
      }
    }
    std::sort(traj.members.begin(), traj.members.end(),
              [](const TrackPoint& a, const TrackPoint& b) {
                return a.frame < b.frame;
              });
    scene.trajectories.push_back(std::move(traj));
  }
  return scene;
}

DetectionSet render_detections(const GroundTruthScene& scene,
                               const NoiseModel& noise,
                               const EmbeddingModel& emb, std::uint64_t seed) {
  if (noise.p_miss < 0 || noise.p_miss > 1)
    throw ConfigError("render_detections: p_miss outside [0,1]");
  if (noise.lambda_fp < 0)
    throw ConfigError("render_detections: negative false-positive rate");
  for (const OcclusionSpan& s : noise.occlusions) {
    if (s.t_begin < 1 || s.t_end > scene.dims.horizon || s.t_begin > s.t_end)
      throw ConfigError("render_detections: occlusion span outside horizon");
  }
  const int n_ids = static_cast<int>(scene.trajectories.size());
  if (emb.anchors.rows() < n_ids ||
      emb.camera_bias.rows() < scene.dims.cameras)
    throw ConfigError("render_detections: embedding model too small for scene");

  // (camera, time) → (trajectory index, box), built once for ordered emission.
  struct Slot {
    std::size_t traj;
    const TrackPoint* point;
  };
  std::vector<std::vector<std::vector<Slot>>> grid(
      static_cast<std::size_t>(scene.dims.horizon),
      std::vector<std::vector<Slot>>(
          static_cast<std::size_t>(scene.dims.cameras)));
  for (std::size_t k = 0; k < scene.trajectories.size(); ++k) {
    for (const TrackPoint& pt : scene.trajectories[k].members) {
      grid[static_cast<std::size_t>(pt.frame.time - 1)]
          [static_cast<std::size_t>(pt.frame.camera - 1)]
              .push_back({k, &pt});
    }
  }

  Rng rng(seed);
  DetectionSet out;
  out.by_time.resize(static_cast<std::size_t>(scene.dims.horizon));
  out.labels_by_time.resize(static_cast<std::size_t>(scene.dims.horizon));
  for (int t = 1; t <= scene.dims.horizon; ++t) {
    auto& obs_list = out.by_time[static_cast<std::size_t>(t - 1)];
    auto& labels = out.labels_by_time[static_cast<std::size_t>(t - 1)];
    for (int cam = 1; cam <= scene.dims.cameras; ++cam) {
      for (const Slot& slot :
           grid[static_cast<std::size_t>(t - 1)]
               [static_cast<std::size_t>(cam - 1)]) {
        const std::int64_t id = scene.trajectories[slot.traj].id;
        if (occluded(noise, id, cam, t)) continue;
        if (noise.p_miss > 0 && rng.uniform01() < noise.p_miss) continue;
        TargetObs obs;
        obs.frame = {cam, t};
        obs.box = slot.point->box;
        if (noise.box_jitter > 0) {
          obs.box.x1 += noise.box_jitter * rng.gaussian();
          obs.box.y1 += noise.box_jitter * rng.gaussian();
          obs.box.x2 += noise.box_jitter * rng.gaussian();
          obs.box.y2 += noise.box_jitter * rng.gaussian();
          if (obs.box.x2 < obs.box.x1) std::swap(obs.box.x1, obs.box.x2);
          if (obs.box.y2 < obs.box.y1) std::swap(obs.box.y1, obs.box.y2);
          obs.box.x1 = std::clamp(obs.box.x1, 0.0, scene.dims.width);
          obs.box.x2 = std::clamp(obs.box.x2, 0.0, scene.dims.width);
          obs.box.y1 = std::clamp(obs.box.y1, 0.0, scene.dims.height);
          obs.box.y2 = std::clamp(obs.box.y2, 0.0, scene.dims.height);
        }
        VecX app = emb.anchors.row(id - 1).transpose() +
                   emb.camera_bias.row(cam - 1).transpose();
        if (emb.sigma_app > 0) app += emb.sigma_app * rng.gaussian_vec(emb.d_raw);
        obs.app = app / app.norm();
        obs_list.push_back(std::move(obs));
        labels.emplace_back(id);
      }
      if (noise.lambda_fp > 0) {
        const int n_fp = static_cast<int>(rng.poisson(noise.lambda_fp));
        for (int k = 0; k < n_fp; ++k) {
          TargetObs obs;
          obs.frame = {cam, t};
          const double w = rng.uniform(20.0, 80.0);
          const double h = rng.uniform(40.0, 160.0);
          const double cx = rng.uniform(0.0, scene.dims.width);
          const double cy = rng.uniform(0.0, scene.dims.height);
          obs.box = {std::clamp(cx - w / 2, 0.0, scene.dims.width),
                     std::clamp(cy - h / 2, 0.0, scene.dims.height),
                     std::clamp(cx + w / 2, 0.0, scene.dims.width),
                     std::clamp(cy + h / 2, 0.0, scene.dims.height)};
          VecX app = rng.gaussian_vec(emb.d_raw);
          obs.app = app / app.norm();
          obs_list.push_back(std::move(obs));
          labels.emplace_back(std::nullopt);
        }
      }
    }
  }
  return out;
}

OcclusionScenario scripted_occlusion_scene(int window) {
  if (window < 1 || window > 151)
    throw ConfigError(
        "scripted_occlusion_scene: window must be in [1, 151] so the 152-frame "
        "gap exceeds it");
  WorldConfig cfg;
  cfg.cameras = 2;
  cfg.frames = 220;
  cfg.identities = 3;
  cfg.entry_gap = 8;
  cfg.speed_min = 0.3;
  cfg.speed_max = 0.8;
  cfg.seed = 4242;

  OcclusionScenario sc;
  sc.scene = generate_scene(cfg);
  sc.occluded_identity = 3;
  sc.occlusion_begin = 31;
  sc.occlusion_end = 182;  // 152 frames inclusive
  sc.noise.occlusions = {
      {sc.occluded_identity, 1, sc.occlusion_begin, sc.occlusion_end},
      {sc.occluded_identity, 2, sc.occlusion_begin, sc.occlusion_end}};
  return sc;
}

}  // namespace mtmc
