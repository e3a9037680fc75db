#pragma once

#include "mtmc/params.hpp"
#include "mtmc/simworld.hpp"
#include "mtmc/tracker.hpp"
#include "mtmc/train.hpp"
#include "mtmc/types.hpp"

#include <filesystem>
#include <span>
#include <string>

namespace mtmc {

/// One track-file line. id is −1 for raw detections without identity.
struct TrackRecord {
  int camera = 1;
  int frame = 1;
  std::int64_t id = -1;
  BoxPx box;
  double score = 1.0;
};

inline constexpr const char* kTrackHeader =
    "camera,frame,id,x1,y1,x2,y2,score";

/// Comma-separated, header line first, floats with 6 decimals, newline-
/// terminated; byte-stable for identical inputs.
void write_track_file(const std::filesystem::path& path,
                      std::span<const TrackRecord> records);

/// Parse errors carry the 1-based line number.
std::vector<TrackRecord> read_track_file(const std::filesystem::path& path);

std::vector<TrackRecord> records_from_trajectories(
    std::span<const Trajectory> trajs);

/// Groups records by id (members sorted by time, camera); id −1 rejected.
std::vector<Trajectory> trajectories_from_records(
    std::span<const TrackRecord> records);

/// Everything a run needs, parsed from one dotted key=value config file.
struct RunConfig {
  WorldConfig world;
  NoiseModel noise;
  double emb_bias_scale = 0.05;
  double emb_sigma_app = 0.05;
  std::uint64_t emb_seed = 11;
  ModelDims dims;
  std::uint64_t model_seed = 5;
  TrackerConfig tracker;
  TrainConfig train;

  EmbeddingModel build_embedding() const;
};

/// Sections scenario./model./tracker./train.; `#` comments; unknown keys are
/// errors naming the key. MTMC_SEED_OVERRIDE (integer env var), when set,
/// replaces every seed in the file.
RunConfig parse_run_config(const std::filesystem::path& path);

/// Same parser over in-memory text (tests).
RunConfig parse_run_config_text(const std::string& text);

/// Binary named-tensor container with a header recording dims and a format
/// version; tensors stored row-major float64 in tensor_refs order.
void save_weights(const std::filesystem::path& path,
                  const ModelParams& params);
ModelParams load_weights(const std::filesystem::path& path);

}  // namespace mtmc
