#include "mtmc/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mtmc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& v, const char* key) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(std::string("config value for ") + key +
                      " is not a number: " + v);
  }
  if (pos != v.size())
    throw ConfigError(std::string("config value for ") + key +
                      " has trailing characters: " + v);
  return d;
}

int to_int(const std::string& v, const char* key) {
  const double d = to_double(v, key);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw ConfigError(std::string("config value for ") + key +
                      " must be an integer: " + v);
  return i;
}

std::uint64_t to_u64(const std::string& v, const char* key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError(std::string("config value for ") + key +
                      " must be a nonnegative integer: " + v);
  }
}

bool to_bool(const std::string& v, const char* key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(std::string("config value for ") + key +
                    " must be true/false: " + v);
}

std::vector<OcclusionSpan> parse_occlusions(const std::string& v) {
  // "identity:camera:t_begin:t_end" items separated by ';'
  std::vector<OcclusionSpan> spans;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    OcclusionSpan s;
    if (std::sscanf(item.c_str(), "%ld:%d:%d:%d", &s.identity, &s.camera,
                    &s.t_begin, &s.t_end) != 4)
      throw ConfigError("config value for scenario.occlusions must be "
                        "id:cam:t0:t1 items separated by ';': " +
                        item);
    spans.push_back(s);
  }
  return spans;
}

}  // namespace

void write_track_file(const std::filesystem::path& path,
                      std::span<const TrackRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << kTrackHeader << "\n";
  char line[256];
  for (const TrackRecord& r : records) {
    std::snprintf(line, sizeof(line),
                  "%d,%d,%lld,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.camera, r.frame,
                  static_cast<long long>(r.id), r.box.x1, r.box.y1, r.box.x2,
                  r.box.y2, r.score);
    out << line;
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<TrackRecord> read_track_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "missing header line");
  if (trim(line) != kTrackHeader)
    parse_fail(path, 1, std::string("expected header '") + kTrackHeader + "'");
  std::vector<TrackRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    TrackRecord r;
    long long id = -1;
    if (std::sscanf(t.c_str(), "%d,%d,%lld,%lf,%lf,%lf,%lf,%lf", &r.camera,
                    &r.frame, &id, &r.box.x1, &r.box.y1, &r.box.x2, &r.box.y2,
                    &r.score) != 8)
      parse_fail(path, line_no, "expected 8 comma-separated fields");
    r.id = id;
    if (r.camera < 1) parse_fail(path, line_no, "camera must be >= 1");
    if (r.frame < 1) parse_fail(path, line_no, "frame must be >= 1");
    records.push_back(r);
  }
  return records;
}

std::vector<TrackRecord> records_from_trajectories(
    std::span<const Trajectory> trajs) {
  std::vector<TrackRecord> records;
  for (const Trajectory& t : trajs)
    for (const TrackPoint& pt : t.members)
      records.push_back(
          {pt.frame.camera, pt.frame.time, t.id, pt.box, 1.0});
  std::sort(records.begin(), records.end(),
            [](const TrackRecord& a, const TrackRecord& b) {
              return std::tie(a.frame, a.camera, a.id) <
                     std::tie(b.frame, b.camera, b.id);
            });
  return records;
}

std::vector<Trajectory> trajectories_from_records(
    std::span<const TrackRecord> records) {
  std::map<std::int64_t, Trajectory> by_id;
  for (const TrackRecord& r : records) {
    if (r.id < 0)
      throw DataError("track record without id cannot form a trajectory");
    Trajectory& t = by_id[r.id];
    t.id = r.id;
    t.members.push_back({FrameRef{r.camera, r.frame}, r.box});
  }
  std::vector<Trajectory> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    std::sort(t.members.begin(), t.members.end(),
              [](const TrackPoint& a, const TrackPoint& b) {
                return a.frame < b.frame;
              });
    out.push_back(std::move(t));
  }
  return out;
}

EmbeddingModel RunConfig::build_embedding() const {
  return EmbeddingModel::make(dims.d_raw, world.identities, world.cameras,
                              emb_bias_scale, emb_sigma_app, emb_seed);
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, Setter> schema = {
      {"scenario.cameras",
       [&](const std::string& v) { cfg.world.cameras = to_int(v, "scenario.cameras"); }},
      {"scenario.frames",
       [&](const std::string& v) { cfg.world.frames = to_int(v, "scenario.frames"); }},
      {"scenario.identities",
       [&](const std::string& v) { cfg.world.identities = to_int(v, "scenario.identities"); }},
      {"scenario.width",
       [&](const std::string& v) { cfg.world.width = to_double(v, "scenario.width"); }},
      {"scenario.height",
       [&](const std::string& v) { cfg.world.height = to_double(v, "scenario.height"); }},
      {"scenario.ground_width",
       [&](const std::string& v) { cfg.world.ground_width = to_double(v, "scenario.ground_width"); }},
      {"scenario.ground_height",
       [&](const std::string& v) { cfg.world.ground_height = to_double(v, "scenario.ground_height"); }},
      {"scenario.camera_span",
       [&](const std::string& v) { cfg.world.camera_span = to_double(v, "scenario.camera_span"); }},
      {"scenario.spawn_in_overlap",
       [&](const std::string& v) { cfg.world.spawn_in_overlap = to_bool(v, "scenario.spawn_in_overlap"); }},
      {"scenario.speed_min",
       [&](const std::string& v) { cfg.world.speed_min = to_double(v, "scenario.speed_min"); }},
      {"scenario.speed_max",
       [&](const std::string& v) { cfg.world.speed_max = to_double(v, "scenario.speed_max"); }},
      {"scenario.box_w_min",
       [&](const std::string& v) { cfg.world.box_w_min = to_double(v, "scenario.box_w_min"); }},
      {"scenario.box_w_max",
       [&](const std::string& v) { cfg.world.box_w_max = to_double(v, "scenario.box_w_max"); }},
      {"scenario.box_h_scale",
       [&](const std::string& v) { cfg.world.box_h_scale = to_double(v, "scenario.box_h_scale"); }},
      {"scenario.entry_gap",
       [&](const std::string& v) { cfg.world.entry_gap = to_int(v, "scenario.entry_gap"); }},
      {"scenario.seed",
       [&](const std::string& v) { cfg.world.seed = to_u64(v, "scenario.seed"); }},
      {"scenario.box_jitter",
       [&](const std::string& v) { cfg.noise.box_jitter = to_double(v, "scenario.box_jitter"); }},
      {"scenario.p_miss",
       [&](const std::string& v) { cfg.noise.p_miss = to_double(v, "scenario.p_miss"); }},
      {"scenario.lambda_fp",
       [&](const std::string& v) { cfg.noise.lambda_fp = to_double(v, "scenario.lambda_fp"); }},
      {"scenario.occlusions",
       [&](const std::string& v) { cfg.noise.occlusions = parse_occlusions(v); }},
      {"scenario.bias_scale",
       [&](const std::string& v) { cfg.emb_bias_scale = to_double(v, "scenario.bias_scale"); }},
      {"scenario.sigma_app",
       [&](const std::string& v) { cfg.emb_sigma_app = to_double(v, "scenario.sigma_app"); }},
      {"scenario.emb_seed",
       [&](const std::string& v) { cfg.emb_seed = to_u64(v, "scenario.emb_seed"); }},
      {"model.d_raw",
       [&](const std::string& v) { cfg.dims.d_raw = to_int(v, "model.d_raw"); }},
      {"model.d_roi",
       [&](const std::string& v) { cfg.dims.d_roi = to_int(v, "model.d_roi"); }},
      {"model.d_st",
       [&](const std::string& v) { cfg.dims.d_st = to_int(v, "model.d_st"); }},
      {"model.heads",
       [&](const std::string& v) { cfg.dims.heads = to_int(v, "model.heads"); }},
      {"model.seed",
       [&](const std::string& v) { cfg.model_seed = to_u64(v, "model.seed"); }},
      {"tracker.window",
       [&](const std::string& v) { cfg.tracker.window = to_int(v, "tracker.window"); }},
      {"tracker.theta1",
       [&](const std::string& v) { cfg.tracker.theta1 = to_double(v, "tracker.theta1"); }},
      {"tracker.theta2",
       [&](const std::string& v) { cfg.tracker.theta2 = to_double(v, "tracker.theta2"); }},
      {"tracker.n_mem",
       [&](const std::string& v) { cfg.tracker.n_mem = to_int(v, "tracker.n_mem"); }},
      {"tracker.min_traj_len",
       [&](const std::string& v) { cfg.tracker.min_traj_len = to_int(v, "tracker.min_traj_len"); }},
      {"tracker.memory_capacity",
       [&](const std::string& v) {
         cfg.tracker.memory_capacity =
             static_cast<std::size_t>(to_u64(v, "tracker.memory_capacity"));
       }},
      {"tracker.memory_enabled",
       [&](const std::string& v) { cfg.tracker.memory_enabled = to_bool(v, "tracker.memory_enabled"); }},
      {"train.learning_rate",
       [&](const std::string& v) { cfg.train.learning_rate = to_double(v, "train.learning_rate"); }},
      {"train.momentum",
       [&](const std::string& v) { cfg.train.momentum = to_double(v, "train.momentum"); }},
      {"train.iterations",
       [&](const std::string& v) { cfg.train.iterations = to_int(v, "train.iterations"); }},
      {"train.window_frames",
       [&](const std::string& v) { cfg.train.window_frames = to_int(v, "train.window_frames"); }},
      {"train.max_batch_targets",
       [&](const std::string& v) { cfg.train.max_batch_targets = to_int(v, "train.max_batch_targets"); }},
      {"train.seed",
       [&](const std::string& v) { cfg.train.seed = to_u64(v, "train.seed"); }},
  };

  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = schema.find(key);
    if (it == schema.end())
      throw ConfigError("unknown config key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    it->second(value);
  }

  if (const char* env = std::getenv("MTMC_SEED_OVERRIDE")) {
    const std::uint64_t s = to_u64(env, "MTMC_SEED_OVERRIDE");
    cfg.world.seed = s;
    cfg.emb_seed = s;
    cfg.model_seed = s;
    cfg.train.seed = s;
  }

  cfg.tracker.dims = cfg.world.dims();
  if (!cfg.dims.valid())
    throw ConfigError(
        "model dims invalid: d_roi + d_st must be positive and divisible by "
        "heads");
  return cfg;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

namespace {

constexpr char kWeightsMagic[8] = {'M', 'T', 'M', 'C', 'W', 'T', 'S', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated weights file: " + path.string());
  return v;
}

}  // namespace

void save_weights(const std::filesystem::path& path,
                  const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  auto refs = tensor_refs(const_cast<ModelParams&>(params));
  out.write(kWeightsMagic, sizeof(kWeightsMagic));
  write_pod<std::uint64_t>(out, 1);  // format version
  write_pod<std::int64_t>(out, params.dims.d_raw);
  write_pod<std::int64_t>(out, params.dims.d_roi);
  write_pod<std::int64_t>(out, params.dims.d_st);
  write_pod<std::int64_t>(out, params.dims.heads);
  write_pod<std::uint64_t>(out, refs.size());
  for (const TensorRef& t : refs) {
    write_pod<std::uint64_t>(out, t.name.size());
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod<std::int64_t>(out, t.rows);
    write_pod<std::int64_t>(out, t.cols);
    // Row-major on disk; storage is column-major.
    for (Index r = 0; r < t.rows; ++r)
      for (Index c = 0; c < t.cols; ++c)
        write_pod<double>(out, t.data[c * t.rows + r]);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

ModelParams load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0)
    throw DataError("not a weights file: " + path.string());
  const auto version = read_pod<std::uint64_t>(in, path);
  if (version != 1)
    throw DataError("unsupported weights format version: " +
                    std::to_string(version));
  ModelDims dims;
  dims.d_raw = read_pod<std::int64_t>(in, path);
  dims.d_roi = read_pod<std::int64_t>(in, path);
  dims.d_st = read_pod<std::int64_t>(in, path);
  dims.heads = static_cast<int>(read_pod<std::int64_t>(in, path));
  if (!dims.valid()) throw DataError("weights header has invalid dims");
  ModelParams params = make_zero_params(dims);
  auto refs = tensor_refs(params);
  const auto count = read_pod<std::uint64_t>(in, path);
  if (count != refs.size())
    throw DataError("weights file tensor count mismatch");
  for (TensorRef& t : refs) {
    const auto name_len = read_pod<std::uint64_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in || name != t.name)
      throw DataError("weights tensor order mismatch: expected " + t.name);
    const auto rows = read_pod<std::int64_t>(in, path);
    const auto cols = read_pod<std::int64_t>(in, path);
    if (rows != t.rows || cols != t.cols)
      throw DataError("weights tensor shape mismatch for " + t.name);
    for (Index r = 0; r < t.rows; ++r)
      for (Index c = 0; c < t.cols; ++c)
        t.data[c * t.rows + r] = read_pod<double>(in, path);
  }
  return params;
}

}  // namespace mtmc
