#pragma once

#include <filesystem>
#include <ostream>

namespace mtmc {

/// Generates the configured scenario and writes `gt.csv` and
/// `detections.csv` under `out_dir` (created if missing). Byte-identical
/// across reruns with the same config.
void cmd_simulate(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_dir);

/// Trains the association model on the configured scenario; writes the
/// weights to `weights_out` and the loss curve to `<weights_out>.losses.csv`.
void cmd_train(const std::filesystem::path& config_path,
               const std::filesystem::path& weights_out);

/// Runs the online tracker over a detection track file and writes the
/// finalized trajectories. Appearance embeddings are recovered by re-rendering
/// the configured scenario and joining on (camera, frame, box).
void cmd_track(const std::filesystem::path& weights_path,
               const std::filesystem::path& detections_path,
               const std::filesystem::path& config_path,
               const std::filesystem::path& out_path);

/// Prints the metric report: machine-readable key=value block, blank line,
/// aligned table.
void cmd_evaluate(const std::filesystem::path& gt_path,
                  const std::filesystem::path& pred_path, std::ostream& out);

/// Runs the built-in oracle suites (Hungarian brute force, gradient checks,
/// softmax normalization, metric enumeration); prints one status line per
/// suite. Returns true when every suite passed. The environment variable
/// MTMC_SELFTEST_FAULT=gradient injects a wrong gradient so harnesses can
/// verify fault isolation.
bool cmd_selftest(std::ostream& out);

}  // namespace mtmc
