#pragma once

#include "mtmc/types.hpp"

#include <optional>
#include <span>

namespace mtmc {

struct EvalConfig {
  double iou_threshold = 0.5;  // detection correspondence gate

  bool valid() const { return iou_threshold > 0.0 && iou_threshold <= 1.0; }
};

/// A box with the id it belongs to, flattened from a trajectory.
struct IdBox {
  std::int64_t id = 0;
  BoxPx box;
};

/// Per (camera, time) correspondence: matched (gt index, pred index, IoU)
/// pairs, plus the unmatched leftovers.
struct FrameMatch {
  std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> unmatched_pred;
};

/// Counters per time step, summed over all cameras (the CVMA error terms).
struct FrameCounters {
  std::vector<std::int64_t> misses;       // m_t
  std::vector<std::int64_t> false_pos;    // fp_t
  std::vector<std::int64_t> mismatches;   // mme_t
  std::vector<std::int64_t> gt_count;     // g_t

  std::int64_t total_misses() const;
  std::int64_t total_false_pos() const;
  std::int64_t total_mismatches() const;
  std::int64_t total_gt() const;
};

struct CvScores {
  std::optional<double> cvma;
  std::optional<double> cvidp;
  std::optional<double> cvidr;
  std::optional<double> cvidf1;
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;
};

/// Maximum-cardinality, then maximum-total-IoU one-to-one matching between
/// the boxes of one (camera, time) frame, restricted to pairs with
/// IoU ≥ config threshold.
FrameMatch match_frame(std::span<const IdBox> gt, std::span<const IdBox> pred,
                       const EvalConfig& config);

/// CVMA = 1 − (Σ_t m_t + fp_t + 2·mme_t) / (Σ_t g_t). A mismatch is
/// counted when a GT identity's matched predicted id differs from its
/// previous counted match anywhere (any camera). Empty GT → cvma unset.
std::pair<std::optional<double>, FrameCounters> cvma(
    std::span<const Trajectory> gt, std::span<const Trajectory> preds,
    int horizon, const EvalConfig& config);

/// CVIDF1/CVIDP/CVIDR via a global identity Hungarian over the
/// match_frame correspondence counts.
CvScores cvidf1(std::span<const Trajectory> gt,
                std::span<const Trajectory> preds, int horizon,
                const EvalConfig& config);

/// Both metric families plus the raw counters.
struct EvalReport {
  CvScores scores;
  FrameCounters counters;
};

EvalReport evaluate_all(std::span<const Trajectory> gt,
                        std::span<const Trajectory> preds, int horizon,
                        const EvalConfig& config);

}  // namespace mtmc
