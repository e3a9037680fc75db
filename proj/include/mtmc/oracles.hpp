#pragma once

#include "mtmc/geometry.hpp"
#include "mtmc/grad.hpp"
#include "mtmc/metrics.hpp"
#include "mtmc/types.hpp"

#include <optional>
#include <span>

namespace mtmc::oracle {

/// Optimal assignment total by exhaustive enumeration over all injective
/// row→column maps of cardinality min(rows, cols), summed in ascending row
/// order. Intended for matrices up to ~8×8.
double brute_force_assignment_max(const MatX& scores);

/// Independent recomputation of the GT↔detection labeling rule: per-GT
/// arg-max IoU gated strictly above the 0.6 threshold, lowest detection
/// index on arg-max ties, detection conflicts resolved to the higher-IoU GT
/// (earlier GT on exact ties).
std::vector<std::optional<std::int64_t>> brute_force_gt_assign(
    std::span<const TargetObs> detections, std::span<const GtBox> gt_boxes);

/// CVMA counters and CVIDF1 identity counts recomputed by exhaustive
/// enumeration: per-frame matchings enumerate every eligible pairing and
/// take the unique (cardinality, total-IoU) optimum (throws DataError when a
/// frame's optimum is not unique — fixtures must avoid ties); the identity
/// pairing enumerates every injective GT-id→pred-id map.
EvalReport enumerate_cv_report(std::span<const Trajectory> gt,
                               std::span<const Trajectory> preds, int horizon,
                               const EvalConfig& config);

/// Max over all learnable coordinates of
/// |analytic − central_difference| / max(|analytic|, |fd|, floor).
double gradient_max_rel_err(const TrainingBatch& batch,
                            const ModelParams& params, double step,
                            double floor = 1e-5);

/// Deterministic random batch for gradient and softmax checks: n targets on
/// random frames, a fraction unlabeled, boxes inside `dims`.
TrainingBatch random_training_batch(Index n, Index d_raw,
                                    const SceneDims& dims, std::uint64_t seed);

}  // namespace mtmc::oracle
