#pragma once

#include "mtmc/assoc.hpp"
#include "mtmc/params.hpp"
#include "mtmc/types.hpp"

#include <span>

namespace mtmc {

/// One training window: raw inputs plus per-target metadata, rows aligned.
struct TrainingBatch {
  MatX app;  // N × d_raw
  MatX st;   // N × 6
  std::vector<FrameRef> frames;
  std::vector<std::optional<std::int64_t>> labels;

  Index size() const { return app.rows(); }
};

/// Assembles a batch from observations and their IoU-assigned labels.
TrainingBatch make_batch(std::span<const TargetObs> obs,
                         std::span<const std::optional<std::int64_t>> labels,
                         const SceneDims& dims);

/// ∂L/∂G of the association loss fused through the per-frame softmax:
/// (1/N)·(S_i·H_iq − X_iq) with S_i = Σ_j X_ij + x_i0 per (row, frame);
/// unlabeled rows contribute zero.
MatX loss_grad_wrt_g(const AssocProbs& probs, const GtAssoc& gt);

/// Forward-only loss of the full pipeline (feature encoders + association
/// model) on one batch; arithmetic identical to the gradient path.
LossBreakdown loss_value(const TrainingBatch& batch, const ModelParams& params);

/// Analytic reverse-mode gradients of the total loss with respect to every
/// learnable value. `grads` is reset to zeros of matching shape and filled.
/// Returns the loss breakdown of the forward pass.
LossBreakdown loss_gradients(const TrainingBatch& batch,
                             const ModelParams& params, ModelParams& grads);

}  // namespace mtmc
