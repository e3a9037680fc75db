#pragma once

#include "mtmc/params.hpp"
#include "mtmc/types.hpp"

#include <span>

namespace mtmc {

/// Grouping of column targets by their (camera, time) frame.
struct FramePartition {
  std::vector<FrameRef> frames;             // unique, sorted by (time, camera)
  std::vector<std::vector<Index>> members;  // column indices per frame
  std::vector<Index> frame_of;              // column index → frame slot

  Index frame_count() const { return static_cast<Index>(frames.size()); }
  static FramePartition build(std::span<const FrameRef> cols);
};

/// Raw association scores G = Q_d · F_eᵀ plus metadata.
struct SimilarityMatrix {
  MatX G;  // N_q × N
  std::vector<FrameRef> col_frames;
  std::vector<std::optional<std::int64_t>> row_labels;
};

/// Per-frame association probabilities (null score fixed at 0).
struct AssocProbs {
  MatX H;          // N_q × N
  MatX null_prob;  // N_q × frame_count
  FramePartition partition;
};

/// Ground-truth association targets. Unlabeled rows carry no loss.
struct GtAssoc {
  MatX X;                    // N × N, binary
  MatX x0;                   // N × frame_count, binary
  std::vector<char> labeled;
  Index n_labeled = 0;       // the loss normalizer: count of labeled rows
  FramePartition partition;
};

// ---- forward tapes (inputs/activations the backward pass replays) ----

struct LayerNormTape {
  MatX xhat;
  VecX inv_std;
};

struct AttentionTape {
  MatX q, k, v;              // post-projection
  std::vector<MatX> attn;    // per-head softmax weights, N_q × N
  MatX concat;               // head outputs side by side, pre-output-projection
};

struct FfnTape {
  MatX input, pre, act;
};

struct EncoderTape {
  MatX x;
  AttentionTape attn;
  MatX r1;
  LayerNormTape ln1;
  MatX z;
  FfnTape ffn;
  MatX r2;
  LayerNormTape ln2;
};

struct DecoderTape {
  MatX q0;
  AttentionTape self_attn;
  MatX r1;
  LayerNormTape ln1;
  MatX z1;
  AttentionTape cross;
  MatX r2;
  LayerNormTape ln2;
  MatX z2;
  FfnTape ffn;
  MatX r3;
  LayerNormTape ln3;
};

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kLogClamp = 1e-12;

/// Numerically stable softmax over each row.
MatX row_softmax(const MatX& scores);

/// Two affine layers with rectification, recording the activations the
/// backward pass needs.
MatX mlp_forward_tape(const MatX& x, const MlpParams& m, FfnTape& tape);

/// Per-row layer normalization with learned gain/offset.
MatX layer_norm_forward(const MatX& x, const LayerNormParams& p,
                        LayerNormTape* tape = nullptr);

/// Multi-head scaled dot-product attention; queries from `q_in`, keys and
/// values from `kv_in`.
MatX attention_forward(const MatX& q_in, const MatX& kv_in,
                       const AttentionParams& p, int heads,
                       AttentionTape* tape = nullptr);

/// Post-norm encoder layer (self-attention + feed-forward).
MatX encoder_forward(const MatX& f, const AssocModelParams& p,
                     EncoderTape* tape = nullptr);

/// Post-norm decoder layer (self-attention, cross-attention, feed-forward).
MatX decoder_forward(const MatX& q, const MatX& f_e, const AssocModelParams& p,
                     DecoderTape* tape = nullptr);

/// G = Q_d · F_eᵀ with attached metadata; no scaling.
SimilarityMatrix similarity(const MatX& q_d, const MatX& f_e,
                            std::vector<FrameRef> col_frames,
                            std::vector<std::optional<std::int64_t>>
                                row_labels = {});

/// Per (query, frame) softmax with constant null score 0,
/// max-subtracted for stability (the null score participates in the max).
AssocProbs per_frame_softmax(const SimilarityMatrix& g);

/// Ground-truth association from per-target labels (training uses Q = F, so
/// labels serve rows and columns alike).
GtAssoc build_gt_association(
    std::span<const std::optional<std::int64_t>> labels,
    std::span<const FrameRef> col_frames);

struct LossBreakdown {
  double total = 0.0;
  std::vector<std::pair<FrameRef, double>> per_frame;
};

/// Association cross-entropy; logs clamped at kLogClamp.
LossBreakdown association_loss(const AssocProbs& probs, const GtAssoc& gt);

/// Everything one training forward pass produces.
struct TrainingForward {
  MatX f_e;
  MatX q_d;
  SimilarityMatrix g;
  AssocProbs probs;
  EncoderTape enc_tape;
  DecoderTape dec_tape;
};

/// Composes encoder, decoder (Q = F), similarity, and per-frame softmax.
TrainingForward forward_training(
    const MatX& f, const AssocModelParams& params,
    std::span<const FrameRef> frames,
    std::span<const std::optional<std::int64_t>> labels);

}  // namespace mtmc
