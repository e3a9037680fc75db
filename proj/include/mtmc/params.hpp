#pragma once

#include "mtmc/rng.hpp"
#include "mtmc/types.hpp"

#include <string>

namespace mtmc {

/// One affine map Y = X·W + 1·bᵀ with W: in × out.
struct AffineParams {
  MatX W;
  VecX b;

  static AffineParams zeros(Index in, Index out) {
    return {MatX::Zero(in, out), VecX::Zero(out)};
  }
};

/// Two affine layers with a rectifier between them.
struct MlpParams {
  AffineParams l1;
  AffineParams l2;
};

/// Per-feature gain/offset of a layer normalization.
struct LayerNormParams {
  VecX gamma;
  VecX beta;

  static LayerNormParams identity(Index d) {
    return {VecX::Ones(d), VecX::Zero(d)};
  }
};

/// Multi-head attention projections; the H per-head D×(D/H) projections are
/// packed side by side into D×D matrices.
struct AttentionParams {
  MatX Wq, Wk, Wv, Wo;
  VecX bq, bk, bv, bo;
};

/// Position-wise feed-forward block D → D_ff → D; same two-affine shape
/// family as the feature encoders.
using FeedForwardParams = MlpParams;

/// Post-norm encoder layer: LN2(Z + FFN(Z)), Z = LN1(X + SelfAttn(X)).
struct EncoderLayerParams {
  AttentionParams self_attn;
  LayerNormParams ln1;
  FeedForwardParams ffn;
  LayerNormParams ln2;
};

/// Post-norm decoder layer: self-attention, cross-attention, feed-forward,
/// each with residual + layer norm.
struct DecoderLayerParams {
  AttentionParams self_attn;
  LayerNormParams ln1;
  AttentionParams cross_attn;
  LayerNormParams ln2;
  FeedForwardParams ffn;
  LayerNormParams ln3;
};

/// The association transformer: one encoder layer and one decoder layer.
struct AssocModelParams {
  EncoderLayerParams encoder;
  DecoderLayerParams decoder;
  int heads = 8;
};

/// The two feature encoders of the features module.
struct EncoderParams {
  MlpParams app;  // d_raw → D_roi
  MlpParams st;   // 6 → D_st
};

/// Model width configuration. The encoder hidden layers reuse their output
/// widths; the feed-forward hidden width is 4·D.
struct ModelDims {
  Index d_raw = 32;
  Index d_roi = 64;
  Index d_st = 8;
  int heads = 8;

  Index d_model() const { return d_roi + d_st; }
  Index d_ff() const { return 4 * d_model(); }
  bool valid() const {
    return d_raw > 0 && d_roi > 0 && d_st >= 0 && heads > 0 &&
           d_model() % heads == 0;
  }
};

/// Every learnable value of the artifact.
struct ModelParams {
  ModelDims dims;
  EncoderParams enc;
  AssocModelParams assoc;
};

/// Named view over one parameter tensor's storage, used for initialization,
/// finite differences, gradient-descent updates, and serialization. Eigen
/// stores column-major; `data` walks that order.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
};

/// Canonical traversal of all tensors in `p`, in a fixed documented order.
/// Two structurally equal ModelParams yield name-aligned lists; gradients are
/// stored in a second ModelParams and traversed with the same function.
std::vector<TensorRef> tensor_refs(ModelParams& p);

/// Structure with the given dims, all values zero.
ModelParams make_zero_params(const ModelDims& dims);

/// Seeded initialization: affine/attention weights and biases uniform in
/// [−1/√fan_in, +1/√fan_in]; layer-norm gains 1 and offsets 0, except the two
/// output-facing norms (encoder.ln2, decoder.ln3) whose gains start at 1/√D
/// so the initial similarities stay O(1). Tensors are filled in tensor_refs
/// order, elementwise in storage order.
ModelParams make_initialized_params(const ModelDims& dims,
                                    std::uint64_t seed);

}  // namespace mtmc
