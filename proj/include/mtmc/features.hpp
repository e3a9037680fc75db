#pragma once

#include "mtmc/params.hpp"
#include "mtmc/types.hpp"

#include <span>

namespace mtmc {

/// Y = X·W + 1·bᵀ, rows are samples.
MatX affine_forward(const MatX& x, const AffineParams& a);

/// Two affine layers with elementwise rectification between them.
MatX mlp_forward(const MatX& x, const MlpParams& m);

/// Normalized spatio-temporal 6-vector (x1/w, y1/h, x2/w, y2/h, t/T, c/C).
VecX spatiotemporal_feature(const TargetObs& obs, const SceneDims& dims);

/// Appearance encoding H_roi(raw); raw length d_raw, output length D_roi.
VecX encode_app(const VecX& raw, const EncoderParams& params);

/// Spatio-temporal encoding H_st(st); input length 6, output length D_st.
VecX encode_st(const VecX& st, const EncoderParams& params);

/// Concatenation (appearance part first); length D = D_roi + D_st.
VecX fuse(const VecX& app_enc, const VecX& st_enc);

/// Full feature path for one observation: fuse(H_roi(app), H_st(st)).
VecX fused_feature(const TargetObs& obs, const SceneDims& dims,
                   const EncoderParams& params);

/// Row-stacked fused features of a batch of observations.
MatX fused_feature_matrix(std::span<const TargetObs> obs,
                          const SceneDims& dims, const EncoderParams& params);

}  // namespace mtmc
