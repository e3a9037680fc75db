#include "mtmc/features.hpp"

namespace mtmc {

MatX affine_forward(const MatX& x, const AffineParams& a) {
  if (x.cols() != a.W.rows())
    throw DataError("affine_forward: input width does not match weights");
  return (x * a.W).rowwise() + a.b.transpose();
}

MatX mlp_forward(const MatX& x, const MlpParams& m) {
  return affine_forward(affine_forward(x, m.l1).cwiseMax(0.0), m.l2);
}

VecX spatiotemporal_feature(const TargetObs& obs, const SceneDims& dims) {
  if (!dims.valid())
    throw DataError("spatiotemporal_feature: invalid scene dims");
  if (obs.frame.time < 1 || obs.frame.time > dims.horizon ||
      obs.frame.camera < 1 || obs.frame.camera > dims.cameras)
    throw DataError("spatiotemporal_feature: frame indices outside dims");
  VecX st(6);
  st << obs.box.x1 / dims.width, obs.box.y1 / dims.height,
      obs.box.x2 / dims.width, obs.box.y2 / dims.height,
      static_cast<double>(obs.frame.time) / dims.horizon,
      static_cast<double>(obs.frame.camera) / dims.cameras;
  return st;
}

VecX encode_app(const VecX& raw, const EncoderParams& params) {
  return mlp_forward(raw.transpose(), params.app).transpose();
}

VecX encode_st(const VecX& st, const EncoderParams& params) {
  if (st.size() != 6) throw DataError("encode_st: input length must be 6");
  return mlp_forward(st.transpose(), params.st).transpose();
}

VecX fuse(const VecX& app_enc, const VecX& st_enc) {
  VecX f(app_enc.size() + st_enc.size());
  f << app_enc, st_enc;
  return f;
}

VecX fused_feature(const TargetObs& obs, const SceneDims& dims,
                   const EncoderParams& params) {
  return fuse(encode_app(obs.app, params),
              encode_st(spatiotemporal_feature(obs, dims), params));
}

MatX fused_feature_matrix(std::span<const TargetObs> obs,
                          const SceneDims& dims, const EncoderParams& params) {
  const Index d =
      params.app.l2.W.cols() + params.st.l2.W.cols();
  MatX f(static_cast<Index>(obs.size()), d);
  for (std::size_t i = 0; i < obs.size(); ++i)
    f.row(static_cast<Index>(i)) =
        fused_feature(obs[i], dims, params).transpose();
  return f;
}

}  // namespace mtmc
