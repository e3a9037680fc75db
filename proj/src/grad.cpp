#include "mtmc/grad.hpp"

#include "mtmc/features.hpp"

#include <cmath>

namespace mtmc {

namespace {

// Per-row softmax Jacobian product: given the softmax output a and upstream
// da, returns d(scores).
MatX softmax_rows_backward(const MatX& a, const MatX& da) {
  MatX ds(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const double dot = (da.row(r).array() * a.row(r).array()).sum();
    ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
  }
  return ds;
}

MatX layer_norm_backward(const MatX& dy, const LayerNormTape& t,
                         const LayerNormParams& p, LayerNormParams& g) {
  const Index d = dy.cols();
  g.gamma += (dy.array() * t.xhat.array()).colwise().sum().matrix().transpose();
  g.beta += dy.colwise().sum().transpose();
  const MatX dxhat =
      (dy.array().rowwise() * p.gamma.transpose().array()).matrix();
  MatX dx(dy.rows(), d);
  const auto dd = static_cast<double>(d);
  for (Index r = 0; r < dy.rows(); ++r) {
    const double s1 = dxhat.row(r).sum();
    const double s2 = (dxhat.row(r).array() * t.xhat.row(r).array()).sum();
    dx.row(r) = (t.inv_std(r) / dd) *
                (dd * dxhat.row(r).array() - s1 - t.xhat.row(r).array() * s2);
  }
  return dx;
}

// Backward of affine → relu → affine; accumulates into g and returns dInput.
MatX mlp_backward(const MatX& d_out, const FfnTape& t, const MlpParams& p,
                  MlpParams& g) {
  g.l2.W += t.act.transpose() * d_out;
  g.l2.b += d_out.colwise().sum().transpose();
  const MatX d_act = d_out * p.l2.W.transpose();
  const MatX d_pre =
      (d_act.array() * (t.pre.array() > 0.0).cast<double>()).matrix();
  g.l1.W += t.input.transpose() * d_pre;
  g.l1.b += d_pre.colwise().sum().transpose();
  return d_pre * p.l1.W.transpose();
}

// Returns (d q_in, d kv_in); accumulates parameter gradients into g.
std::pair<MatX, MatX> attention_backward(const MatX& d_out,
                                         const AttentionTape& t,
                                         const MatX& q_in, const MatX& kv_in,
                                         const AttentionParams& p, int heads,
                                         AttentionParams& g) {
  const Index d = p.Wq.rows();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g.Wo += t.concat.transpose() * d_out;
  g.bo += d_out.colwise().sum().transpose();
  const MatX d_concat = d_out * p.Wo.transpose();

  MatX dq = MatX::Zero(t.q.rows(), d);
  MatX dk = MatX::Zero(t.k.rows(), d);
  MatX dv = MatX::Zero(t.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Index off = h * dh;
    const MatX& a = t.attn[static_cast<std::size_t>(h)];
    const MatX d_head = d_concat.middleCols(off, dh);
    const MatX da = d_head * t.v.middleCols(off, dh).transpose();
    dv.middleCols(off, dh) = a.transpose() * d_head;
    const MatX ds = softmax_rows_backward(a, da) * scale;
    dq.middleCols(off, dh) = ds * t.k.middleCols(off, dh);
    dk.middleCols(off, dh) = ds.transpose() * t.q.middleCols(off, dh);
  }
  g.Wq += q_in.transpose() * dq;
  g.bq += dq.colwise().sum().transpose();
  g.Wk += kv_in.transpose() * dk;
  g.bk += dk.colwise().sum().transpose();
  g.Wv += kv_in.transpose() * dv;
  g.bv += dv.colwise().sum().transpose();
  return {dq * p.Wq.transpose(), dk * p.Wk.transpose() + dv * p.Wv.transpose()};
}

MatX encoder_backward(const MatX& d_out, const EncoderTape& t,
                      const AssocModelParams& p, AssocModelParams& g) {
  const MatX dr2 = layer_norm_backward(d_out, t.ln2, p.encoder.ln2,
                                       g.encoder.ln2);
  MatX dz = dr2;
  dz += mlp_backward(dr2, t.ffn, p.encoder.ffn, g.encoder.ffn);
  const MatX dr1 = layer_norm_backward(dz, t.ln1, p.encoder.ln1,
                                       g.encoder.ln1);
  auto [dq_in, dkv_in] = attention_backward(dr1, t.attn, t.x, t.x,
                                            p.encoder.self_attn, p.heads,
                                            g.encoder.self_attn);
  return dr1 + dq_in + dkv_in;
}

// Returns (dQ0, dF_e from the cross-attention path).
std::pair<MatX, MatX> decoder_backward(const MatX& d_out, const DecoderTape& t,
                                       const MatX& f_e,
                                       const AssocModelParams& p,
                                       AssocModelParams& g) {
  const MatX dr3 = layer_norm_backward(d_out, t.ln3, p.decoder.ln3,
                                       g.decoder.ln3);
  MatX dz2 = dr3;
  dz2 += mlp_backward(dr3, t.ffn, p.decoder.ffn, g.decoder.ffn);
  const MatX dr2 = layer_norm_backward(dz2, t.ln2, p.decoder.ln2,
                                       g.decoder.ln2);
  auto [dz1_attn, dfe] = attention_backward(dr2, t.cross, t.z1, f_e,
                                            p.decoder.cross_attn, p.heads,
                                            g.decoder.cross_attn);
  const MatX dz1 = dr2 + dz1_attn;
  const MatX dr1 = layer_norm_backward(dz1, t.ln1, p.decoder.ln1,
                                       g.decoder.ln1);
  auto [dq, dkv] = attention_backward(dr1, t.self_attn, t.q0, t.q0,
                                      p.decoder.self_attn, p.heads,
                                      g.decoder.self_attn);
  return {dr1 + dq + dkv, std::move(dfe)};
}

}  // namespace

TrainingBatch make_batch(std::span<const TargetObs> obs,
                         std::span<const std::optional<std::int64_t>> labels,
                         const SceneDims& dims) {
  if (obs.empty()) throw DataError("make_batch: empty batch");
  if (labels.size() != obs.size())
    throw DataError("make_batch: labels length mismatch");
  const Index d_raw = obs[0].app.size();
  TrainingBatch b;
  b.app.resize(static_cast<Index>(obs.size()), d_raw);
  b.st.resize(static_cast<Index>(obs.size()), 6);
  b.frames.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].app.size() != d_raw)
      throw DataError("make_batch: inconsistent appearance lengths");
    b.app.row(static_cast<Index>(i)) = obs[i].app.transpose();
    b.st.row(static_cast<Index>(i)) =
        spatiotemporal_feature(obs[i], dims).transpose();
    b.frames.push_back(obs[i].frame);
  }
  b.labels.assign(labels.begin(), labels.end());
  return b;
}

MatX loss_grad_wrt_g(const AssocProbs& probs, const GtAssoc& gt) {
  MatX dg = MatX::Zero(probs.H.rows(), probs.H.cols());
  if (gt.n_labeled == 0) return dg;
  const double inv_n = 1.0 / static_cast<double>(gt.n_labeled);
  for (Index i = 0; i < probs.H.rows(); ++i) {
    if (!gt.labeled[static_cast<std::size_t>(i)]) continue;
    for (Index f = 0; f < probs.partition.frame_count(); ++f) {
      const auto& cols = probs.partition.members[static_cast<std::size_t>(f)];
      double s = gt.x0(i, f);
      for (const Index j : cols) s += gt.X(i, j);
      for (const Index j : cols)
        dg(i, j) = inv_n * (s * probs.H(i, j) - gt.X(i, j));
    }
  }
  return dg;
}

LossBreakdown loss_value(const TrainingBatch& batch,
                         const ModelParams& params) {
  const MatX app_out = mlp_forward(batch.app, params.enc.app);
  const MatX st_out = mlp_forward(batch.st, params.enc.st);
  MatX f(batch.size(), app_out.cols() + st_out.cols());
  f << app_out, st_out;
  const TrainingForward fw =
      forward_training(f, params.assoc, batch.frames, batch.labels);
  const GtAssoc gt = build_gt_association(batch.labels, batch.frames);
  return association_loss(fw.probs, gt);
}

LossBreakdown loss_gradients(const TrainingBatch& batch,
                             const ModelParams& params, ModelParams& grads) {
  grads = make_zero_params(params.dims);

  FfnTape app_tape, st_tape;
  const MatX app_out = mlp_forward_tape(batch.app, params.enc.app, app_tape);
  const MatX st_out = mlp_forward_tape(batch.st, params.enc.st, st_tape);
  MatX f(batch.size(), app_out.cols() + st_out.cols());
  f << app_out, st_out;

  const TrainingForward fw =
      forward_training(f, params.assoc, batch.frames, batch.labels);
  const GtAssoc gt = build_gt_association(batch.labels, batch.frames);
  const LossBreakdown lb = association_loss(fw.probs, gt);
  if (!std::isfinite(lb.total))
    throw DataError("loss_gradients: non-finite loss");

  const MatX dg = loss_grad_wrt_g(fw.probs, gt);
  const MatX dqd = dg * fw.f_e;
  MatX dfe = dg.transpose() * fw.q_d;

  auto [dq0, dfe_cross] =
      decoder_backward(dqd, fw.dec_tape, fw.f_e, params.assoc, grads.assoc);
  dfe += dfe_cross;
  const MatX dx = encoder_backward(dfe, fw.enc_tape, params.assoc,
                                   grads.assoc);
  const MatX df = dq0 + dx;

  const MatX d_app = df.leftCols(params.dims.d_roi);
  const MatX d_st = df.rightCols(params.dims.d_st);
  mlp_backward(d_app, app_tape, params.enc.app, grads.enc.app);
  mlp_backward(d_st, st_tape, params.enc.st, grads.enc.st);
  return lb;
}

}  // namespace mtmc
