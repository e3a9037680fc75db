#include "mtmc/assoc.hpp"

#include "mtmc/features.hpp"

#include <algorithm>
#include <cmath>

namespace mtmc {

FramePartition FramePartition::build(std::span<const FrameRef> cols) {
  FramePartition part;
  part.frame_of.resize(cols.size());
  std::vector<FrameRef> uniq(cols.begin(), cols.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  part.frames = uniq;
  part.members.resize(uniq.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto it = std::lower_bound(uniq.begin(), uniq.end(), cols[c]);
    const auto slot = static_cast<std::size_t>(it - uniq.begin());
    part.frame_of[c] = static_cast<Index>(slot);
    part.members[slot].push_back(static_cast<Index>(c));
  }
  return part;
}

MatX row_softmax(const MatX& scores) {
  MatX out(scores.rows(), scores.cols());
  for (Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    VecX e = (scores.row(r).array() - m).exp().matrix().transpose();
    out.row(r) = (e / e.sum()).transpose();
  }
  return out;
}

MatX layer_norm_forward(const MatX& x, const LayerNormParams& p,
                        LayerNormTape* tape) {
  if (x.cols() != p.gamma.size())
    throw DataError("layer_norm_forward: width mismatch");
  const auto d = static_cast<double>(x.cols());
  MatX xhat(x.rows(), x.cols());
  VecX inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / d;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * is;
    inv_std(r) = is;
  }
  MatX y = (xhat.array().rowwise() * p.gamma.transpose().array()).matrix();
  y.rowwise() += p.beta.transpose();
  if (tape) {
    tape->xhat = std::move(xhat);
    tape->inv_std = std::move(inv_std);
  }
  return y;
}

MatX attention_forward(const MatX& q_in, const MatX& kv_in,
                       const AttentionParams& p, int heads,
                       AttentionTape* tape) {
  const Index d = p.Wq.rows();
  if (q_in.cols() != d || kv_in.cols() != d)
    throw DataError("attention_forward: width mismatch");
  if (heads <= 0 || d % heads != 0)
    throw DataError("attention_forward: model dim not divisible by heads");
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MatX q = (q_in * p.Wq).rowwise() + p.bq.transpose();
  MatX k = (kv_in * p.Wk).rowwise() + p.bk.transpose();
  MatX v = (kv_in * p.Wv).rowwise() + p.bv.transpose();

  MatX concat(q_in.rows(), d);
  std::vector<MatX> attn(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Index off = h * dh;
    const MatX s = q.middleCols(off, dh) * k.middleCols(off, dh).transpose();
    MatX a = row_softmax(s * scale);
    concat.middleCols(off, dh) = a * v.middleCols(off, dh);
    attn[static_cast<std::size_t>(h)] = std::move(a);
  }
  MatX out = (concat * p.Wo).rowwise() + p.bo.transpose();
  if (tape) {
    tape->q = std::move(q);
    tape->k = std::move(k);
    tape->v = std::move(v);
    tape->attn = std::move(attn);
    tape->concat = std::move(concat);
  }
  return out;
}

MatX mlp_forward_tape(const MatX& x, const MlpParams& m, FfnTape& tape) {
  tape.input = x;
  tape.pre = affine_forward(x, m.l1);
  tape.act = tape.pre.cwiseMax(0.0);
  return affine_forward(tape.act, m.l2);
}

namespace {

MatX ffn_forward(const MatX& x, const FeedForwardParams& p, FfnTape* tape) {
  if (tape) return mlp_forward_tape(x, p, *tape);
  return mlp_forward(x, p);
}

}  // namespace

MatX encoder_forward(const MatX& f, const AssocModelParams& p,
                     EncoderTape* tape) {
  if (f.rows() < 1) throw DataError("encoder_forward: empty input");
  AttentionTape at;
  const MatX a =
      attention_forward(f, f, p.encoder.self_attn, p.heads, tape ? &at : nullptr);
  MatX r1 = f + a;
  LayerNormTape ln1;
  MatX z = layer_norm_forward(r1, p.encoder.ln1, tape ? &ln1 : nullptr);
  FfnTape ft;
  const MatX ff = ffn_forward(z, p.encoder.ffn, tape ? &ft : nullptr);
  MatX r2 = z + ff;
  LayerNormTape ln2;
  MatX out = layer_norm_forward(r2, p.encoder.ln2, tape ? &ln2 : nullptr);
  if (tape) {
    tape->x = f;
    tape->attn = std::move(at);
    tape->r1 = std::move(r1);
    tape->ln1 = std::move(ln1);
    tape->z = std::move(z);
    tape->ffn = std::move(ft);
    tape->r2 = std::move(r2);
    tape->ln2 = std::move(ln2);
  }
  return out;
}

MatX decoder_forward(const MatX& q, const MatX& f_e, const AssocModelParams& p,
                     DecoderTape* tape) {
  if (q.rows() < 1 || f_e.rows() < 1)
    throw DataError("decoder_forward: empty input");
  AttentionTape sat;
  const MatX a1 = attention_forward(q, q, p.decoder.self_attn, p.heads,
                                    tape ? &sat : nullptr);
  MatX r1 = q + a1;
  LayerNormTape ln1;
  MatX z1 = layer_norm_forward(r1, p.decoder.ln1, tape ? &ln1 : nullptr);
  AttentionTape cat;
  const MatX a2 = attention_forward(z1, f_e, p.decoder.cross_attn, p.heads,
                                    tape ? &cat : nullptr);
  MatX r2 = z1 + a2;
  LayerNormTape ln2;
  MatX z2 = layer_norm_forward(r2, p.decoder.ln2, tape ? &ln2 : nullptr);
  FfnTape ft;
  const MatX ff = ffn_forward(z2, p.decoder.ffn, tape ? &ft : nullptr);
  MatX r3 = z2 + ff;
  LayerNormTape ln3;
  MatX out = layer_norm_forward(r3, p.decoder.ln3, tape ? &ln3 : nullptr);
  if (tape) {
    tape->q0 = q;
    tape->self_attn = std::move(sat);
    tape->r1 = std::move(r1);
    tape->ln1 = std::move(ln1);
    tape->z1 = std::move(z1);
    tape->cross = std::move(cat);
    tape->r2 = std::move(r2);
    tape->ln2 = std::move(ln2);
    tape->z2 = std::move(z2);
    tape->ffn = std::move(ft);
    tape->r3 = std::move(r3);
    tape->ln3 = std::move(ln3);
  }
  return out;
}

SimilarityMatrix similarity(const MatX& q_d, const MatX& f_e,
                            std::vector<FrameRef> col_frames,
                            std::vector<std::optional<std::int64_t>>
                                row_labels) {
  if (q_d.cols() != f_e.cols())
    throw DataError("similarity: inner dimensions differ");
  if (static_cast<Index>(col_frames.size()) != f_e.rows())
    throw DataError("similarity: column metadata length mismatch");
  SimilarityMatrix g;
  g.G = q_d * f_e.transpose();
  g.col_frames = std::move(col_frames);
  g.row_labels = std::move(row_labels);
  return g;
}

AssocProbs per_frame_softmax(const SimilarityMatrix& g) {
  AssocProbs probs;
  probs.partition = FramePartition::build(g.col_frames);
  const Index nq = g.G.rows();
  const Index nf = probs.partition.frame_count();
  probs.H.resize(nq, g.G.cols());
  probs.null_prob.resize(nq, nf);
  for (Index i = 0; i < nq; ++i) {
    for (Index f = 0; f < nf; ++f) {
      const auto& cols = probs.partition.members[static_cast<std::size_t>(f)];
      double m = 0.0;  // the null score participates in the max
      for (const Index j : cols) m = std::max(m, g.G(i, j));
      double denom = std::exp(-m);
      for (const Index j : cols) denom += std::exp(g.G(i, j) - m);
      for (const Index j : cols)
        probs.H(i, j) = std::exp(g.G(i, j) - m) / denom;
      probs.null_prob(i, f) = std::exp(-m) / denom;
    }
  }
  return probs;
}

GtAssoc build_gt_association(
    std::span<const std::optional<std::int64_t>> labels,
    std::span<const FrameRef> col_frames) {
  if (labels.size() != col_frames.size())
    throw DataError("build_gt_association: labels/metadata length mismatch");
  GtAssoc gt;
  gt.partition = FramePartition::build(col_frames);
  const auto n = static_cast<Index>(labels.size());
  const Index nf = gt.partition.frame_count();
  gt.X = MatX::Zero(n, n);
  gt.x0 = MatX::Zero(n, nf);
  gt.labeled.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    if (!labels[static_cast<std::size_t>(i)]) continue;
    gt.labeled[static_cast<std::size_t>(i)] = 1;
    ++gt.n_labeled;
    for (Index j = 0; j < n; ++j) {
      if (labels[static_cast<std::size_t>(j)] &&
          *labels[static_cast<std::size_t>(i)] ==
              *labels[static_cast<std::size_t>(j)])
        gt.X(i, j) = 1.0;
    }
    for (Index f = 0; f < nf; ++f) {
      double in_frame = 0.0;
      for (const Index j : gt.partition.members[static_cast<std::size_t>(f)])
        in_frame += gt.X(i, j);
      gt.x0(i, f) = in_frame > 0.0 ? 0.0 : 1.0;
    }
  }
  return gt;
}

LossBreakdown association_loss(const AssocProbs& probs, const GtAssoc& gt) {
  if (probs.H.rows() != gt.X.rows() || probs.H.cols() != gt.X.cols())
    throw DataError("association_loss: shape mismatch");
  LossBreakdown out;
  const Index nf = probs.partition.frame_count();
  if (gt.n_labeled == 0) {
    for (Index f = 0; f < nf; ++f)
      out.per_frame.emplace_back(
          probs.partition.frames[static_cast<std::size_t>(f)], 0.0);
    return out;
  }
  const double inv_n = 1.0 / static_cast<double>(gt.n_labeled);
  for (Index f = 0; f < nf; ++f) {
    double acc = 0.0;
    const auto& cols = probs.partition.members[static_cast<std::size_t>(f)];
    for (Index i = 0; i < probs.H.rows(); ++i) {
      if (!gt.labeled[static_cast<std::size_t>(i)]) continue;
      for (const Index j : cols) {
        if (gt.X(i, j) != 0.0)
          acc += std::log(std::max(probs.H(i, j), kLogClamp));
      }
      if (gt.x0(i, f) != 0.0)
        acc += std::log(std::max(probs.null_prob(i, f), kLogClamp));
    }
    const double frame_loss = -inv_n * acc;
    out.per_frame.emplace_back(
        probs.partition.frames[static_cast<std::size_t>(f)], frame_loss);
    out.total += frame_loss;
  }
  return out;
}

TrainingForward forward_training(
    const MatX& f, const AssocModelParams& params,
    std::span<const FrameRef> frames,
    std::span<const std::optional<std::int64_t>> labels) {
  if (static_cast<Index>(frames.size()) != f.rows())
    throw DataError("forward_training: frame metadata length mismatch");
  TrainingForward fw;
  fw.f_e = encoder_forward(f, params, &fw.enc_tape);
  fw.q_d = decoder_forward(f, fw.f_e, params, &fw.dec_tape);
  fw.g = similarity(fw.q_d, fw.f_e, {frames.begin(), frames.end()},
                    {labels.begin(), labels.end()});
  fw.probs = per_frame_softmax(fw.g);
  return fw;
}

}  // namespace mtmc
