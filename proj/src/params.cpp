#include "mtmc/params.hpp"

#include <cmath>

namespace mtmc {

namespace {

void push_mat(std::vector<TensorRef>& out, const std::string& name, MatX& m) {
  out.push_back({name, m.data(), m.rows(), m.cols()});
}

void push_vec(std::vector<TensorRef>& out, const std::string& name, VecX& v) {
  out.push_back({name, v.data(), v.rows(), 1});
}

void push_affine(std::vector<TensorRef>& out, const std::string& prefix,
                 AffineParams& a) {
  push_mat(out, prefix + ".W", a.W);
  push_vec(out, prefix + ".b", a.b);
}

void push_mlp(std::vector<TensorRef>& out, const std::string& prefix,
              MlpParams& m) {
  push_affine(out, prefix + ".l1", m.l1);
  push_affine(out, prefix + ".l2", m.l2);
}

void push_ln(std::vector<TensorRef>& out, const std::string& prefix,
             LayerNormParams& ln) {
  push_vec(out, prefix + ".gamma", ln.gamma);
  push_vec(out, prefix + ".beta", ln.beta);
}

void push_attn(std::vector<TensorRef>& out, const std::string& prefix,
               AttentionParams& a) {
  push_mat(out, prefix + ".Wq", a.Wq);
  push_vec(out, prefix + ".bq", a.bq);
  push_mat(out, prefix + ".Wk", a.Wk);
  push_vec(out, prefix + ".bk", a.bk);
  push_mat(out, prefix + ".Wv", a.Wv);
  push_vec(out, prefix + ".bv", a.bv);
  push_mat(out, prefix + ".Wo", a.Wo);
  push_vec(out, prefix + ".bo", a.bo);
}

void push_ffn(std::vector<TensorRef>& out, const std::string& prefix,
              FeedForwardParams& f) {
  push_affine(out, prefix + ".l1", f.l1);
  push_affine(out, prefix + ".l2", f.l2);
}

AttentionParams zero_attn(Index d) {
  return {MatX::Zero(d, d), MatX::Zero(d, d), MatX::Zero(d, d),
          MatX::Zero(d, d), VecX::Zero(d),    VecX::Zero(d),
          VecX::Zero(d),    VecX::Zero(d)};
}

}  // namespace

std::vector<TensorRef> tensor_refs(ModelParams& p) {
  std::vector<TensorRef> out;
  push_mlp(out, "enc_app", p.enc.app);
  push_mlp(out, "enc_st", p.enc.st);
  push_attn(out, "encoder.self_attn", p.assoc.encoder.self_attn);
  push_ln(out, "encoder.ln1", p.assoc.encoder.ln1);
  push_ffn(out, "encoder.ffn", p.assoc.encoder.ffn);
  push_ln(out, "encoder.ln2", p.assoc.encoder.ln2);
  push_attn(out, "decoder.self_attn", p.assoc.decoder.self_attn);
  push_ln(out, "decoder.ln1", p.assoc.decoder.ln1);
  push_attn(out, "decoder.cross_attn", p.assoc.decoder.cross_attn);
  push_ln(out, "decoder.ln2", p.assoc.decoder.ln2);
  push_ffn(out, "decoder.ffn", p.assoc.decoder.ffn);
  push_ln(out, "decoder.ln3", p.assoc.decoder.ln3);
  return out;
}

ModelParams make_zero_params(const ModelDims& dims) {
  if (!dims.valid()) throw ConfigError("invalid model dims");
  const Index d = dims.d_model();
  const Index dff = dims.d_ff();
  ModelParams p;
  p.dims = dims;
  p.enc.app.l1 = AffineParams::zeros(dims.d_raw, dims.d_roi);
  p.enc.app.l2 = AffineParams::zeros(dims.d_roi, dims.d_roi);
  p.enc.st.l1 = AffineParams::zeros(6, dims.d_st);
  p.enc.st.l2 = AffineParams::zeros(dims.d_st, dims.d_st);
  p.assoc.heads = dims.heads;

  auto layer_ln = [&] { return LayerNormParams{VecX::Zero(d), VecX::Zero(d)}; };
  p.assoc.encoder.self_attn = zero_attn(d);
  p.assoc.encoder.ln1 = layer_ln();
  p.assoc.encoder.ffn.l1 = AffineParams::zeros(d, dff);
  p.assoc.encoder.ffn.l2 = AffineParams::zeros(dff, d);
  p.assoc.encoder.ln2 = layer_ln();
  p.assoc.decoder.self_attn = zero_attn(d);
  p.assoc.decoder.ln1 = layer_ln();
  p.assoc.decoder.cross_attn = zero_attn(d);
  p.assoc.decoder.ln2 = layer_ln();
  p.assoc.decoder.ffn.l1 = AffineParams::zeros(d, dff);
  p.assoc.decoder.ffn.l2 = AffineParams::zeros(dff, d);
  p.assoc.decoder.ln3 = layer_ln();
  return p;
}

ModelParams make_initialized_params(const ModelDims& dims,
                                    std::uint64_t seed) {
  ModelParams p = make_zero_params(dims);
  Rng rng(seed);
  // Each bias directly follows its weight matrix in tensor_refs order and
  // shares that matrix's fan-in (= W rows).
  double fan_in = 1.0;
  for (TensorRef& t : tensor_refs(p)) {
    if (t.name.ends_with(".gamma")) {
      for (Index k = 0; k < t.size(); ++k) t.data[k] = 1.0;
      continue;
    }
    if (t.name.ends_with(".beta")) {
      for (Index k = 0; k < t.size(); ++k) t.data[k] = 0.0;
      continue;
    }
    if (t.cols > 1 || t.name.ends_with(".W"))
      fan_in = static_cast<double>(t.rows);
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Index k = 0; k < t.size(); ++k)
      t.data[k] = rng.uniform(-bound, bound);
  }
  // The output layer norms feed the unscaled dot-product similarities; unit
  // gains there put |G| near the token dimension and saturate the per-frame
  // softmax from the first step. Starting them at D^-1/2 keeps early
  // similarities O(1) and lets training pick the sharpness.
  const double out_gain = 1.0 / std::sqrt(static_cast<double>(dims.d_model()));
  p.assoc.encoder.ln2.gamma.setConstant(out_gain);
  p.assoc.decoder.ln3.gamma.setConstant(out_gain);
  return p;
}

}  // namespace mtmc
