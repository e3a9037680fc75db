#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mtmc/assoc.hpp"
#include "mtmc/rng.hpp"

#include <cmath>
#include <optional>
#include <vector>

using namespace mtmc;

namespace {

// ---- independent plain-loop re-implementation used as an oracle ----

MatX naive_affine(const MatX& x, const AffineParams& a) {
  MatX y(x.rows(), a.W.cols());
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < a.W.cols(); ++c) {
      double acc = a.b(c);
      for (Index k = 0; k < x.cols(); ++k) acc += x(r, k) * a.W(k, c);
      y(r, c) = acc;
    }
  return y;
}

MatX naive_ln(const MatX& x, const LayerNormParams& p) {
  MatX y(x.rows(), x.cols());
  const double d = static_cast<double>(x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    double mu = 0.0;
    for (Index c = 0; c < x.cols(); ++c) mu += x(r, c);
    mu /= d;
    double var = 0.0;
    for (Index c = 0; c < x.cols(); ++c)
      var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    for (Index c = 0; c < x.cols(); ++c)
      y(r, c) = (x(r, c) - mu) * is * p.gamma(c) + p.beta(c);
  }
  return y;
}

MatX naive_attention(const MatX& q_in, const MatX& kv_in,
                     const AttentionParams& p, int heads) {
  const Index d = p.Wq.rows();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const MatX q = naive_affine(q_in, {p.Wq, p.bq});
  const MatX k = naive_affine(kv_in, {p.Wk, p.bk});
  const MatX v = naive_affine(kv_in, {p.Wv, p.bv});
  MatX concat(q_in.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Index off = h * dh;
    for (Index i = 0; i < q.rows(); ++i) {
      std::vector<double> w(static_cast<std::size_t>(k.rows()));
      double denom = 0.0;
      for (Index j = 0; j < k.rows(); ++j) {
        double s = 0.0;
        for (Index c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
        w[static_cast<std::size_t>(j)] = std::exp(s * scale);
        denom += w[static_cast<std::size_t>(j)];
      }
      for (Index c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (Index j = 0; j < k.rows(); ++j)
          acc += w[static_cast<std::size_t>(j)] / denom * v(j, off + c);
        concat(i, off + c) = acc;
      }
    }
  }
  return naive_affine(concat, {p.Wo, p.bo});
}

MatX naive_ffn(const MatX& x, const FeedForwardParams& p) {
  MatX h = naive_affine(x, p.l1);
  for (Index r = 0; r < h.rows(); ++r)
    for (Index c = 0; c < h.cols(); ++c) h(r, c) = std::max(0.0, h(r, c));
  return naive_affine(h, p.l2);
}

MatX naive_encoder(const MatX& f, const AssocModelParams& p) {
  const MatX a = naive_attention(f, f, p.encoder.self_attn, p.heads);
  const MatX z = naive_ln(f + a, p.encoder.ln1);
  return naive_ln(z + naive_ffn(z, p.encoder.ffn), p.encoder.ln2);
}

MatX naive_decoder(const MatX& q, const MatX& f_e, const AssocModelParams& p) {
  const MatX a1 = naive_attention(q, q, p.decoder.self_attn, p.heads);
  const MatX z1 = naive_ln(q + a1, p.decoder.ln1);
  const MatX a2 = naive_attention(z1, f_e, p.decoder.cross_attn, p.heads);
  const MatX z2 = naive_ln(z1 + a2, p.decoder.ln2);
  return naive_ln(z2 + naive_ffn(z2, p.decoder.ffn), p.decoder.ln3);
}

double max_abs_diff(const MatX& a, const MatX& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

AssocModelParams small_model(Index d_roi, Index d_st, int heads,
                             std::uint64_t seed) {
  ModelDims dims;
  dims.d_raw = 4;
  dims.d_roi = d_roi;
  dims.d_st = d_st;
  dims.heads = heads;
  REQUIRE(dims.valid());
  return make_initialized_params(dims, seed).assoc;
}

}  // namespace

TEST_CASE("frame partition groups columns by slot in stream order") {
  const std::vector<FrameRef> cols{{2, 5}, {1, 3}, {2, 3}, {1, 3}};
  const FramePartition p = FramePartition::build(cols);
  REQUIRE(p.frame_count() == 3);
  CHECK(p.frames[0] == FrameRef{1, 3});
  CHECK(p.frames[1] == FrameRef{2, 3});
  CHECK(p.frames[2] == FrameRef{2, 5});
  CHECK(p.members[0] == std::vector<Index>{1, 3});
  CHECK(p.members[1] == std::vector<Index>{2});
  CHECK(p.members[2] == std::vector<Index>{0});
  CHECK(p.frame_of == std::vector<Index>{2, 0, 1, 0});
}

TEST_CASE("row softmax hand values, normalization, shift invariance") {
  MatX s(1, 2);
  s << 0.0, std::log(2.0);
  const MatX p = row_softmax(s);
  CHECK(p(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  CHECK(row_softmax(MatX::Zero(1, 1))(0, 0) == 1.0);

  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    MatX x(3, 5);
    for (Index r = 0; r < 3; ++r) x.row(r) = rng.gaussian_vec(5).transpose();
    const MatX a = row_softmax(x);
    for (Index r = 0; r < 3; ++r)
      CHECK(a.row(r).sum() == doctest::Approx(1.0).epsilon(1e-13));
    const MatX b = row_softmax((x.array() + 123.456).matrix());
    CHECK(max_abs_diff(a, b) < 1e-12);
  }

  // Stable under scores that would overflow a naive exponentiation.
  MatX big(1, 2);
  big << 1000.0, 999.0;
  const MatX pb = row_softmax(big);
  CHECK(std::isfinite(pb(0, 0)));
  CHECK(pb(0, 0) + pb(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("similarity is an unscaled inner product with metadata") {
  MatX q(1, 2), f(2, 2);
  q << 1.0, 0.0;
  f << 1.0, 0.0, 0.0, 1.0;
  const SimilarityMatrix g =
      similarity(q, f, {FrameRef{1, 1}, FrameRef{1, 1}}, {1, 2});
  REQUIRE(g.G.rows() == 1);
  REQUIRE(g.G.cols() == 2);
  CHECK(g.G(0, 0) == 1.0);
  CHECK(g.G(0, 1) == 0.0);
  REQUIRE(g.col_frames.size() == 2);
  REQUIRE(g.row_labels.size() == 2);
  CHECK(*g.row_labels[0] == 1);

  MatX q1(1, 2), f1(1, 2);
  q1 << 1.0, 2.0;
  f1 << 3.0, 4.0;
  CHECK(similarity(q1, f1, {FrameRef{1, 1}}).G(0, 0) == 11.0);

  CHECK_THROWS_AS(similarity(MatX::Zero(1, 2), MatX::Zero(1, 3), {{1, 1}}),
                  DataError);
  CHECK_THROWS_AS(similarity(MatX::Zero(1, 2), MatX::Zero(2, 2), {{1, 1}}),
                  DataError);
}

TEST_CASE("per-frame softmax exact small cases with null score zero") {
  SUBCASE("single zero-score candidate splits evenly with the null") {
    SimilarityMatrix g{MatX::Zero(1, 1), {FrameRef{1, 1}}, {}};
    const AssocProbs p = per_frame_softmax(g);
    CHECK(p.H(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.null_prob(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("scores (ln 2, 0) in one frame give (1/2, 1/4) and null 1/4") {
    MatX G(1, 2);
    G << std::log(2.0), 0.0;
    SimilarityMatrix g{G, {FrameRef{1, 1}, FrameRef{1, 1}}, {}};
    const AssocProbs p = per_frame_softmax(g);
    CHECK(p.H(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p.H(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p.null_prob(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("independent normalization per frame") {
    SimilarityMatrix g{MatX::Zero(1, 3),
                       {FrameRef{1, 1}, FrameRef{1, 2}, FrameRef{1, 2}},
                       {}};
    const AssocProbs p = per_frame_softmax(g);
    REQUIRE(p.partition.frame_count() == 2);
    CHECK(p.H(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.H(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.H(0, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(p.null_prob(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.null_prob(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("per-frame softmax rows always total one across frames plus null") {
  Rng rng(123);
  for (int it = 0; it < 200; ++it) {
    const Index n = rng.uniform_int(1, 8);
    std::vector<FrameRef> frames;
    for (Index j = 0; j < n; ++j)
      frames.push_back({rng.uniform_int(1, 2), rng.uniform_int(1, 4)});
    MatX G(3, n);
    for (Index r = 0; r < 3; ++r)
      G.row(r) = (4.0 * rng.gaussian_vec(n)).transpose();
    const SimilarityMatrix sm{G, frames, {}};
    const AssocProbs p = per_frame_softmax(sm);
    for (Index i = 0; i < 3; ++i) {
      for (Index f = 0; f < p.partition.frame_count(); ++f) {
        double total = p.null_prob(i, f);
        for (const Index j :
             p.partition.members[static_cast<std::size_t>(f)])
          total += p.H(i, j);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.null_prob(i, f) > 0.0);
      }
      for (Index j = 0; j < n; ++j) CHECK(p.H(i, j) > 0.0);
    }
  }
}

TEST_CASE("attention validates widths and head divisibility") {
  const AssocModelParams p = small_model(3, 1, 1, 2);
  CHECK_THROWS_AS(
      attention_forward(MatX::Zero(2, 3), MatX::Zero(2, 4), p.encoder.self_attn,
                        1),
      DataError);
  CHECK_THROWS_AS(
      attention_forward(MatX::Zero(2, 4), MatX::Zero(2, 4), p.encoder.self_attn,
                        3),
      DataError);
}

TEST_CASE("single-row encoder self-attention weight is exactly one") {
  const AssocModelParams p = small_model(6, 2, 2, 3);
  EncoderTape tape;
  Rng rng(4);
  const MatX f = rng.gaussian_vec(8).transpose();
  const MatX out = encoder_forward(f, p, &tape);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 8);
  REQUIRE(tape.attn.attn.size() == 2);
  for (const MatX& a : tape.attn.attn) {
    REQUIRE(a.rows() == 1);
    REQUIRE(a.cols() == 1);
    CHECK(a(0, 0) == 1.0);
  }
  CHECK_THROWS_AS(encoder_forward(MatX(0, 8), p), DataError);
  CHECK_THROWS_AS(decoder_forward(MatX(0, 8), f, p), DataError);
}

TEST_CASE("encoder and decoder match an index-loop re-implementation") {
  for (const int heads : {1, 2}) {
    const AssocModelParams p = small_model(3, 1, heads, 31 + heads);
    Rng rng(100 + heads);
    MatX f(5, 4);
    for (Index r = 0; r < 5; ++r) f.row(r) = rng.gaussian_vec(4).transpose();
    const MatX enc = encoder_forward(f, p);
    CHECK(max_abs_diff(enc, naive_encoder(f, p)) < 1e-9);
    const MatX dec = decoder_forward(f, enc, p);
    CHECK(max_abs_diff(dec, naive_decoder(f, enc, p)) < 1e-9);
  }
}

TEST_CASE("encoder is permutation equivariant") {
  const AssocModelParams p = small_model(6, 2, 2, 9);
  Rng rng(55);
  MatX f(4, 8);
  for (Index r = 0; r < 4; ++r) f.row(r) = rng.gaussian_vec(8).transpose();
  const std::vector<Index> perm{2, 0, 3, 1};
  MatX fp(4, 8);
  for (Index r = 0; r < 4; ++r) fp.row(r) = f.row(perm[static_cast<std::size_t>(r)]);
  const MatX out = encoder_forward(f, p);
  const MatX outp = encoder_forward(fp, p);
  for (Index r = 0; r < 4; ++r)
    CHECK((outp.row(r) - out.row(perm[static_cast<std::size_t>(r)]))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("decoder output is invariant to the order of encoder rows") {
  const AssocModelParams p = small_model(6, 2, 2, 13);
  Rng rng(66);
  MatX q(3, 8), f_e(5, 8);
  for (Index r = 0; r < 3; ++r) q.row(r) = rng.gaussian_vec(8).transpose();
  for (Index r = 0; r < 5; ++r) f_e.row(r) = rng.gaussian_vec(8).transpose();
  MatX f_es(5, 8);
  const std::vector<Index> perm{4, 2, 0, 1, 3};
  for (Index r = 0; r < 5; ++r)
    f_es.row(r) = f_e.row(perm[static_cast<std::size_t>(r)]);
  CHECK(max_abs_diff(decoder_forward(q, f_e, p), decoder_forward(q, f_es, p)) <
        1e-12);
}

TEST_CASE("decoder with zeroed attention and feed-forward reduces to norms") {
  AssocModelParams p = small_model(3, 1, 1, 17);
  for (AttentionParams* a : {&p.decoder.self_attn, &p.decoder.cross_attn}) {
    a->Wv.setZero();
    a->bv.setZero();
    a->Wo.setZero();
    a->bo.setZero();
  }
  p.decoder.ffn.l2.W.setZero();
  p.decoder.ffn.l2.b.setZero();
  Rng rng(21);
  MatX q(3, 4), f_e(2, 4);
  for (Index r = 0; r < 3; ++r) q.row(r) = rng.gaussian_vec(4).transpose();
  for (Index r = 0; r < 2; ++r) f_e.row(r) = rng.gaussian_vec(4).transpose();
  const MatX expect = naive_ln(
      naive_ln(naive_ln(q, p.decoder.ln1), p.decoder.ln2), p.decoder.ln3);
  CHECK(max_abs_diff(decoder_forward(q, f_e, p), expect) < 1e-12);
}

TEST_CASE("ground-truth association marks same-label pairs per frame") {
  const std::vector<std::optional<std::int64_t>> labels{1, 2, 1, std::nullopt};
  const std::vector<FrameRef> frames{{1, 1}, {1, 1}, {2, 1}, {2, 1}};
  const GtAssoc gt = build_gt_association(labels, frames);
  REQUIRE(gt.X.rows() == 4);
  REQUIRE(gt.x0.cols() == 2);
  CHECK(gt.n_labeled == 3);
  CHECK(gt.labeled == std::vector<char>{1, 1, 1, 0});

  MatX x_expect = MatX::Zero(4, 4);
  x_expect(0, 0) = x_expect(0, 2) = 1.0;
  x_expect(1, 1) = 1.0;
  x_expect(2, 0) = x_expect(2, 2) = 1.0;
  CHECK(gt.X == x_expect);

  MatX x0_expect = MatX::Zero(4, 2);
  x0_expect(1, 1) = 1.0;  // identity 2 has no column in the second frame
  CHECK(gt.x0 == x0_expect);

  CHECK_THROWS_AS(build_gt_association(labels, std::vector<FrameRef>{{1, 1}}),
                  DataError);
}

TEST_CASE("ground truth with all rows unlabeled is empty") {
  const std::vector<std::optional<std::int64_t>> labels{std::nullopt,
                                                        std::nullopt};
  const std::vector<FrameRef> frames{{1, 1}, {1, 2}};
  const GtAssoc gt = build_gt_association(labels, frames);
  CHECK(gt.n_labeled == 0);
  CHECK(gt.X == MatX::Zero(2, 2));
  CHECK(gt.x0 == MatX::Zero(2, 2));
}

TEST_CASE("association loss hand values") {
  SUBCASE("one labeled target matching itself at probability one-half") {
    const std::vector<std::optional<std::int64_t>> labels{7};
    const std::vector<FrameRef> frames{{1, 1}};
    const GtAssoc gt = build_gt_association(labels, frames);
    const SimilarityMatrix g{MatX::Zero(1, 1), frames, {}};
    const AssocProbs probs = per_frame_softmax(g);
    const LossBreakdown loss = association_loss(probs, gt);
    CHECK(loss.total == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
    REQUIRE(loss.per_frame.size() == 1);
    CHECK(loss.per_frame[0].first == FrameRef{1, 1});
    CHECK(loss.per_frame[0].second == doctest::Approx(0.693147).epsilon(1e-5));
  }
  SUBCASE("hand-built one-hot probabilities give zero loss") {
    const std::vector<std::optional<std::int64_t>> labels{3, 4};
    const std::vector<FrameRef> frames{{1, 1}, {1, 1}};
    const GtAssoc gt = build_gt_association(labels, frames);
    AssocProbs probs;
    probs.partition = FramePartition::build(frames);
    probs.H = MatX::Identity(2, 2);
    probs.null_prob = MatX::Zero(2, 1);
    CHECK(association_loss(probs, gt).total == 0.0);
  }
  SUBCASE("two frames at one-half each accumulate to two log-twos") {
    const std::vector<std::optional<std::int64_t>> labels2{5, 5};
    const std::vector<FrameRef> frames2{{1, 1}, {1, 2}};
    const GtAssoc gt2 = build_gt_association(labels2, frames2);
    const SimilarityMatrix g{MatX::Zero(2, 2), frames2, {}};
    const AssocProbs probs = per_frame_softmax(g);
    const LossBreakdown loss = association_loss(probs, gt2);
    // Two labeled rows, two frames, every admissible entry at one half:
    // each frame contributes (1/2)·(ln 2 + ln 2), totalling 2 ln 2.
    CHECK(loss.total == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(loss.total == doctest::Approx(1.386294).epsilon(1e-5));
  }
  SUBCASE("unlabeled batch yields zero loss with per-frame entries") {
    const std::vector<std::optional<std::int64_t>> labels{std::nullopt};
    const std::vector<FrameRef> frames{{1, 1}};
    const GtAssoc gt = build_gt_association(labels, frames);
    const SimilarityMatrix g{MatX::Zero(1, 1), frames, {}};
    const LossBreakdown loss = association_loss(per_frame_softmax(g), gt);
    CHECK(loss.total == 0.0);
    REQUIRE(loss.per_frame.size() == 1);
    CHECK(loss.per_frame[0].second == 0.0);
  }
}

TEST_CASE("association loss rejects shape mismatches") {
  const std::vector<std::optional<std::int64_t>> labels{1, 1};
  const std::vector<FrameRef> frames{{1, 1}, {1, 2}};
  const GtAssoc gt = build_gt_association(labels, frames);
  AssocProbs probs;
  probs.partition = gt.partition;
  probs.H = MatX::Zero(1, 2);
  probs.null_prob = MatX::Zero(1, 2);
  CHECK_THROWS_AS(association_loss(probs, gt), DataError);
}

TEST_CASE("training forward pass matches the loop oracle end to end") {
  const AssocModelParams p = small_model(3, 1, 1, 41);
  Rng rng(42);
  MatX f(3, 4);
  for (Index r = 0; r < 3; ++r) f.row(r) = rng.gaussian_vec(4).transpose();
  const std::vector<FrameRef> frames{{1, 1}, {2, 1}, {1, 2}};
  const std::vector<std::optional<std::int64_t>> labels{1, 1, 2};

  const TrainingForward fw = forward_training(f, p, frames, labels);
  REQUIRE(fw.g.G.rows() == 3);
  REQUIRE(fw.g.G.cols() == 3);
  CHECK(fw.g.col_frames == frames);
  REQUIRE(fw.g.row_labels.size() == 3);
  CHECK(*fw.g.row_labels[2] == 2);

  // Oracle: encoder on F, decoder queried with the raw F, inner-product
  // similarity, per-frame softmax with a zero null score, cross-entropy loss.
  const MatX f_e = naive_encoder(f, p);
  const MatX q_d = naive_decoder(f, f_e, p);
  CHECK(max_abs_diff(fw.f_e, f_e) < 1e-9);
  CHECK(max_abs_diff(fw.q_d, q_d) < 1e-9);

  MatX g_expect(3, 3);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (Index c = 0; c < 4; ++c) acc += q_d(i, c) * f_e(j, c);
      g_expect(i, j) = acc;
    }
  CHECK(max_abs_diff(fw.g.G, g_expect) < 1e-9);

  const FramePartition part = FramePartition::build(frames);
  MatX h_expect(3, 3);
  MatX null_expect(3, part.frame_count());
  for (Index i = 0; i < 3; ++i)
    for (Index fr = 0; fr < part.frame_count(); ++fr) {
      const auto& cols = part.members[static_cast<std::size_t>(fr)];
      double denom = 1.0;  // the null candidate at score zero
      for (const Index j : cols) denom += std::exp(g_expect(i, j));
      for (const Index j : cols)
        h_expect(i, j) = std::exp(g_expect(i, j)) / denom;
      null_expect(i, fr) = 1.0 / denom;
    }
  CHECK(max_abs_diff(fw.probs.H, h_expect) < 1e-9);
  CHECK(max_abs_diff(fw.probs.null_prob, null_expect) < 1e-9);

  const GtAssoc gt = build_gt_association(labels, frames);
  const LossBreakdown loss = association_loss(fw.probs, gt);
  CHECK(loss.total >= 0.0);
  double expect = 0.0;
  for (Index fr = 0; fr < part.frame_count(); ++fr) {
    double acc = 0.0;
    const auto& cols = part.members[static_cast<std::size_t>(fr)];
    for (Index i = 0; i < 3; ++i) {
      if (!gt.labeled[static_cast<std::size_t>(i)]) continue;
      for (const Index j : cols)
        if (gt.X(i, j) != 0.0)
          acc += std::log(std::max(h_expect(i, j), kLogClamp));
      if (gt.x0(i, fr) != 0.0)
        acc += std::log(std::max(null_expect(i, fr), kLogClamp));
    }
    expect += -acc / static_cast<double>(gt.n_labeled);
  }
  CHECK(loss.total == doctest::Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(
      forward_training(f, p, std::vector<FrameRef>{{1, 1}}, labels), DataError);
}

TEST_CASE("training loss is invariant to batch ordering") {
  const AssocModelParams p = small_model(6, 2, 2, 51);
  Rng rng(52);
  MatX f(5, 8);
  for (Index r = 0; r < 5; ++r) f.row(r) = rng.gaussian_vec(8).transpose();
  const std::vector<FrameRef> frames{{1, 1}, {2, 1}, {1, 2}, {2, 2}, {1, 1}};
  const std::vector<std::optional<std::int64_t>> labels{1, 1, 1, 2,
                                                        std::nullopt};

  const auto loss_of = [&](const std::vector<Index>& perm) {
    MatX fp(5, 8);
    std::vector<FrameRef> framesp;
    std::vector<std::optional<std::int64_t>> labelsp;
    for (Index r = 0; r < 5; ++r) {
      const auto s = static_cast<std::size_t>(perm[static_cast<std::size_t>(r)]);
      fp.row(r) = f.row(perm[static_cast<std::size_t>(r)]);
      framesp.push_back(frames[s]);
      labelsp.push_back(labels[s]);
    }
    const TrainingForward fw = forward_training(fp, p, framesp, labelsp);
    return association_loss(fw.probs, build_gt_association(labelsp, framesp))
        .total;
  };

  const double base = loss_of({0, 1, 2, 3, 4});
  CHECK(loss_of({4, 2, 0, 3, 1}) == doctest::Approx(base).epsilon(1e-9));
  CHECK(loss_of({1, 0, 3, 2, 4}) == doctest::Approx(base).epsilon(1e-9));
}
