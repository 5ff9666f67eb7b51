#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "clhad/error.hpp"
#include "clhad/nn/attention.hpp"
#include "clhad/nn/layers.hpp"

namespace clhad {

enum class RunMode { Train, Eval };

// Multi-scale 1-D convolutions over the spectral axis (the 2C-vector treated
// as a token sequence of one channel), a learned position embedding, a
// cosine self-attention block with residuals and a GELU feed-forward, then an
// MLP head on the flattened token features. Tokens are spectral positions,
// so the score of a sample never depends on its batch neighbours.
struct DiscriminatorConfig {
  Index input_dim = 0;                  // 2C = token count
  Index msc_channels = 8;               // channels per conv scale
  std::array<int, 3> kernels = {1, 3, 5};
  Index attn_dim = 8;                   // must divide 3*msc_channels
  Index ffn_hidden = 48;
  Index head_hidden = 32;
  double dropout = 0.1;
  double leak = 0.2;

  Index feature_width() const { return 3 * msc_channels; }

  static DiscriminatorConfig defaults(Index input_dim) {
    DiscriminatorConfig cfg;
    cfg.input_dim = input_dim;
    return cfg;
  }

  void validate() const {
    if (input_dim < 2) throw ArgumentError("discriminator: input_dim must be >= 2");
    if (kernels != std::array<int, 3>{1, 3, 5})
      throw ArgumentError("discriminator: kernel set must be {1,3,5}");
    if (msc_channels < 1 || attn_dim < 1 || ffn_hidden < 1 || head_hidden < 1)
      throw ArgumentError("discriminator: dims must be >= 1");
    if (feature_width() % attn_dim != 0)
      throw ArgumentError("discriminator: attention dim must divide feature width");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ArgumentError("discriminator: dropout must be in [0,1)");
  }
};

template <typename Scalar>
struct DiscriminatorCache {
  MatrixX<Scalar> input;                       // n x L
  MatrixX<Scalar> features;                    // msc + posemb, (n*L) x F
  MatrixX<Scalar> q, k, v, sa;                 // stacked per sample, (n*L) x A
  std::vector<AttentionCache<Scalar>> attn;    // one per sample
  MatrixX<Scalar> pre_ffn;                     // Linear(SA) + F, (n*L) x F
  MatrixX<Scalar> ffn_pre, ffn_drop;           // z1, dropout(gelu(z1))
  MatrixX<Scalar> drop_mask;                   // empty in eval mode
  MatrixX<Scalar> head_in, head_pre, head_act; // flatten, z3, leaky(z3)
  VectorX<Scalar> probs;
};

template <typename Scalar>
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(const DiscriminatorConfig& cfg, Index& cursor) : cfg_(cfg) {
    cfg_.validate();
    param_begin_ = cursor;
    const Index mc = cfg.msc_channels;
    for (int s = 0; s < 3; ++s) {
      conv_w_[s] = cursor;
      cursor += cfg.kernels[s] * mc;
      conv_b_[s] = cursor;
      cursor += mc;
    }
    const Index F = cfg.feature_width();
    pos_off_ = cursor;
    cursor += cfg.input_dim * F;
    wq_off_ = cursor;
    cursor += F * cfg.attn_dim;
    wk_off_ = cursor;
    cursor += F * cfg.attn_dim;
    wv_off_ = cursor;
    cursor += F * cfg.attn_dim;
    out_proj_ = Dense<Scalar>::allocate(cfg.attn_dim, F, cursor);
    ffn1_ = Dense<Scalar>::allocate(F, cfg.ffn_hidden, cursor);
    ffn2_ = Dense<Scalar>::allocate(cfg.ffn_hidden, F, cursor);
    head1_ = Dense<Scalar>::allocate(cfg.input_dim * F, cfg.head_hidden, cursor);
    head2_ = Dense<Scalar>::allocate(cfg.head_hidden, 1, cursor);
    param_count_ = cursor - param_begin_;
  }

  void init(ParamStore<Scalar>& ps, Rng& rng) const {
    const Index mc = cfg_.msc_channels;
    for (int s = 0; s < 3; ++s) {
      const Index k = cfg_.kernels[s];
      auto w = ps.mat(conv_w_[s], k, mc);
      const double a = std::sqrt(6.0 / static_cast<double>(k + mc));
      for (Index j = 0; j < mc; ++j)
        for (Index i = 0; i < k; ++i) w(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
      ps.vec(conv_b_[s], mc).setZero();
    }
    auto pos = ps.mat(pos_off_, cfg_.input_dim, cfg_.feature_width());
    for (Index j = 0; j < pos.cols(); ++j)
      for (Index i = 0; i < pos.rows(); ++i)
        pos(i, j) = static_cast<Scalar>(0.02 * rng.normal());
    const Index F = cfg_.feature_width();
    for (Index off : {wq_off_, wk_off_, wv_off_}) {
      auto w = ps.mat(off, F, cfg_.attn_dim);
      const double a = std::sqrt(6.0 / static_cast<double>(F + cfg_.attn_dim));
      for (Index j = 0; j < w.cols(); ++j)
        for (Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
    }
    out_proj_.init(ps, rng);
    ffn1_.init(ps, rng);
    ffn2_.init(ps, rng);
    head1_.init(ps, rng);
    head2_.init(ps, rng);
  }

  // Probabilities in (0,1), one per batch row. Train mode needs an rng for
  // the dropout mask; eval mode is deterministic and touches no state.
  VectorX<Scalar> forward(const ParamStore<Scalar>& ps, const MatrixX<Scalar>& batch,
                          RunMode mode, Rng* rng,
                          DiscriminatorCache<Scalar>* cache = nullptr) const {
    const Index L = cfg_.input_dim;
    const Index F = cfg_.feature_width();
    const Index n = batch.rows();
    if (batch.cols() != L)
      throw ShapeError("discriminator: batch has " + std::to_string(batch.cols()) +
                       " columns, expected " + std::to_string(L));
    if (mode == RunMode::Train && cfg_.dropout > 0.0 && rng == nullptr)
      throw ArgumentError("discriminator: train mode requires an rng for dropout");

    MatrixX<Scalar> feat = msc_forward(ps, batch);
    const auto pos = ps.mat(pos_off_, L, F);
    for (Index s = 0; s < n; ++s) feat.middleRows(s * L, L) += pos;

    const Scalar scale = static_cast<Scalar>(std::sqrt(static_cast<double>(L)));
    const auto wq = ps.mat(wq_off_, F, cfg_.attn_dim);
    const auto wk = ps.mat(wk_off_, F, cfg_.attn_dim);
    const auto wv = ps.mat(wv_off_, F, cfg_.attn_dim);
    MatrixX<Scalar> q = feat * wq;
    MatrixX<Scalar> k = feat * wk;
    MatrixX<Scalar> v = feat * wv;
    MatrixX<Scalar> sa(n * L, cfg_.attn_dim);
    if (cache) cache->attn.assign(static_cast<std::size_t>(n), {});
    for (Index s = 0; s < n; ++s) {
      AttentionCache<Scalar>* ac = cache ? &cache->attn[static_cast<std::size_t>(s)] : nullptr;
      sa.middleRows(s * L, L) =
          l2_attention<Scalar>(q.middleRows(s * L, L), k.middleRows(s * L, L),
                               v.middleRows(s * L, L), scale, ac);
    }

    MatrixX<Scalar> pre_ffn = out_proj_.forward(ps, sa) + feat;

    MatrixX<Scalar> z1 = ffn1_.forward(ps, pre_ffn);
    MatrixX<Scalar> act1 = z1;
    gelu_inplace(act1);
    MatrixX<Scalar> mask;
    if (mode == RunMode::Train && cfg_.dropout > 0.0) {
      mask = dropout_mask<Scalar>(act1.rows(), act1.cols(), static_cast<Scalar>(cfg_.dropout), *rng);
      act1 = act1.cwiseProduct(mask);
    }
    MatrixX<Scalar> f_hat = ffn2_.forward(ps, act1) + pre_ffn;

    // flatten (L x F) token block of each sample column-major
    MatrixX<Scalar> head_in(n, L * F);
    for (Index s = 0; s < n; ++s)
      for (Index c = 0; c < F; ++c)
        head_in.block(s, c * L, 1, L) = f_hat.block(s * L, c, L, 1).transpose();

    MatrixX<Scalar> z3 = head1_.forward(ps, head_in);
    MatrixX<Scalar> a3 = z3;
    apply_activation(a3, Activation::Leaky, static_cast<Scalar>(cfg_.leak));
    MatrixX<Scalar> z4 = head2_.forward(ps, a3);
    MatrixX<Scalar> probs_m = z4;
    apply_activation(probs_m, Activation::Sigmoid, static_cast<Scalar>(cfg_.leak));
    VectorX<Scalar> probs = probs_m.col(0);

    if (cache) {
      cache->input = batch;
      cache->features = std::move(feat);
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->sa = std::move(sa);
      cache->pre_ffn = std::move(pre_ffn);
      cache->ffn_pre = std::move(z1);
      cache->ffn_drop = std::move(act1);
      cache->drop_mask = std::move(mask);
      cache->head_in = std::move(head_in);
      cache->head_pre = std::move(z3);
      cache->head_act = std::move(a3);
      cache->probs = probs;
    }
    return probs;
  }

  // Accumulates parameter gradients and returns the input gradient (needed
  // when adversarial signal flows back into the generator).
  MatrixX<Scalar> backward(ParamStore<Scalar>& ps, const DiscriminatorCache<Scalar>& c,
                           const VectorX<Scalar>& d_probs) const {
    const Index L = cfg_.input_dim;
    const Index F = cfg_.feature_width();
    const Index n = c.input.rows();
    const Scalar leak = static_cast<Scalar>(cfg_.leak);

    MatrixX<Scalar> dz4 =
        (d_probs.array() * c.probs.array() * (Scalar(1) - c.probs.array())).matrix();
    MatrixX<Scalar> da3 = head2_.backward(ps, c.head_act, dz4);
    MatrixX<Scalar> dz3 = da3.cwiseProduct(
        activation_grad(c.head_pre, c.head_act, Activation::Leaky, leak));
    MatrixX<Scalar> d_head_in = head1_.backward(ps, c.head_in, dz3);

    MatrixX<Scalar> d_fhat(n * L, F);
    for (Index s = 0; s < n; ++s)
      for (Index col = 0; col < F; ++col)
        d_fhat.block(s * L, col, L, 1) = d_head_in.block(s, col * L, 1, L).transpose();

    // FFN with residual
    MatrixX<Scalar> d_drop = ffn2_.backward(ps, c.ffn_drop, d_fhat);
    if (c.drop_mask.size() > 0) d_drop = d_drop.cwiseProduct(c.drop_mask);
    MatrixX<Scalar> dz1 = d_drop.cwiseProduct(gelu_grad(c.ffn_pre));
    MatrixX<Scalar> d_pre_ffn = ffn1_.backward(ps, c.pre_ffn, dz1) + d_fhat;

    // Linear(SA) + F residual
    MatrixX<Scalar> d_sa = out_proj_.backward(ps, c.sa, d_pre_ffn);
    MatrixX<Scalar> d_feat = d_pre_ffn;

    const Scalar scale = static_cast<Scalar>(std::sqrt(static_cast<double>(L)));
    MatrixX<Scalar> dq = MatrixX<Scalar>::Zero(n * L, cfg_.attn_dim);
    MatrixX<Scalar> dk = MatrixX<Scalar>::Zero(n * L, cfg_.attn_dim);
    MatrixX<Scalar> dv = MatrixX<Scalar>::Zero(n * L, cfg_.attn_dim);
    for (Index s = 0; s < n; ++s) {
      auto dq_b = dq.middleRows(s * L, L);
      auto dk_b = dk.middleRows(s * L, L);
      auto dv_b = dv.middleRows(s * L, L);
      MatrixX<Scalar> dq_s = dq_b, dk_s = dk_b, dv_s = dv_b;
      l2_attention_backward<Scalar>(c.q.middleRows(s * L, L), c.k.middleRows(s * L, L),
                                    c.v.middleRows(s * L, L), scale,
                                    c.attn[static_cast<std::size_t>(s)],
                                    d_sa.middleRows(s * L, L), dq_s, dk_s, dv_s);
      dq_b = dq_s;
      dk_b = dk_s;
      dv_b = dv_s;
    }
    const auto wq = ps.mat(wq_off_, F, cfg_.attn_dim);
    const auto wk = ps.mat(wk_off_, F, cfg_.attn_dim);
    const auto wv = ps.mat(wv_off_, F, cfg_.attn_dim);
    ps.gmat(wq_off_, F, cfg_.attn_dim).noalias() += c.features.transpose() * dq;
    ps.gmat(wk_off_, F, cfg_.attn_dim).noalias() += c.features.transpose() * dk;
    ps.gmat(wv_off_, F, cfg_.attn_dim).noalias() += c.features.transpose() * dv;
    d_feat.noalias() += dq * wq.transpose();
    d_feat.noalias() += dk * wk.transpose();
    d_feat.noalias() += dv * wv.transpose();

    auto d_pos = ps.gmat(pos_off_, L, F);
    for (Index s = 0; s < n; ++s) d_pos += d_feat.middleRows(s * L, L);

    return msc_backward(ps, c.input, d_feat);
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  Index param_begin() const { return param_begin_; }
  Index param_count() const { return param_count_; }

 private:
  MatrixX<Scalar> msc_forward(const ParamStore<Scalar>& ps, const MatrixX<Scalar>& batch) const {
    const Index L = cfg_.input_dim;
    const Index mc = cfg_.msc_channels;
    const Index n = batch.rows();
    MatrixX<Scalar> feat = MatrixX<Scalar>::Zero(n * L, cfg_.feature_width());
    for (int sc = 0; sc < 3; ++sc) {
      const Index k = cfg_.kernels[sc];
      const Index half = k / 2;
      const auto w = ps.mat(conv_w_[sc], k, mc);
      for (Index s = 0; s < n; ++s) {
        const auto x = batch.row(s);
        for (Index j = 0; j < k; ++j) {
          const Index t0 = std::max<Index>(0, half - j);
          const Index t1 = std::min<Index>(L - 1, L - 1 + half - j);
          if (t1 < t0) continue;
          const Index len = t1 - t0 + 1;
          const Index s0 = t0 + j - half;
          feat.block(s * L + t0, sc * mc, len, mc).noalias() +=
              x.segment(s0, len).transpose() * w.row(j);
        }
      }
      feat.middleCols(sc * mc, mc).rowwise() += ps.vec(conv_b_[sc], mc).transpose();
    }
    return feat;
  }

  MatrixX<Scalar> msc_backward(ParamStore<Scalar>& ps, const MatrixX<Scalar>& batch,
                               const MatrixX<Scalar>& d_feat) const {
    const Index L = cfg_.input_dim;
    const Index mc = cfg_.msc_channels;
    const Index n = batch.rows();
    MatrixX<Scalar> dx = MatrixX<Scalar>::Zero(n, L);
    for (int sc = 0; sc < 3; ++sc) {
      const Index k = cfg_.kernels[sc];
      const Index half = k / 2;
      const auto w = ps.mat(conv_w_[sc], k, mc);
      auto dw = ps.gmat(conv_w_[sc], k, mc);
      ps.gvec(conv_b_[sc], mc) +=
          d_feat.middleCols(sc * mc, mc).colwise().sum().transpose();
      for (Index s = 0; s < n; ++s) {
        const auto x = batch.row(s);
        for (Index j = 0; j < k; ++j) {
          const Index t0 = std::max<Index>(0, half - j);
          const Index t1 = std::min<Index>(L - 1, L - 1 + half - j);
          if (t1 < t0) continue;
          const Index len = t1 - t0 + 1;
          const Index s0 = t0 + j - half;
          const auto df_block = d_feat.block(s * L + t0, sc * mc, len, mc);
          dw.row(j).noalias() += x.segment(s0, len) * df_block;
          dx.row(s).segment(s0, len).noalias() += (df_block * w.row(j).transpose()).transpose();
        }
      }
    }
    return dx;
  }

  DiscriminatorConfig cfg_;
  std::array<Index, 3> conv_w_ = {};
  std::array<Index, 3> conv_b_ = {};
  Index pos_off_ = 0, wq_off_ = 0, wk_off_ = 0, wv_off_ = 0;
  Dense<Scalar> out_proj_, ffn1_, ffn2_, head1_, head2_;
  Index param_begin_ = 0;
  Index param_count_ = 0;
};

}  // namespace clhad
