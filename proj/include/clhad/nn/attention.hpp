#pragma once

#include <cmath>

#include "clhad/types.hpp"

namespace clhad {

template <typename Scalar>
using RowMajorX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Cosine-normalized self-attention: queries and keys are scaled to unit row
// norm before the dot product, logits divided by `scale`, rows softmaxed.
// A zero-norm query row yields all-zero logits, i.e. uniform attention.
//
// Inputs may be strided views into a stacked batch; everything is
// materialized into the cache's contiguous buffers before row-wise work.

template <typename Scalar>
struct AttentionCache {
  MatrixX<Scalar> qn, kn;         // row-normalized Q, K
  VectorX<Scalar> q_norm, k_norm;
  RowMajorX<Scalar> weights;      // softmax output, n x n
};

template <typename Scalar>
void row_normalize_inplace(MatrixX<Scalar>& x, VectorX<Scalar>& norms) {
  norms.resize(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar r = x.row(i).norm();
    norms[i] = r;
    if (r > Scalar(0))
      x.row(i) /= r;
    else
      x.row(i).setZero();
  }
}

// weights = rowsoftmax((Qn * Kn^T) / scale); writes weights * V into `out`.
template <typename Scalar, typename QT, typename KT, typename VT, typename OT>
void l2_attention_into(const Eigen::MatrixBase<QT>& q, const Eigen::MatrixBase<KT>& k,
                       const Eigen::MatrixBase<VT>& v, Scalar scale,
                       AttentionCache<Scalar>& c, Eigen::MatrixBase<OT> const& out_) {
  c.qn = q;
  c.kn = k;
  row_normalize_inplace(c.qn, c.q_norm);
  row_normalize_inplace(c.kn, c.k_norm);
  c.weights.noalias() = c.qn * c.kn.transpose();
  const Scalar inv_scale = Scalar(1) / scale;
  for (Index i = 0; i < c.weights.rows(); ++i) {
    auto row = c.weights.row(i).array();
    row = ((row * inv_scale) - (row.maxCoeff() * inv_scale)).exp();
    row /= row.sum();
  }
  Eigen::MatrixBase<OT>& out = const_cast<Eigen::MatrixBase<OT>&>(out_);
  out.noalias() = c.weights * v;
}

template <typename Scalar>
MatrixX<Scalar> l2_attention(const MatrixX<Scalar>& q, const MatrixX<Scalar>& k,
                             const MatrixX<Scalar>& v, Scalar scale,
                             AttentionCache<Scalar>* cache = nullptr) {
  AttentionCache<Scalar> local;
  AttentionCache<Scalar>& c = cache ? *cache : local;
  MatrixX<Scalar> out(q.rows(), v.cols());
  l2_attention_into(q, k, v, scale, c, out);
  return out;
}

// Reusable temporaries for the backward pass.
template <typename Scalar>
struct AttentionScratch {
  RowMajorX<Scalar> d_weights, d_logits;
  MatrixX<Scalar> d_qn, d_kn, d_out;
};

// Backward through weights*V and the normalized-cosine logits. dq/dk/dv are
// overwritten with this call's gradients.
template <typename Scalar, typename VT, typename DT>
void l2_attention_backward(const Eigen::MatrixBase<VT>& v, Scalar scale,
                           const AttentionCache<Scalar>& c, const Eigen::MatrixBase<DT>& d_out_in,
                           AttentionScratch<Scalar>& s, MatrixX<Scalar>& dq, MatrixX<Scalar>& dk,
                           MatrixX<Scalar>& dv) {
  s.d_out = d_out_in;
  dv.noalias() = c.weights.transpose() * s.d_out;
  s.d_weights.noalias() = s.d_out * v.transpose();
  s.d_logits.resize(s.d_weights.rows(), s.d_weights.cols());
  const Scalar inv_scale = Scalar(1) / scale;
  for (Index i = 0; i < s.d_weights.rows(); ++i) {
    const Scalar dot = s.d_weights.row(i).dot(c.weights.row(i));
    s.d_logits.row(i) =
        (c.weights.row(i).array() * (s.d_weights.row(i).array() - dot)) * inv_scale;
  }
  s.d_qn.noalias() = s.d_logits * c.kn;
  s.d_kn.noalias() = s.d_logits.transpose() * c.qn;
  dq.resize(s.d_qn.rows(), s.d_qn.cols());
  dk.resize(s.d_kn.rows(), s.d_kn.cols());
  for (Index i = 0; i < dq.rows(); ++i) {
    const Scalar r = c.q_norm[i];
    if (r > Scalar(0)) {
      const Scalar proj = c.qn.row(i).dot(s.d_qn.row(i));
      dq.row(i) = (s.d_qn.row(i) - proj * c.qn.row(i)) / r;
    } else {
      dq.row(i).setZero();
    }
  }
  for (Index i = 0; i < dk.rows(); ++i) {
    const Scalar r = c.k_norm[i];
    if (r > Scalar(0)) {
      const Scalar proj = c.kn.row(i).dot(s.d_kn.row(i));
      dk.row(i) = (s.d_kn.row(i) - proj * c.kn.row(i)) / r;
    } else {
      dk.row(i).setZero();
    }
  }
}

}  // namespace clhad
