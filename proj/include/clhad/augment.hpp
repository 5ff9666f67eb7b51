#pragma once

#include "clhad/rng.hpp"
#include "clhad/types.hpp"

namespace clhad {

// Per-sample draws of the differentiable augmentation: brightness shift,
// contrast scale about the sample mean, blend weight toward the sample mean.
template <typename Scalar>
struct AugmentDraws {
  VectorX<Scalar> shift;  // U(-0.2, 0.2)
  VectorX<Scalar> scale;  // U(0.5, 1.5)
  VectorX<Scalar> blend;  // U(0, 1)
};

template <typename Scalar>
AugmentDraws<Scalar> sample_augment_draws(Index n, Rng& rng) {
  AugmentDraws<Scalar> d;
  d.shift.resize(n);
  d.scale.resize(n);
  d.blend.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.shift[i] = static_cast<Scalar>(rng.uniform(-0.2, 0.2));
    d.scale[i] = static_cast<Scalar>(rng.uniform(0.5, 1.5));
    d.blend[i] = static_cast<Scalar>(rng.uniform(0.0, 1.0));
  }
  return d;
}

// Brightness, then contrast, then the saturation analog, each differentiable
// in the input. Neutral draws (0, 1, 0) give the identity.
template <typename Scalar>
MatrixX<Scalar> diff_augment(const MatrixX<Scalar>& batch, const AugmentDraws<Scalar>& d) {
  const Scalar dim = static_cast<Scalar>(batch.cols());
  MatrixX<Scalar> out(batch.rows(), batch.cols());
  for (Index i = 0; i < batch.rows(); ++i) {
    RowVectorX<Scalar> y = batch.row(i).array() + d.shift[i];
    const Scalar m1 = y.sum() / dim;
    y = (y.array() - m1) * d.scale[i] + m1;
    const Scalar m2 = y.sum() / dim;
    out.row(i) = (Scalar(1) - d.blend[i]) * y.array() + d.blend[i] * m2;
  }
  return out;
}

template <typename Scalar>
MatrixX<Scalar> diff_augment(const MatrixX<Scalar>& batch, Rng& rng,
                             AugmentDraws<Scalar>* draws_out = nullptr) {
  AugmentDraws<Scalar> d = sample_augment_draws<Scalar>(batch.rows(), rng);
  MatrixX<Scalar> out = diff_augment(batch, d);
  if (draws_out) *draws_out = std::move(d);
  return out;
}

// Jacobian-transpose product for fixed draws: each stage is affine per
// sample with a rank-one mean-coupling term.
template <typename Scalar>
MatrixX<Scalar> diff_augment_backward(const MatrixX<Scalar>& d_out,
                                      const AugmentDraws<Scalar>& d) {
  const Scalar dim = static_cast<Scalar>(d_out.cols());
  MatrixX<Scalar> dx(d_out.rows(), d_out.cols());
  for (Index i = 0; i < d_out.rows(); ++i) {
    const Scalar u = d.blend[i];
    const Scalar s = d.scale[i];
    RowVectorX<Scalar> g = d_out.row(i);
    // saturation: y3 = (1-u) y2 + u * mean(y2)
    RowVectorX<Scalar> g2 = (Scalar(1) - u) * g.array() + u * (g.sum() / dim);
    // contrast: y2 = s (y1 - m1) + m1
    dx.row(i) = s * g2.array() + (Scalar(1) - s) * (g2.sum() / dim);
  }
  return dx;
}

}  // namespace clhad
