#pragma once

#include <cmath>

#include "clhad/nn/params.hpp"
#include "clhad/rng.hpp"
#include "clhad/types.hpp"

namespace clhad {

enum class Activation { Linear, Leaky, Sigmoid };

template <typename Scalar>
void apply_activation(MatrixX<Scalar>& z, Activation act, Scalar leak) {
  switch (act) {
    case Activation::Linear:
      return;
    case Activation::Leaky:
      z = z.array().max(z.array() * leak);
      return;
    case Activation::Sigmoid:
      z = (Scalar(1) + (-z.array()).exp()).inverse();
      return;
  }
}

// Derivative from the cached pre-activation (Leaky) or output (Sigmoid).
template <typename Scalar>
MatrixX<Scalar> activation_grad(const MatrixX<Scalar>& pre, const MatrixX<Scalar>& out,
                                Activation act, Scalar leak) {
  switch (act) {
    case Activation::Linear:
      return MatrixX<Scalar>::Ones(pre.rows(), pre.cols());
    case Activation::Leaky:
      return (pre.array() > Scalar(0)).select(MatrixX<Scalar>::Ones(pre.rows(), pre.cols()),
                                              MatrixX<Scalar>::Constant(pre.rows(), pre.cols(), leak));
    case Activation::Sigmoid:
      return (out.array() * (Scalar(1) - out.array())).matrix();
  }
  return {};
}

template <typename Scalar>
void gelu_inplace(MatrixX<Scalar>& z) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  z = z.unaryExpr([](Scalar x) {
    return static_cast<Scalar>(0.5 * static_cast<double>(x) *
                               (1.0 + std::erf(static_cast<double>(x) * inv_sqrt2)));
  });
}

template <typename Scalar>
MatrixX<Scalar> gelu_grad(const MatrixX<Scalar>& pre) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return pre.unaryExpr([](Scalar xs) {
    const double x = static_cast<double>(xs);
    const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
    const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
    return static_cast<Scalar>(cdf + x * pdf);
  });
}

// Affine layer, y = x * W + b with W stored (in x out).
template <typename Scalar>
struct Dense {
  Index in = 0, out = 0;
  Index w_off = 0, b_off = 0;

  static Dense allocate(Index in, Index out, Index& cursor) {
    Dense d;
    d.in = in;
    d.out = out;
    d.w_off = cursor;
    cursor += in * out;
    d.b_off = cursor;
    cursor += out;
    return d;
  }

  Index params() const { return in * out + out; }

  void init(ParamStore<Scalar>& ps, Rng& rng) const {
    auto W = ps.mat(w_off, in, out);
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Index j = 0; j < out; ++j)
      for (Index i = 0; i < in; ++i) W(i, j) = static_cast<Scalar>(rng.uniform(-a, a));
    ps.vec(b_off, out).setZero();
  }

  MatrixX<Scalar> forward(const ParamStore<Scalar>& ps, const MatrixX<Scalar>& x) const {
    MatrixX<Scalar> z = x * ps.mat(w_off, in, out);
    z.rowwise() += ps.vec(b_off, out).transpose();
    return z;
  }

  // Accumulates dW/db, returns dX.
  MatrixX<Scalar> backward(ParamStore<Scalar>& ps, const MatrixX<Scalar>& x,
                           const MatrixX<Scalar>& dz) const {
    ps.gmat(w_off, in, out).noalias() += x.transpose() * dz;
    ps.gvec(b_off, out) += dz.colwise().sum().transpose();
    return dz * ps.mat(w_off, in, out).transpose();
  }
};

// Inverted dropout; masks are sampled column-major so a reseeded rng
// reproduces them exactly.
template <typename Scalar>
MatrixX<Scalar> dropout_mask(Index rows, Index cols, Scalar rate, Rng& rng) {
  MatrixX<Scalar> mask(rows, cols);
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - rate);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      mask(i, j) = (static_cast<Scalar>(rng.uniform()) >= rate) ? keep_scale : Scalar(0);
  return mask;
}

}  // namespace clhad
