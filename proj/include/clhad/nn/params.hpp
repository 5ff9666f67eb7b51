#pragma once

#include <cmath>
#include <cstdint>

#include "clhad/types.hpp"

namespace clhad {

// Flat parameter vector shared by all sub-networks, with matching gradient
// and Adam moment buffers. Layers hold offsets into it and bind Eigen maps on
// demand, so the storage can be serialized or swapped wholesale.
template <typename Scalar>
struct ParamStore {
  VectorX<Scalar> values;
  VectorX<Scalar> grads;
  VectorX<Scalar> m;
  VectorX<Scalar> v;

  void resize(Index n) {
    values = VectorX<Scalar>::Zero(n);
    grads = VectorX<Scalar>::Zero(n);
    m = VectorX<Scalar>::Zero(n);
    v = VectorX<Scalar>::Zero(n);
  }

  Index size() const { return values.size(); }

  Eigen::Map<MatrixX<Scalar>> mat(Index off, Index rows, Index cols) {
    return {values.data() + off, rows, cols};
  }
  Eigen::Map<const MatrixX<Scalar>> mat(Index off, Index rows, Index cols) const {
    return {values.data() + off, rows, cols};
  }
  Eigen::Map<VectorX<Scalar>> vec(Index off, Index n) { return {values.data() + off, n}; }
  Eigen::Map<const VectorX<Scalar>> vec(Index off, Index n) const {
    return {values.data() + off, n};
  }

  Eigen::Map<MatrixX<Scalar>> gmat(Index off, Index rows, Index cols) {
    return {grads.data() + off, rows, cols};
  }
  Eigen::Map<VectorX<Scalar>> gvec(Index off, Index n) { return {grads.data() + off, n}; }
};

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update over [begin, begin+len), consuming and clearing the
// gradient range. `step` is the 1-based update count for this range.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& ps, Index begin, Index len, const AdamConfig& cfg,
               std::int64_t step) {
  auto g = ps.grads.segment(begin, len).array();
  auto m = ps.m.segment(begin, len).array();
  auto v = ps.v.segment(begin, len).array();
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  m = b1 * m + (Scalar(1) - b1) * g;
  v = b2 * v + (Scalar(1) - b2) * g.square();
  const Scalar corr1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const Scalar corr2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar eps = static_cast<Scalar>(cfg.eps);
  ps.values.segment(begin, len).array() -=
      lr * (m / corr1) / ((v / corr2).sqrt() + eps);
  g = Scalar(0);
}

}  // namespace clhad
