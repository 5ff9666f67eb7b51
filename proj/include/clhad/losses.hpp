#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "clhad/error.hpp"
#include "clhad/types.hpp"

namespace clhad {

// Probabilities are clamped to [kProbEps, 1-kProbEps] before any log.
constexpr double kProbEps = 1e-7;

struct LossWeights {
  double lambda_af = 0.1;
  double lambda_cl = 0.9;
  double beta = 1.0;                // scales lambda_af; 0 = no forgetting pressure
  std::vector<double> beta_grid;   // empty means fixed beta

  void validate() const {
    if (lambda_af < 0 || lambda_cl < 0) throw ArgumentError("loss weights must be >= 0");
    if (beta < 0 || beta > 1) throw ArgumentError("beta must lie in [0,1]");
    for (double b : beta_grid)
      if (b < 0 || b > 1) throw ArgumentError("beta grid values must lie in [0,1]");
  }
};

struct LossBreakdown {
  double l_recon = 0;
  double l_g = 0;
  double l_d = 0;
  double l_af = 0;
  double l_cl = 0;

  double total() const { return l_recon + l_g + l_d + l_af + l_cl; }
};

// Mean squared error over all entries.
template <typename Scalar>
double recon_loss(const MatrixX<Scalar>& input, const MatrixX<Scalar>& output) {
  if (input.rows() != output.rows() || input.cols() != output.cols())
    throw ShapeError("recon_loss: shapes differ");
  const double n = static_cast<double>(input.size());
  return (output - input).template cast<double>().squaredNorm() / n;
}

template <typename Scalar>
MatrixX<Scalar> recon_loss_grad(const MatrixX<Scalar>& input, const MatrixX<Scalar>& output) {
  const Scalar inv = Scalar(2) / static_cast<Scalar>(input.size());
  return (output - input) * inv;
}

template <typename Scalar>
Scalar clamp_prob(Scalar p) {
  return std::min(static_cast<Scalar>(1.0 - kProbEps),
                  std::max(static_cast<Scalar>(kProbEps), p));
}

// Eq-form adversarial pair: l_g = mean log(1 - d_fake),
// l_d = -mean[log d_real + log(1 - d_fake)].
template <typename Scalar>
std::pair<double, double> adversarial_losses(const VectorX<Scalar>& d_real,
                                             const VectorX<Scalar>& d_fake) {
  double lg = 0, ld = 0;
  for (Index i = 0; i < d_fake.size(); ++i)
    lg += std::log(1.0 - static_cast<double>(clamp_prob(d_fake[i])));
  lg /= std::max<Index>(d_fake.size(), 1);
  for (Index i = 0; i < d_real.size(); ++i)
    ld -= std::log(static_cast<double>(clamp_prob(d_real[i])));
  for (Index i = 0; i < d_fake.size(); ++i)
    ld -= std::log(1.0 - static_cast<double>(clamp_prob(d_fake[i])));
  ld /= std::max<Index>(std::max(d_real.size(), d_fake.size()), 1);
  return {lg, ld};
}

// Generator objective alone: mean log(1 - d_fake).
template <typename Scalar>
double generator_loss(const VectorX<Scalar>& d_fake) {
  double lg = 0;
  for (Index i = 0; i < d_fake.size(); ++i)
    lg += std::log(1.0 - static_cast<double>(clamp_prob(d_fake[i])));
  return lg / std::max<Index>(d_fake.size(), 1);
}

// d l_g / d d_fake; zero where the clamp binds.
template <typename Scalar>
VectorX<Scalar> generator_loss_grad(const VectorX<Scalar>& d_fake) {
  VectorX<Scalar> g(d_fake.size());
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(d_fake.size());
  for (Index i = 0; i < d_fake.size(); ++i) {
    const Scalar p = d_fake[i];
    g[i] = (p > Scalar(kProbEps) && p < Scalar(1.0 - kProbEps))
               ? -inv_n / (Scalar(1) - p)
               : Scalar(0);
  }
  return g;
}

// d l_d / d (d_real, d_fake).
template <typename Scalar>
std::pair<VectorX<Scalar>, VectorX<Scalar>> discriminator_loss_grad(
    const VectorX<Scalar>& d_real, const VectorX<Scalar>& d_fake) {
  const Scalar inv_n =
      Scalar(1) / static_cast<Scalar>(std::max(d_real.size(), d_fake.size()));
  VectorX<Scalar> gr(d_real.size()), gf(d_fake.size());
  for (Index i = 0; i < d_real.size(); ++i) {
    const Scalar p = d_real[i];
    gr[i] = (p > Scalar(kProbEps) && p < Scalar(1.0 - kProbEps)) ? -inv_n / p : Scalar(0);
  }
  for (Index i = 0; i < d_fake.size(); ++i) {
    const Scalar p = d_fake[i];
    gf[i] = (p > Scalar(kProbEps) && p < Scalar(1.0 - kProbEps))
                ? inv_n / (Scalar(1) - p)
                : Scalar(0);
  }
  return {std::move(gr), std::move(gf)};
}

// Synaptic expansion-convergence penalty: lambda * sum of squared parameters.
template <typename Scalar>
double af_loss(const VectorX<Scalar>& params, double lambda_af) {
  return lambda_af * params.template cast<double>().squaredNorm();
}

template <typename Scalar>
VectorX<Scalar> af_loss_grad(const VectorX<Scalar>& params, double lambda_af) {
  return params * static_cast<Scalar>(2.0 * lambda_af);
}

// Gram decorrelation on replayed reconstructions. Rows are scaled to unit
// norm, then loss = lambda * || (1/B) F^T F + (1/P') Fm^T Fm - I ||_F with Fm
// the mask-restricted rows (default: all rows, so both Gram terms coincide).
template <typename Scalar>
double cl_loss(const MatrixX<Scalar>& reconstructed_replay, double lambda_cl,
               const std::vector<Index>* mask_rows = nullptr,
               MatrixX<Scalar>* grad_out = nullptr) {
  const Index rows = reconstructed_replay.rows();
  const Index dim = reconstructed_replay.cols();
  if (rows < 1) throw ArgumentError("cl_loss: need at least one replay row");

  MatrixX<Scalar> f(rows, dim);
  VectorX<Scalar> norms(rows);
  for (Index i = 0; i < rows; ++i) {
    const Scalar r = reconstructed_replay.row(i).norm();
    norms[i] = r;
    if (r > Scalar(0))
      f.row(i) = reconstructed_replay.row(i) / r;
    else
      f.row(i) = reconstructed_replay.row(i);
  }

  std::vector<Index> all_rows;
  const std::vector<Index>* mask = mask_rows;
  if (!mask) {
    all_rows.resize(static_cast<std::size_t>(rows));
    for (Index i = 0; i < rows; ++i) all_rows[static_cast<std::size_t>(i)] = i;
    mask = &all_rows;
  }
  if (mask->empty()) throw ArgumentError("cl_loss: mask must select at least one row");

  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(rows);
  const Scalar inv_p = Scalar(1) / static_cast<Scalar>(mask->size());
  MatrixX<Scalar> gram = inv_b * (f.transpose() * f);
  MatrixX<Scalar> fm(static_cast<Index>(mask->size()), dim);
  for (std::size_t r = 0; r < mask->size(); ++r) fm.row(static_cast<Index>(r)) = f.row((*mask)[r]);
  gram.noalias() += inv_p * (fm.transpose() * fm);
  gram.diagonal().array() -= Scalar(1);

  const double fro = std::sqrt(gram.template cast<double>().squaredNorm());
  const double loss = lambda_cl * fro;

  if (grad_out) {
    grad_out->setZero(rows, dim);
    if (fro > 0) {
      const MatrixX<Scalar> dM =
          gram * static_cast<Scalar>(lambda_cl / fro);  // symmetric
      MatrixX<Scalar> df = (Scalar(2) * inv_b) * (f * dM);
      const MatrixX<Scalar> dfm = (Scalar(2) * inv_p) * (fm * dM);
      for (std::size_t r = 0; r < mask->size(); ++r)
        df.row((*mask)[r]) += dfm.row(static_cast<Index>(r));
      for (Index i = 0; i < rows; ++i) {
        if (norms[i] > Scalar(0)) {
          const Scalar proj = f.row(i).dot(df.row(i));
          grad_out->row(i) = (df.row(i) - proj * f.row(i)) / norms[i];
        }
      }
    }
  }
  return loss;
}

// Grid search for the forgetting factor: argmax fitness, ties broken toward
// the smaller candidate (less forgetting).
inline double select_beta(const std::vector<double>& candidates,
                          const std::function<double(double)>& eval_fn) {
  if (candidates.empty()) throw ArgumentError("select_beta: empty candidate grid");
  std::vector<double> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  for (double b : sorted)
    if (b < 0 || b > 1) throw ArgumentError("select_beta: candidates must lie in [0,1]");
  double best = sorted.front();
  double best_fit = eval_fn(best);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double fit = eval_fn(sorted[i]);
    if (fit > best_fit) {
      best_fit = fit;
      best = sorted[i];
    }
  }
  return best;
}

}  // namespace clhad
