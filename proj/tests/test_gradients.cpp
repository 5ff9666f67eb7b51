#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "clhad/augment.hpp"
#include "clhad/losses.hpp"
#include "clhad/nn/model.hpp"

using namespace clhad;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

double rel_err(double a, double b) {
  const double denom = std::max(std::abs(a) + std::abs(b), 1e-6);
  return std::abs(a - b) / denom;
}

// Central finite differences over every entry of `theta` against `analytic`.
double max_fd_error(VectorX<double>& theta, const VectorX<double>& analytic,
                    const std::function<double()>& eval) {
  double worst = 0;
  for (Index i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + kStep;
    const double fp = eval();
    theta[i] = orig - kStep;
    const double fm = eval();
    theta[i] = orig;
    const double fd = (fp - fm) / (2 * kStep);
    worst = std::max(worst, rel_err(fd, analytic[i]));
  }
  return worst;
}

BioGan<double> small_model(std::uint64_t seed) {
  GeneratorConfig g;
  g.input_dim = 12;
  g.hidden = {6, 4};
  g.latent = 3;
  DiscriminatorConfig d;
  d.input_dim = 12;
  d.msc_channels = 2;  // feature width 6
  d.attn_dim = 2;
  d.ffn_hidden = 5;
  d.head_hidden = 4;
  d.dropout = 0.25;
  return BioGan<double>(g, d, seed);
}

MatrixX<double> random_batch(Index n, Index dim, std::uint64_t seed) {
  Rng rng(seed);
  MatrixX<double> x(n, dim);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(0.05, 0.95);
  return x;
}

}  // namespace

TEST_CASE("generator gradient of the reconstruction loss matches finite differences") {
  BioGan<double> model = small_model(3);
  const MatrixX<double> batch = random_batch(4, 12, 31);

  model.params.grads.setZero();
  GeneratorCache<double> cache;
  const MatrixX<double> recon = model.generator.forward(model.params, batch, &cache);
  model.generator.backward(model.params, cache, recon_loss_grad(batch, recon));
  const VectorX<double> analytic =
      model.params.grads.segment(model.generator.param_begin(), model.generator.param_count());

  VectorX<double> view = model.params.values.segment(model.generator.param_begin(),
                                                     model.generator.param_count());
  auto eval = [&]() {
    model.params.values.segment(model.generator.param_begin(), model.generator.param_count()) =
        view;
    return recon_loss(batch, model.generator.forward(model.params, batch));
  };
  CHECK(max_fd_error(view, analytic, eval) < kTol);
}

TEST_CASE("discriminator gradient of E[log D] matches finite differences") {
  BioGan<double> model = small_model(7);
  const MatrixX<double> batch = random_batch(4, 12, 41);
  const std::uint64_t mask_seed = 99;

  model.params.grads.setZero();
  DiscriminatorCache<double> cache;
  Rng rng(mask_seed);
  const VectorX<double> probs =
      model.discriminator.forward(model.params, batch, RunMode::Train, &rng, &cache);
  VectorX<double> dp(probs.size());
  for (Index i = 0; i < probs.size(); ++i)
    dp[i] = 1.0 / (static_cast<double>(probs.size()) * probs[i]);
  model.discriminator.backward(model.params, cache, dp);
  const VectorX<double> analytic = model.params.grads.segment(
      model.discriminator.param_begin(), model.discriminator.param_count());

  VectorX<double> view = model.params.values.segment(model.discriminator.param_begin(),
                                                     model.discriminator.param_count());
  auto eval = [&]() {
    model.params.values.segment(model.discriminator.param_begin(),
                                model.discriminator.param_count()) = view;
    Rng r(mask_seed);
    const VectorX<double> p =
        model.discriminator.forward(model.params, batch, RunMode::Train, &r);
    double acc = 0;
    for (Index i = 0; i < p.size(); ++i) acc += std::log(p[i]);
    return acc / static_cast<double>(p.size());
  };
  CHECK(max_fd_error(view, analytic, eval) < kTol);
}

TEST_CASE("discriminator adversarial loss gradient matches finite differences") {
  BioGan<double> model = small_model(13);
  const MatrixX<double> real = random_batch(4, 12, 51);
  const MatrixX<double> seed_batch = random_batch(4, 12, 52);
  const std::uint64_t stream_seed = 7;

  // fixed fake inputs: Diff(G(x)) with frozen draws
  Rng draw_rng(stream_seed);
  AugmentDraws<double> draws = sample_augment_draws<double>(4, draw_rng);
  const MatrixX<double> fake = diff_augment(model.generator.forward(model.params, seed_batch), draws);

  model.params.grads.setZero();
  DiscriminatorCache<double> c_real, c_fake;
  Rng rng(stream_seed + 1);
  const VectorX<double> p_real =
      model.discriminator.forward(model.params, real, RunMode::Train, &rng, &c_real);
  const VectorX<double> p_fake =
      model.discriminator.forward(model.params, fake, RunMode::Train, &rng, &c_fake);
  const auto [g_real, g_fake] = discriminator_loss_grad(p_real, p_fake);
  model.discriminator.backward(model.params, c_real, g_real);
  model.discriminator.backward(model.params, c_fake, g_fake);
  const VectorX<double> analytic = model.params.grads.segment(
      model.discriminator.param_begin(), model.discriminator.param_count());

  VectorX<double> view = model.params.values.segment(model.discriminator.param_begin(),
                                                     model.discriminator.param_count());
  auto eval = [&]() {
    model.params.values.segment(model.discriminator.param_begin(),
                                model.discriminator.param_count()) = view;
    Rng r(stream_seed + 1);
    const VectorX<double> pr =
        model.discriminator.forward(model.params, real, RunMode::Train, &r);
    const VectorX<double> pf =
        model.discriminator.forward(model.params, fake, RunMode::Train, &r);
    return adversarial_losses(pr, pf).second;
  };
  CHECK(max_fd_error(view, analytic, eval) < kTol);
}

TEST_CASE("generator adversarial chain G -> Diff -> D matches finite differences") {
  BioGan<double> model = small_model(17);
  const MatrixX<double> batch = random_batch(4, 12, 61);
  const std::uint64_t stream_seed = 23;

  Rng draw_rng(stream_seed);
  const AugmentDraws<double> draws = sample_augment_draws<double>(4, draw_rng);

  model.params.grads.setZero();
  GeneratorCache<double> g_cache;
  DiscriminatorCache<double> d_cache;
  const MatrixX<double> recon = model.generator.forward(model.params, batch, &g_cache);
  const MatrixX<double> aug = diff_augment(recon, draws);
  Rng rng(stream_seed + 1);
  const VectorX<double> p_fake =
      model.discriminator.forward(model.params, aug, RunMode::Train, &rng, &d_cache);
  const MatrixX<double> d_aug =
      model.discriminator.backward(model.params, d_cache, generator_loss_grad(p_fake));
  model.generator.backward(model.params, g_cache, diff_augment_backward(d_aug, draws));
  const VectorX<double> analytic =
      model.params.grads.segment(model.generator.param_begin(), model.generator.param_count());

  VectorX<double> view = model.params.values.segment(model.generator.param_begin(),
                                                     model.generator.param_count());
  auto eval = [&]() {
    model.params.values.segment(model.generator.param_begin(), model.generator.param_count()) =
        view;
    const MatrixX<double> r = model.generator.forward(model.params, batch);
    const MatrixX<double> a = diff_augment(r, draws);
    Rng rr(stream_seed + 1);
    const VectorX<double> p = model.discriminator.forward(model.params, a, RunMode::Train, &rr);
    return generator_loss(p);
  };
  CHECK(max_fd_error(view, analytic, eval) < kTol);
}

TEST_CASE("AF loss gradient is 2*lambda*theta and matches finite differences") {
  Rng rng(5);
  VectorX<double> theta(40);
  for (Index i = 0; i < theta.size(); ++i) theta[i] = rng.uniform(-1, 1);
  const double lambda = 0.1;
  const VectorX<double> analytic = af_loss_grad(theta, lambda);
  CHECK((analytic - 2.0 * lambda * theta).cwiseAbs().maxCoeff() < 1e-12);
  auto eval = [&]() { return af_loss(theta, lambda); };
  CHECK(max_fd_error(theta, analytic, eval) < kTol);
}

TEST_CASE("CL loss gradient w.r.t. its input matches finite differences") {
  Rng rng(6);
  MatrixX<double> recon(5, 8);
  for (Index i = 0; i < recon.size(); ++i) recon.data()[i] = rng.uniform(0.1, 0.9);
  MatrixX<double> analytic;
  cl_loss(recon, 0.9, nullptr, &analytic);

  VectorX<double> flat = Eigen::Map<VectorX<double>>(recon.data(), recon.size());
  VectorX<double> analytic_flat =
      Eigen::Map<VectorX<double>>(analytic.data(), analytic.size());
  auto eval = [&]() {
    Eigen::Map<VectorX<double>>(recon.data(), recon.size()) = flat;
    return cl_loss(recon, 0.9);
  };
  CHECK(max_fd_error(flat, analytic_flat, eval) < kTol);
}

TEST_CASE("CL loss gradient with a proper mask subset matches finite differences") {
  Rng rng(16);
  MatrixX<double> recon(6, 5);
  for (Index i = 0; i < recon.size(); ++i) recon.data()[i] = rng.uniform(0.1, 0.9);
  const std::vector<Index> mask = {0, 2, 5};
  MatrixX<double> analytic;
  cl_loss(recon, 0.7, &mask, &analytic);

  VectorX<double> flat = Eigen::Map<VectorX<double>>(recon.data(), recon.size());
  VectorX<double> analytic_flat =
      Eigen::Map<VectorX<double>>(analytic.data(), analytic.size());
  auto eval = [&]() {
    Eigen::Map<VectorX<double>>(recon.data(), recon.size()) = flat;
    return cl_loss(recon, 0.7, &mask);
  };
  CHECK(max_fd_error(flat, analytic_flat, eval) < kTol);
}

TEST_CASE("CL loss chained through the generator matches finite differences") {
  BioGan<double> model = small_model(29);
  const MatrixX<double> replay = random_batch(3, 12, 71);

  model.params.grads.setZero();
  GeneratorCache<double> cache;
  const MatrixX<double> recon = model.generator.forward(model.params, replay, &cache);
  MatrixX<double> d_recon;
  cl_loss(recon, 0.9, nullptr, &d_recon);
  model.generator.backward(model.params, cache, d_recon);
  const VectorX<double> analytic =
      model.params.grads.segment(model.generator.param_begin(), model.generator.param_count());

  VectorX<double> view = model.params.values.segment(model.generator.param_begin(),
                                                     model.generator.param_count());
  auto eval = [&]() {
    model.params.values.segment(model.generator.param_begin(), model.generator.param_count()) =
        view;
    return cl_loss(model.generator.forward(model.params, replay), 0.9);
  };
  CHECK(max_fd_error(view, analytic, eval) < kTol);
}

TEST_CASE("diff_augment input Jacobian matches finite differences") {
  Rng rng(8);
  MatrixX<double> x(3, 10);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(0.1, 0.9);
  Rng draw_rng(18);
  const AugmentDraws<double> draws = sample_augment_draws<double>(3, draw_rng);
  MatrixX<double> weights(3, 10);
  for (Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.uniform(-1, 1);

  const MatrixX<double> analytic = diff_augment_backward(weights, draws);
  VectorX<double> flat = Eigen::Map<VectorX<double>>(x.data(), x.size());
  VectorX<double> analytic_flat(analytic.size());
  analytic_flat = Eigen::Map<const VectorX<double>>(analytic.data(), analytic.size());
  auto eval = [&]() {
    Eigen::Map<VectorX<double>>(x.data(), x.size()) = flat;
    return (diff_augment(x, draws).array() * weights.array()).sum();
  };
  CHECK(max_fd_error(flat, analytic_flat, eval) < kTol);
}

TEST_CASE("adversarial probability-space gradients match finite differences") {
  Rng rng(9);
  VectorX<double> pr(6), pf(6);
  for (Index i = 0; i < 6; ++i) {
    pr[i] = rng.uniform(0.1, 0.9);
    pf[i] = rng.uniform(0.1, 0.9);
  }
  const auto [gr, gf] = discriminator_loss_grad(pr, pf);
  auto eval_d = [&]() { return adversarial_losses(pr, pf).second; };
  CHECK(max_fd_error(pr, gr, eval_d) < kTol);
  CHECK(max_fd_error(pf, gf, eval_d) < kTol);

  const VectorX<double> gg = generator_loss_grad(pf);
  auto eval_g = [&]() { return generator_loss(pf); };
  CHECK(max_fd_error(pf, gg, eval_g) < kTol);
}
