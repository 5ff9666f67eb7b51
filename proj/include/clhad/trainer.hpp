#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clhad/augment.hpp"
#include "clhad/bsm.hpp"
#include "clhad/cube.hpp"
#include "clhad/losses.hpp"
#include "clhad/nn/model.hpp"
#include "clhad/replay.hpp"

namespace clhad {

enum class TrainMode { Continual, FineTune, Joint, SingleTask };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode mode);

struct TrainConfig {
  double mu = 0.99;            // SBSS threshold
  int P = 3;                   // clustering groups
  int w = 3;                   // SSNS window
  double lambda_af = 0.1;
  double lambda_cl = 0.9;
  double learning_rate = 0.00005;
  int epochs = 200;            // H
  int batch_size = 64;         // B_b
  std::uint64_t seed = 0;
  double beta = 1.0;           // fixed forgetting factor when beta_grid is empty
  std::vector<double> beta_grid;
  TrainMode mode = TrainMode::Continual;
  int steps_per_epoch = 0;     // 0 = ceil(n_b / batch) capped at 8
  int replay_interval = 4;     // replay joins every k-th generator step
  double dropout = 0.1;

  void validate() const {
    if (!(mu > 0.0) || mu > 1.0) throw ArgumentError("config: mu must be in (0,1]");
    if (P < 1) throw ArgumentError("config: P must be >= 1");
    if (w < 1 || w % 2 == 0) throw ArgumentError("config: w must be odd and >= 1");
    if (lambda_af < 0 || lambda_cl < 0) throw ArgumentError("config: lambdas must be >= 0");
    if (!(learning_rate > 0)) throw ArgumentError("config: learning_rate must be > 0");
    if (epochs < 1) throw ArgumentError("config: epochs must be >= 1");
    if (batch_size < 1) throw ArgumentError("config: batch_size must be >= 1");
    if (beta < 0 || beta > 1) throw ArgumentError("config: beta must lie in [0,1]");
    for (double b : beta_grid)
      if (b < 0 || b > 1) throw ArgumentError("config: beta_grid values must lie in [0,1]");
    if (steps_per_epoch < 0) throw ArgumentError("config: steps_per_epoch must be >= 0");
    if (replay_interval < 1) throw ArgumentError("config: replay_interval must be >= 1");
    if (dropout < 0 || dropout >= 1) throw ArgumentError("config: dropout must be in [0,1)");
  }
};

struct TaskStream {
  std::vector<std::filesystem::path> cube_paths;
};

// Loads every task cube; band alignment and normalization happen inside the
// training entry points.
std::vector<HsiCube> load_stream(const TaskStream& stream);

struct LossRecord {
  int task = 0;
  int epoch = 0;
  int step = 0;
  LossBreakdown losses;
  double beta = 1.0;
};
using LossSink = std::function<void(const LossRecord&)>;

template <typename Scalar>
struct TaskCheckpoint {
  BioGan<Scalar> model;
  ReplayBuffer<Scalar> buffer;
  std::string task_name;
};

template <typename Scalar>
struct CheckpointSet {
  std::vector<TaskCheckpoint<Scalar>> tasks;
  int common_bands = 0;
};

namespace detail {

constexpr std::uint64_t kTagTaskRng = 0x7461736b;
constexpr std::uint64_t kTagKmeans = 0x6b6d6e73;
constexpr std::uint64_t kTagProbe = 0x70726f62;

template <typename Scalar>
BioGan<Scalar> fresh_model(Index input_dim, const TrainConfig& cfg) {
  GeneratorConfig g = GeneratorConfig::defaults(input_dim);
  DiscriminatorConfig d = DiscriminatorConfig::defaults(input_dim);
  d.dropout = cfg.dropout;
  return BioGan<Scalar>(g, d, cfg.seed);
}

template <typename Scalar>
struct MiniBatcher {
  explicit MiniBatcher(Index n, Rng& rng) : perm(static_cast<std::size_t>(n)), rng_(&rng) {
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = static_cast<int>(i);
    rng.shuffle(perm);
  }
  std::vector<int> next(Index count) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      if (cursor == perm.size()) {
        rng_->shuffle(perm);
        cursor = 0;
      }
      out.push_back(perm[cursor++]);
    }
    return out;
  }
  std::vector<int> perm;
  std::size_t cursor = 0;
  Rng* rng_;
};

template <typename Scalar>
MatrixX<Scalar> gather_rows(const MatrixX<Scalar>& data, const std::vector<int>& rows) {
  MatrixX<Scalar> out(static_cast<Index>(rows.size()), data.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Index>(r)) = data.row(rows[r]);
  return out;
}

// One alternating D/G pass over `epochs` epochs of `steps` mini-batches.
// `acl_beta` < 0 disables the AF and CL terms entirely (task 1 branch and
// the fine-tune baseline); otherwise it scales lambda_af.
template <typename Scalar>
void train_one_task(BioGan<Scalar>& model, const MatrixX<Scalar>& background,
                    const ReplayBuffer<Scalar>& replay, const TrainConfig& cfg, int task,
                    double acl_beta, Rng& rng, const LossSink& sink) {
  const Index n_b = background.rows();
  const Index batch = std::min<Index>(cfg.batch_size, n_b);
  const Index auto_steps = std::min<Index>((n_b + batch - 1) / batch, 8);
  const Index steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : auto_steps;
  const bool use_acl = acl_beta >= 0.0;
  const double eff_lambda_af = use_acl ? cfg.lambda_af * acl_beta : 0.0;

  const AdamConfig adam{cfg.learning_rate, 0.5, 0.999, 1e-8};
  const Index g_begin = model.generator.param_begin();
  const Index g_count = model.generator.param_count();
  const Index d_begin = model.discriminator.param_begin();
  const Index d_count = model.discriminator.param_count();

  MiniBatcher<Scalar> batcher(n_b, rng);
  GeneratorCache<Scalar> g_cache, g_cache_replay;
  DiscriminatorCache<Scalar> d_cache_real, d_cache_fake;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int step = 0; step < steps; ++step) {
      const std::vector<int> idx = batcher.next(batch);
      const MatrixX<Scalar> xb = gather_rows(background, idx);

      // --- discriminator step: real rows drawn from B_t u G(B_t) ---------
      const MatrixX<Scalar> recon_detached = model.generator.forward(model.params, xb);
      MatrixX<Scalar> xd(batch, background.cols());
      for (Index r = 0; r < batch; ++r) {
        const Index pick = static_cast<Index>(rng.uniform_index(2 * static_cast<std::uint64_t>(batch)));
        xd.row(r) = pick < batch ? xb.row(pick) : recon_detached.row(pick - batch);
      }
      const VectorX<Scalar> d_real =
          model.discriminator.forward(model.params, xd, RunMode::Train, &rng, &d_cache_real);
      const MatrixX<Scalar> fake_d =
          diff_augment(model.generator.forward(model.params, xd), rng);
      const VectorX<Scalar> d_fake =
          model.discriminator.forward(model.params, fake_d, RunMode::Train, &rng, &d_cache_fake);
      const double l_d = adversarial_losses(d_real, d_fake).second;
      const auto [grad_real, grad_fake] = discriminator_loss_grad(d_real, d_fake);
      model.discriminator.backward(model.params, d_cache_real, grad_real);
      model.discriminator.backward(model.params, d_cache_fake, grad_fake);
      if (eff_lambda_af > 0)
        model.params.grads.segment(d_begin, d_count) +=
            af_loss_grad<Scalar>(model.params.values.segment(d_begin, d_count), eff_lambda_af);
      adam_step(model.params, d_begin, d_count, adam, ++model.disc_steps);
      model.params.grads.setZero();

      // --- generator step -------------------------------------------------
      const MatrixX<Scalar> recon = model.generator.forward(model.params, xb, &g_cache);
      double l_recon = recon_loss(xb, recon);
      MatrixX<Scalar> d_recon = recon_loss_grad(xb, recon);

      AugmentDraws<Scalar> draws;
      const MatrixX<Scalar> recon_aug = diff_augment(recon, rng, &draws);
      const VectorX<Scalar> d_fake_g = model.discriminator.forward(
          model.params, recon_aug, RunMode::Train, &rng, &d_cache_fake);
      const double l_g = generator_loss(d_fake_g);
      const MatrixX<Scalar> d_aug =
          model.discriminator.backward(model.params, d_cache_fake, generator_loss_grad(d_fake_g));
      d_recon += diff_augment_backward(d_aug, draws);
      model.generator.backward(model.params, g_cache, d_recon);

      double l_cl = 0.0;
      const bool replay_turn = use_acl && !replay.empty() &&
                               (step % cfg.replay_interval) == cfg.replay_interval - 1;
      if (replay_turn) {
        std::vector<int> rsel(static_cast<std::size_t>(replay.size()));
        for (Index i = 0; i < replay.size(); ++i) rsel[static_cast<std::size_t>(i)] = static_cast<int>(i);
        if (replay.size() > batch) {
          rng.shuffle(rsel);
          rsel.resize(static_cast<std::size_t>(batch));
        }
        const MatrixX<Scalar> rb = gather_rows(replay.vectors, rsel);
        const MatrixX<Scalar> recon_r = model.generator.forward(model.params, rb, &g_cache_replay);
        l_recon += recon_loss(rb, recon_r);
        MatrixX<Scalar> d_out_r = recon_loss_grad(rb, recon_r);
        MatrixX<Scalar> d_cl;
        l_cl = cl_loss(recon_r, cfg.lambda_cl, nullptr, &d_cl);
        d_out_r += d_cl;
        model.generator.backward(model.params, g_cache_replay, d_out_r);
      }
      if (eff_lambda_af > 0)
        model.params.grads.segment(g_begin, g_count) +=
            af_loss_grad<Scalar>(model.params.values.segment(g_begin, g_count), eff_lambda_af);
      adam_step(model.params, g_begin, g_count, adam, ++model.gen_steps);
      model.params.grads.setZero();

      const double l_af = use_acl ? af_loss(model.params.values, eff_lambda_af) : 0.0;
      LossRecord record{task, epoch, step, {l_recon, l_g, l_d, l_af, l_cl}, use_acl ? acl_beta : 0.0};
      if (!std::isfinite(record.losses.total()))
        throw DivergenceError("non-finite loss at task " + std::to_string(task) + " epoch " +
                              std::to_string(epoch) + " step " + std::to_string(step));
      if (sink) sink(record);
    }
  }
}

// Probe-epoch surrogate for Eq-30 fitness: clone the model, train one epoch
// with lambda_af scaled by the candidate, return negative reconstruction
// loss on the new task's background set.
template <typename Scalar>
double probe_beta_fitness(const BioGan<Scalar>& model, const MatrixX<Scalar>& background,
                          const ReplayBuffer<Scalar>& replay, const TrainConfig& cfg, int task,
                          double beta, std::uint64_t probe_seed) {
  BioGan<Scalar> clone = model;
  TrainConfig probe_cfg = cfg;
  probe_cfg.epochs = 1;
  Rng rng(probe_seed);
  train_one_task(clone, background, replay, probe_cfg, task, beta, rng, {});
  const Index probe_rows = std::min<Index>(background.rows(), 256);
  const MatrixX<Scalar> sample = background.topRows(probe_rows);
  return -recon_loss(sample, clone.generator.forward(clone.params, sample));
}

}  // namespace detail

// Aligns bands to the stream minimum and min-max normalizes each cube.
std::vector<HsiCube> prepare_stream(std::vector<HsiCube> cubes);

// Algorithm-1 continual loop: per task build the background set, train the
// GAN (AF/CL active from the second task on), then cluster, select exemplars
// and grow the replay buffer. Checkpoints snapshot model + buffer per task.
template <typename Scalar = float>
CheckpointSet<Scalar> train_continual(const std::vector<HsiCube>& raw_cubes,
                                      const TrainConfig& cfg, const LossSink& sink = {},
                                      const TaskCheckpoint<Scalar>* resume = nullptr) {
  cfg.validate();
  if (raw_cubes.empty()) throw ArgumentError("train: empty task stream");
  const std::vector<HsiCube> cubes = prepare_stream(raw_cubes);
  const Index input_dim = 2 * cubes.front().bands;

  const bool continual = cfg.mode == TrainMode::Continual;
  BioGan<Scalar> model = resume ? resume->model : detail::fresh_model<Scalar>(input_dim, cfg);
  ReplayBuffer<Scalar> buffer = resume ? resume->buffer : ReplayBuffer<Scalar>{};
  const int start_task = resume ? resume->model.task_index + 1 : 0;
  if (model.input_dim() != input_dim)
    throw ShapeError("train: checkpoint input dim does not match stream bands");

  CheckpointSet<Scalar> out;
  out.common_bands = cubes.front().bands;
  for (int t = start_task; t < static_cast<int>(cubes.size()); ++t) {
    const HsiCube& cube = cubes[static_cast<std::size_t>(t)];
    auto [selection, bg] = select_background<Scalar>(cube, cfg.mu, cfg.w);
    (void)selection;

    double beta = -1.0;  // task 1: L_AF = L_CL = 0
    if (continual && t > 0) {
      if (!cfg.beta_grid.empty()) {
        std::vector<double> grid = cfg.beta_grid;
        std::sort(grid.begin(), grid.end());
        int candidate_idx = 0;
        beta = select_beta(grid, [&](double b) {
          const std::uint64_t probe_seed =
              mix_seed(cfg.seed, detail::kTagProbe + static_cast<std::uint64_t>(candidate_idx++),
                       static_cast<std::uint64_t>(t));
          return detail::probe_beta_fitness(model, bg.vectors, buffer, cfg, t, b, probe_seed);
        });
      } else {
        beta = cfg.beta;
      }
    }

    Rng task_rng(mix_seed(cfg.seed, detail::kTagTaskRng, static_cast<std::uint64_t>(t)));
    detail::train_one_task(model, bg.vectors, buffer, cfg, t, beta, task_rng, sink);

    if (continual) {
      const auto clustering = kmeans(bg.vectors, cfg.P,
                                     mix_seed(cfg.seed, detail::kTagKmeans,
                                              static_cast<std::uint64_t>(t)));
      const ExemplarSelection exemplars = select_exemplars(bg.vectors, clustering);
      update_buffer(buffer, make_selection(t, bg.vectors, exemplars));
    }

    model.task_index = t;
    out.tasks.push_back({model, buffer, cube.name});
  }
  return out;
}

// Same loop with the ACL terms off and no replay.
template <typename Scalar = float>
CheckpointSet<Scalar> train_fine_tune(const std::vector<HsiCube>& cubes, const TrainConfig& cfg,
                                      const LossSink& sink = {},
                                      const TaskCheckpoint<Scalar>* resume = nullptr) {
  TrainConfig ft = cfg;
  ft.mode = TrainMode::FineTune;
  return train_continual<Scalar>(cubes, ft, sink, resume);
}

// Upper-bound reference: one model over the concatenated background sets.
template <typename Scalar = float>
BioGan<Scalar> train_joint(const std::vector<HsiCube>& raw_cubes, const TrainConfig& cfg,
                           const LossSink& sink = {}) {
  cfg.validate();
  if (raw_cubes.empty()) throw ArgumentError("train: empty task stream");
  const std::vector<HsiCube> cubes = prepare_stream(raw_cubes);
  const Index input_dim = 2 * cubes.front().bands;

  MatrixX<Scalar> all;
  for (const HsiCube& cube : cubes) {
    auto [selection, bg] = select_background<Scalar>(cube, cfg.mu, cfg.w);
    (void)selection;
    const Index old_rows = all.rows();
    all.conservativeResize(old_rows + bg.vectors.rows(), input_dim);
    all.bottomRows(bg.vectors.rows()) = bg.vectors;
  }

  BioGan<Scalar> model = detail::fresh_model<Scalar>(input_dim, cfg);
  ReplayBuffer<Scalar> no_replay;
  Rng task_rng(mix_seed(cfg.seed, detail::kTagTaskRng, 0));
  detail::train_one_task(model, all, no_replay, cfg, 0, -1.0, task_rng, sink);
  model.task_index = static_cast<int>(cubes.size()) - 1;
  return model;
}

}  // namespace clhad
