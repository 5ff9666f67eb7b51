#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "clhad/nn/model.hpp"

using namespace clhad;

TEST_CASE("zero-initialized generator outputs 0.5 everywhere") {
  BioGan<double> model = BioGan<double>::with_defaults(16, 1);
  model.params.values.setZero();
  MatrixX<double> batch = MatrixX<double>::Random(3, 16);
  const MatrixX<double> out = model.generator.forward(model.params, batch);
  for (Index i = 0; i < out.size(); ++i) CHECK(out.data()[i] == doctest::Approx(0.5));
}

TEST_CASE("generator rows are batch independent") {
  BioGan<double> model = BioGan<double>::with_defaults(20, 7);
  MatrixX<double> batch = MatrixX<double>::Random(4, 20);
  const MatrixX<double> full = model.generator.forward(model.params, batch);
  const MatrixX<double> single = model.generator.forward(model.params, batch.topRows(1));
  CHECK((full.row(0) - single.row(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("generator outputs stay in (0,1) and reject bad shapes") {
  BioGan<double> model = BioGan<double>::with_defaults(16, 3);
  MatrixX<double> batch = MatrixX<double>::Random(5, 16) * 3.0;
  const MatrixX<double> out = model.generator.forward(model.params, batch);
  for (Index i = 0; i < out.size(); ++i) {
    CHECK(out.data()[i] > 0.0);
    CHECK(out.data()[i] < 1.0);
  }
  MatrixX<double> wrong = MatrixX<double>::Random(2, 15);
  CHECK_THROWS_AS(model.generator.forward(model.params, wrong), ShapeError);
}

TEST_CASE("generator config validation") {
  GeneratorConfig cfg = GeneratorConfig::defaults(16);
  cfg.latent = 16;  // must be < input_dim
  Index cursor = 0;
  CHECK_THROWS_AS(Generator<double>(cfg, cursor), ArgumentError);
}

TEST_CASE("attention weight of a single token is exactly one") {
  MatrixX<double> q = MatrixX<double>::Random(1, 4);
  MatrixX<double> k = MatrixX<double>::Random(1, 4);
  MatrixX<double> v = MatrixX<double>::Random(1, 4);
  AttentionCache<double> cache;
  const MatrixX<double> out = l2_attention<double>(q, k, v, 3.0, &cache);
  CHECK(cache.weights(0, 0) == 1.0);
  CHECK((out - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical rows give uniform attention") {
  MatrixX<double> row = MatrixX<double>::Random(1, 5);
  MatrixX<double> q(4, 5), k(4, 5), v = MatrixX<double>::Random(4, 5);
  for (int i = 0; i < 4; ++i) {
    q.row(i) = row;
    k.row(i) = row;
  }
  AttentionCache<double> cache;
  l2_attention<double>(q, k, v, 2.0, &cache);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(cache.weights(i, j) == doctest::Approx(0.25));
}

TEST_CASE("attention matches a straight-line transcription oracle") {
  Rng rng(99);
  MatrixX<double> q(3, 4), k(3, 4), v(3, 4);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) {
      q(i, j) = rng.uniform(-1, 1);
      k(i, j) = rng.uniform(-1, 1);
      v(i, j) = rng.uniform(-1, 1);
    }
  const double scale = std::sqrt(8.0);
  const MatrixX<double> out = l2_attention<double>(q, k, v, scale);

  // independent transcription, explicit loops in equation order
  MatrixX<double> oracle(3, 4);
  for (int i = 0; i < 3; ++i) {
    double qn = 0;
    for (int c = 0; c < 4; ++c) qn += q(i, c) * q(i, c);
    qn = std::sqrt(qn);
    double logits[3];
    for (int j = 0; j < 3; ++j) {
      double kn = 0;
      for (int c = 0; c < 4; ++c) kn += k(j, c) * k(j, c);
      kn = std::sqrt(kn);
      double dot = 0;
      for (int c = 0; c < 4; ++c) dot += (q(i, c) / qn) * (k(j, c) / kn);
      logits[j] = dot / scale;
    }
    double zmax = std::max({logits[0], logits[1], logits[2]});
    double weights[3], wsum = 0;
    for (int j = 0; j < 3; ++j) {
      weights[j] = std::exp(logits[j] - zmax);
      wsum += weights[j];
    }
    for (int c = 0; c < 4; ++c) {
      double acc = 0;
      for (int j = 0; j < 3; ++j) acc += (weights[j] / wsum) * v(j, c);
      oracle(i, c) = acc;
    }
  }
  CHECK((out - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-norm feature row falls back to uniform attention") {
  MatrixX<double> q = MatrixX<double>::Random(3, 4);
  q.row(1).setZero();
  MatrixX<double> k = MatrixX<double>::Random(3, 4);
  MatrixX<double> v = MatrixX<double>::Random(3, 4);
  AttentionCache<double> cache;
  l2_attention<double>(q, k, v, 2.0, &cache);
  for (Index j = 0; j < 3; ++j) CHECK(cache.weights(1, j) == doctest::Approx(1.0 / 3));
}

TEST_CASE("attention rows sum to one") {
  Rng rng(123);
  MatrixX<double> q(12, 6), k(12, 6), v(12, 6);
  for (Index i = 0; i < q.size(); ++i) {
    q.data()[i] = rng.uniform(-2, 2);
    k.data()[i] = rng.uniform(-2, 2);
    v.data()[i] = rng.uniform(-2, 2);
  }
  AttentionCache<double> cache;
  l2_attention<double>(q, k, v, std::sqrt(12.0), &cache);
  for (Index i = 0; i < cache.weights.rows(); ++i)
    CHECK(std::abs(cache.weights.row(i).sum() - 1.0) < 1e-6);
}

TEST_CASE("discriminator probabilities lie in (0,1)") {
  BioGan<double> model = BioGan<double>::with_defaults(24, 5);
  MatrixX<double> batch = MatrixX<double>::Random(6, 24);
  const VectorX<double> p =
      model.discriminator.forward(model.params, batch, RunMode::Eval, nullptr);
  for (Index i = 0; i < p.size(); ++i) {
    CHECK(p[i] > 0.0);
    CHECK(p[i] < 1.0);
  }
  MatrixX<double> wrong = MatrixX<double>::Random(2, 23);
  CHECK_THROWS_AS(model.discriminator.forward(model.params, wrong, RunMode::Eval, nullptr),
                  ShapeError);
}

TEST_CASE("eval mode is deterministic, train mode reproduces per rng seed") {
  BioGan<double> model = BioGan<double>::with_defaults(16, 11);
  MatrixX<double> batch = MatrixX<double>::Random(4, 16);
  const VectorX<double> a =
      model.discriminator.forward(model.params, batch, RunMode::Eval, nullptr);
  const VectorX<double> b =
      model.discriminator.forward(model.params, batch, RunMode::Eval, nullptr);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

  Rng r1(42), r2(42);
  const VectorX<double> t1 =
      model.discriminator.forward(model.params, batch, RunMode::Train, &r1);
  const VectorX<double> t2 =
      model.discriminator.forward(model.params, batch, RunMode::Train, &r2);
  CHECK((t1 - t2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discriminator config validation") {
  DiscriminatorConfig cfg = DiscriminatorConfig::defaults(16);
  cfg.attn_dim = 5;  // does not divide 24
  Index cursor = 0;
  CHECK_THROWS_AS(Discriminator<double>(cfg, cursor), ArgumentError);
}

TEST_CASE("checkpoint serialization round trips bit exactly") {
  BioGan<float> model = BioGan<float>::with_defaults(24, 17);
  model.task_index = 2;
  model.gen_steps = 321;
  model.disc_steps = 322;
  // make the moment buffers nontrivial
  Rng rng(5);
  for (Index i = 0; i < model.params.size(); ++i) {
    model.params.m[i] = static_cast<float>(rng.uniform(-1, 1));
    model.params.v[i] = static_cast<float>(rng.uniform(0, 1));
  }
  const auto path = std::filesystem::temp_directory_path() / "clhad_ck.bin";
  save_checkpoint(model, path);
  const BioGan<float> back = load_checkpoint(path);

  CHECK(back.task_index == model.task_index);
  CHECK(back.gen_steps == model.gen_steps);
  CHECK(back.disc_steps == model.disc_steps);
  CHECK(back.params.size() == model.params.size());
  CHECK(std::memcmp(back.params.values.data(), model.params.values.data(),
                    sizeof(float) * model.params.size()) == 0);
  CHECK(std::memcmp(back.params.m.data(), model.params.m.data(),
                    sizeof(float) * model.params.size()) == 0);
  CHECK(std::memcmp(back.params.v.data(), model.params.v.data(),
                    sizeof(float) * model.params.size()) == 0);

  MatrixX<float> batch = MatrixX<float>::Random(3, 24);
  const MatrixX<float> g0 = model.generator.forward(model.params, batch);
  const MatrixX<float> g1 = back.generator.forward(back.params, batch);
  CHECK(std::memcmp(g0.data(), g1.data(), sizeof(float) * g0.size()) == 0);
  const VectorX<float> d0 =
      model.discriminator.forward(model.params, batch, RunMode::Eval, nullptr);
  const VectorX<float> d1 = back.discriminator.forward(back.params, batch, RunMode::Eval, nullptr);
  CHECK(std::memcmp(d0.data(), d1.data(), sizeof(float) * d0.size()) == 0);
}
