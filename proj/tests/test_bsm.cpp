#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "clhad/bsm.hpp"
#include "clhad/rng.hpp"
#include "clhad/synth.hpp"

using namespace clhad;

namespace {

HsiCube noisy_cube(int w, int h, int c, std::uint64_t seed, float sigma) {
  HsiCube cube(w, h, c, "noisy");
  Rng rng(seed);
  for (float& v : cube.data) v = 0.5f + sigma * static_cast<float>(rng.normal());
  return cube;
}

}  // namespace

TEST_CASE("sam similarity basics") {
  VectorX<double> x(3);
  x << 1, 2, 3;
  CHECK(sam_similarity<double>(x, x) == doctest::Approx(1.0));

  VectorX<double> e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;
  CHECK(sam_similarity<double>(e1, e2) == doctest::Approx(0.0));

  VectorX<double> a(3), b(3);
  a << 1, 2, 3;
  b << 2, 4, 6;
  CHECK(sam_similarity<double>(a, b) == doctest::Approx(1.0));
}

TEST_CASE("sam similarity rejects dead pixels and shape mismatches") {
  VectorX<double> x(3), zero(3), shorter(2);
  x << 1, 2, 3;
  zero.setZero();
  shorter << 1, 2;
  CHECK_THROWS_AS(sam_similarity<double>(x, zero), SimilarityError);
  CHECK_THROWS_AS(sam_similarity<double>(zero, x), SimilarityError);
  CHECK_THROWS_AS(sam_similarity<double>(x, shorter), ShapeError);
}

TEST_CASE("sam similarity is symmetric and scale invariant") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    VectorX<double> a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = rng.uniform(0.05, 1.0);
      b[i] = rng.uniform(0.05, 1.0);
    }
    const double alpha = rng.uniform(0.1, 10.0);
    const double beta = rng.uniform(0.1, 10.0);
    CHECK(sam_similarity<double>(a, b) == doctest::Approx(sam_similarity<double>(b, a)));
    CHECK(sam_similarity<double>((alpha * a).eval(), (beta * b).eval()) ==
          doctest::Approx(sam_similarity<double>(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("ssns_augment on a constant cube concatenates equal halves") {
  HsiCube cube(4, 4, 3);
  for (float& v : cube.data) v = 0.42f;
  const VectorX<double> e = ssns_augment<double>(cube, 5, 3);
  REQUIRE(e.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(e[i] == doctest::Approx(0.42));
}

TEST_CASE("ssns_augment interior pixel equals the 9-term average oracle") {
  HsiCube cube = noisy_cube(5, 5, 4, 11, 0.2f);
  const int px = 2, py = 2;
  const int i = py * cube.width + px;
  const VectorX<double> e = ssns_augment<double>(cube, i, 3);
  for (int b = 0; b < cube.bands; ++b) {
    CHECK(e[b] == doctest::Approx(cube.at(px, py, b)));
    double sum = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) sum += cube.at(px + dx, py + dy, b);
    CHECK(e[cube.bands + b] == doctest::Approx(sum / 9.0).epsilon(1e-6));
  }
}

TEST_CASE("ssns_augment corner pixel uses replicate padding") {
  HsiCube cube = noisy_cube(4, 4, 3, 12, 0.2f);
  const VectorX<double> e = ssns_augment<double>(cube, 0, 3);
  // clamped offsets hit: center x4, east x2, south x2, south-east x1
  for (int b = 0; b < cube.bands; ++b) {
    const double oracle = (4.0 * cube.at(0, 0, b) + 2.0 * cube.at(1, 0, b) +
                           2.0 * cube.at(0, 1, b) + 1.0 * cube.at(1, 1, b)) /
                          9.0;
    CHECK(e[cube.bands + b] == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("select_background keeps every pixel of a uniform cube") {
  HsiCube cube(6, 5, 4);
  for (float& v : cube.data) v = 0.7f;
  auto [sel, set] = select_background<float>(cube, 0.99, 3);
  CHECK(set.vectors.rows() == cube.pixels());
  CHECK(set.indices.size() == static_cast<std::size_t>(cube.pixels()));
  for (auto s : sel) CHECK(s == 0);
}

TEST_CASE("select_background recovers at least 95% of true background") {
  SceneSpec spec;
  spec.size = 48;
  spec.bands = 40;
  spec.seed = 5;
  auto [cube_raw, mask] = synth_scene(spec);
  HsiCube cube = cube_raw;
  normalize(cube);
  auto [sel, set] = select_background<float>(cube, 0.99, 3);
  (void)set;
  int bg_total = 0, bg_kept = 0;
  for (int i = 0; i < cube.pixels(); ++i) {
    if (mask.labels[static_cast<std::size_t>(i)]) continue;
    ++bg_total;
    if (sel[static_cast<std::size_t>(i)] == 0) ++bg_kept;
  }
  CHECK(static_cast<double>(bg_kept) / bg_total >= 0.95);
}

TEST_CASE("select_background errors when no pixel survives") {
  const HsiCube cube = noisy_cube(8, 8, 16, 3, 0.05f);
  CHECK_THROWS_AS((select_background<float>(cube, 1.0, 3)), SelectionError);
}

TEST_CASE("selected ratio is monotone non-increasing in mu") {
  const HsiCube cube = noisy_cube(16, 16, 12, 9, 0.02f);
  std::size_t prev = static_cast<std::size_t>(cube.pixels()) + 1;
  for (double mu : {0.90, 0.95, 0.99, 0.999}) {
    std::size_t kept = 0;
    try {
      auto [sel, set] = select_background<float>(cube, mu, 3);
      (void)sel;
      kept = set.indices.size();
    } catch (const SelectionError&) {
      kept = 0;
    }
    CHECK(kept <= prev);
    prev = kept;
  }
}

TEST_CASE("background rows re-derive from their recorded indices") {
  const HsiCube cube = noisy_cube(10, 10, 8, 21, 0.02f);
  auto [sel, set] = select_background<float>(cube, 0.98, 3);
  (void)sel;
  for (Index r = 0; r < set.vectors.rows(); ++r) {
    const VectorX<float> again =
        ssns_augment<float>(cube, set.indices[static_cast<std::size_t>(r)], 3);
    CHECK((set.vectors.row(r).transpose() - again).norm() == 0.0f);
  }
}

TEST_CASE("dead pixels are excluded rather than fatal") {
  HsiCube cube(4, 4, 3);
  for (float& v : cube.data) v = 0.6f;
  for (int b = 0; b < cube.bands; ++b) cube.at(1, 1, b) = 0.0f;  // dead pixel
  auto [sel, set] = select_background<float>(cube, 0.9, 3);
  CHECK(sel[1 * 4 + 1] == 1);
  CHECK(set.vectors.rows() == cube.pixels() - 1);
}

TEST_CASE("background set round trips through disk") {
  const HsiCube cube = noisy_cube(8, 8, 6, 2, 0.02f);
  auto [sel, set] = select_background<float>(cube, 0.97, 3);
  (void)sel;
  const auto path = std::filesystem::temp_directory_path() / "clhad_bgset.bin";
  save_background_set(set, path);
  const BackgroundSet<float> back = load_background_set(path);
  CHECK(back.indices == set.indices);
  CHECK(back.threshold_used == set.threshold_used);
  CHECK(back.window == set.window);
  CHECK((back.vectors - set.vectors).norm() == 0.0f);
}
