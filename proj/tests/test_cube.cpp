#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "clhad/bsm.hpp"
#include "clhad/cube.hpp"
#include "clhad/rng.hpp"
#include "clhad/synth.hpp"

using namespace clhad;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "clhad_cube_test";
  fs::create_directories(dir);
  return dir;
}

HsiCube random_cube(int w, int h, int c, std::uint64_t seed) {
  HsiCube cube(w, h, c, "rand");
  Rng rng(seed);
  for (float& v : cube.data) v = static_cast<float>(rng.uniform());
  return cube;
}

}  // namespace

TEST_CASE("cube save/load round trip is bit exact") {
  const fs::path path = temp_dir() / "roundtrip.bsq";
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const HsiCube cube = random_cube(5, 4, 7, seed);
    save_cube(cube, path);
    const HsiCube back = load_cube(path);
    CHECK(back.width == cube.width);
    CHECK(back.height == cube.height);
    CHECK(back.bands == cube.bands);
    CHECK(back.name == cube.name);
    REQUIRE(back.data.size() == cube.data.size());
    CHECK(std::memcmp(back.data.data(), cube.data.data(),
                      cube.data.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("mask save/load round trip") {
  const fs::path path = temp_dir() / "roundtrip.mask";
  GroundTruthMask mask(6, 3);
  mask.at(2, 1) = 1;
  mask.at(5, 0) = 1;
  save_mask(mask, path);
  const GroundTruthMask back = load_mask(path);
  CHECK(back.width == 6);
  CHECK(back.height == 3);
  CHECK(back.labels == mask.labels);
}

TEST_CASE("header payload size checks") {
  const fs::path path = temp_dir() / "sized.bsq";
  const HsiCube cube = random_cube(2, 2, 3, 9);
  save_cube(cube, path);

  SUBCASE("declared 2x2x3 with 48 bytes loads") {
    CHECK(fs::file_size(path) == 48);
    CHECK_NOTHROW(load_cube(path));
  }
  SUBCASE("truncated payload is a format error") {
    fs::resize_file(path, 40);
    CHECK_THROWS_AS(load_cube(path), FormatError);
  }
  SUBCASE("missing sidecar is a format error") {
    fs::remove(path.string() + ".json");
    CHECK_THROWS_AS(load_cube(path), FormatError);
  }
}

TEST_CASE("non-finite payload is a data error") {
  const fs::path path = temp_dir() / "nan.bsq";
  HsiCube cube = random_cube(2, 2, 2, 4);
  cube.data[3] = std::numeric_limits<float>::quiet_NaN();
  save_cube(cube, path);
  CHECK_THROWS_AS(load_cube(path), DataError);
}

TEST_CASE("resample_bands identity when target equals source") {
  const HsiCube cube = random_cube(3, 3, 188, 11);
  const HsiCube same = resample_bands(cube, 188);
  CHECK(std::memcmp(same.data.data(), cube.data.data(),
                    cube.data.size() * sizeof(float)) == 0);
}

TEST_CASE("resample_bands preserves constant spectra") {
  HsiCube cube(2, 2, 16);
  for (float& v : cube.data) v = 0.37f;
  const HsiCube out = resample_bands(cube, 5);
  for (float v : out.data) CHECK(v == doctest::Approx(0.37f));
}

TEST_CASE("resample_bands matches a direct linear interpolation oracle on a ramp") {
  const int src_bands = 32, dst_bands = 16;
  HsiCube cube(1, 1, src_bands);
  for (int b = 0; b < src_bands; ++b) cube.at(0, 0, b) = static_cast<float>(b);
  const HsiCube out = resample_bands(cube, dst_bands);
  // endpoints preserved, interior on the same line
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.0f));
  CHECK(out.at(0, 0, dst_bands - 1) == doctest::Approx(src_bands - 1.0f));
  for (int j = 0; j < dst_bands; ++j) {
    const double expected = j * static_cast<double>(src_bands - 1) / (dst_bands - 1);
    CHECK(out.at(0, 0, j) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("resample_bands rejects bad targets") {
  const HsiCube cube = random_cube(2, 2, 8, 5);
  CHECK_THROWS_AS(resample_bands(cube, 1), ArgumentError);
  CHECK_THROWS_AS(resample_bands(cube, 9), ArgumentError);
}

TEST_CASE("normalize maps to [0,1] and handles constant cubes") {
  HsiCube cube = random_cube(4, 4, 4, 6);
  for (float& v : cube.data) v = v * 3.0f + 2.0f;
  normalize(cube);
  float lo = 1e9f, hi = -1e9f;
  for (float v : cube.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == doctest::Approx(0.0f));
  CHECK(hi == doctest::Approx(1.0f));

  HsiCube flat(2, 2, 2);
  for (float& v : flat.data) v = 9.0f;
  normalize(flat);
  for (float v : flat.data) CHECK(v == doctest::Approx(0.5f));
}

TEST_CASE("synth_scene is a pure function of the spec") {
  SceneSpec spec;
  spec.size = 24;
  spec.bands = 24;
  spec.seed = 7;
  auto [cube_a, mask_a] = synth_scene(spec);
  auto [cube_b, mask_b] = synth_scene(spec);
  CHECK(std::memcmp(cube_a.data.data(), cube_b.data.data(),
                    cube_a.data.size() * sizeof(float)) == 0);
  CHECK(mask_a.labels == mask_b.labels);
}

TEST_CASE("synth_scene anomaly count arithmetic") {
  SceneSpec spec;
  spec.size = 64;
  spec.bands = 16;
  spec.anomaly_fraction = 0.01;
  spec.seed = 3;
  auto [cube, mask] = synth_scene(spec);
  (void)cube;
  int count = 0;
  for (auto v : mask.labels) count += v;
  CHECK(count == 41);  // round(0.01 * 4096)
}

TEST_CASE("synth_scene anomaly signature is spectrally distinct from background") {
  SceneSpec spec;
  spec.size = 32;
  spec.bands = 48;
  spec.seed = 21;
  auto [cube, mask] = synth_scene(spec);
  Eigen::VectorXd bg = Eigen::VectorXd::Zero(spec.bands);
  Eigen::VectorXd an = Eigen::VectorXd::Zero(spec.bands);
  int nbg = 0, nan_ = 0;
  for (int i = 0; i < cube.pixels(); ++i) {
    if (mask.labels[static_cast<std::size_t>(i)]) {
      an += cube.spectrum<double>(i);
      ++nan_;
    } else {
      bg += cube.spectrum<double>(i);
      ++nbg;
    }
  }
  bg /= nbg;
  an /= nan_;
  const double sim = sam_similarity<double>(bg, an);
  CHECK(sim < 0.99);
}

TEST_CASE("synth_scene validates the spec") {
  SceneSpec spec;
  spec.anomaly_fraction = 0.0;
  CHECK_THROWS_AS(synth_scene(spec), ArgumentError);
  spec.anomaly_fraction = 0.2;
  CHECK_THROWS_AS(synth_scene(spec), ArgumentError);
}
