#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clhad/cube.hpp"
#include "clhad/error.hpp"
#include "clhad/types.hpp"

namespace clhad {

// Pseudo-background training set: one row per selected pixel, each row the
// spectral-spatial vector [x_i ; mean of the w*w window around i], length 2C.
template <typename Scalar>
struct BackgroundSet {
  MatrixX<Scalar> vectors;       // n_b x 2C
  std::vector<int> indices;      // source pixel linear indices, unique
  std::string source_task;
  double threshold_used = 0.0;
  int window = 3;
};

// 0 = background, 1 = anomaly candidate, indexed by linear pixel index.
using SelectionVector = std::vector<std::uint8_t>;

// Cosine form of the spectral angle mapper; no arccos.
template <typename Scalar>
Scalar sam_similarity(const VectorX<Scalar>& a, const VectorX<Scalar>& b) {
  if (a.size() != b.size()) throw ShapeError("sam_similarity: spectra lengths differ");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0))
    throw SimilarityError("sam_similarity: zero-norm spectrum (dead pixel)");
  return a.dot(b) / (na * nb);
}

namespace detail {

// Window mean with replicate (clamp-to-edge) padding. include_center=false is
// the SBSS comparison spectrum; clamped offsets may still land on the center
// coordinate at borders, which is the replicate-padding contract.
template <typename Scalar>
VectorX<Scalar> window_mean(const HsiCube& cube, int px, int py, int w, bool include_center) {
  const int half = w / 2;
  VectorX<Scalar> acc = VectorX<Scalar>::Zero(cube.bands);
  int count = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      if (!include_center && dx == 0 && dy == 0) continue;
      const int x = std::clamp(px + dx, 0, cube.width - 1);
      const int y = std::clamp(py + dy, 0, cube.height - 1);
      const int i = y * cube.width + x;
      const std::size_t stride = static_cast<std::size_t>(cube.pixels());
      for (int b = 0; b < cube.bands; ++b)
        acc[b] += static_cast<Scalar>(cube.data[static_cast<std::size_t>(b) * stride + i]);
      ++count;
    }
  }
  return acc / static_cast<Scalar>(count);
}

}  // namespace detail

// Spectral-spatial augmentation of pixel i: concat(x_i, window mean incl.
// center). Window defaults to 3 in the callers.
template <typename Scalar>
VectorX<Scalar> ssns_augment(const HsiCube& cube, int i, int w) {
  if (w < 1 || w % 2 == 0) throw ArgumentError("ssns_augment: window must be odd");
  const int px = i % cube.width;
  const int py = i / cube.width;
  VectorX<Scalar> out(2 * cube.bands);
  out.head(cube.bands) = cube.spectrum<Scalar>(i);
  out.tail(cube.bands) = detail::window_mean<Scalar>(cube, px, py, w, true);
  return out;
}

// SBSS + SSNS: each pixel is compared against the mean spectrum of its w*w
// neighborhood (center excluded); pixels at similarity >= mu become
// background and are emitted as SSNS-augmented rows. Dead (all-zero) pixels
// are marked anomalous rather than erroring the scene.
template <typename Scalar>
std::pair<SelectionVector, BackgroundSet<Scalar>> select_background(const HsiCube& cube,
                                                                    double mu, int w) {
  if (!(mu > 0.0) || mu > 1.0) throw ArgumentError("select_background: mu must be in (0,1]");
  if (w < 1 || w % 2 == 0) throw ArgumentError("select_background: window must be odd");

  const int npix = cube.pixels();
  SelectionVector selection(npix, 1);
  std::vector<int> kept;
  kept.reserve(npix);
  for (int i = 0; i < npix; ++i) {
    const VectorX<Scalar> x = cube.spectrum<Scalar>(i);
    const Scalar nx = x.norm();
    if (nx == Scalar(0)) continue;  // dead pixel, stays anomalous
    const VectorX<Scalar> nb_mean =
        detail::window_mean<Scalar>(cube, i % cube.width, i / cube.width, w, false);
    const Scalar nm = nb_mean.norm();
    if (nm == Scalar(0)) continue;
    const Scalar sim = x.dot(nb_mean) / (nx * nm);
    if (sim >= static_cast<Scalar>(mu)) {
      selection[i] = 0;
      kept.push_back(i);
    }
  }
  if (kept.empty())
    throw SelectionError("select_background: no pixel met mu=" + std::to_string(mu));

  BackgroundSet<Scalar> set;
  set.vectors.resize(static_cast<Index>(kept.size()), 2 * cube.bands);
  set.indices = kept;
  set.source_task = cube.name;
  set.threshold_used = mu;
  set.window = w;
  for (std::size_t r = 0; r < kept.size(); ++r)
    set.vectors.row(static_cast<Index>(r)) = ssns_augment<Scalar>(cube, kept[r], w).transpose();
  return {std::move(selection), std::move(set)};
}

// Persisted as a raw float32 row-major matrix plus a JSON sidecar
// {rows, cols, indices, mu, w, task}; implemented in src/persist.cpp.
void save_background_set(const BackgroundSet<float>& set, const std::filesystem::path& path);
BackgroundSet<float> load_background_set(const std::filesystem::path& path);

}  // namespace clhad
