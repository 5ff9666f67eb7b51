#pragma once

#include <cstdint>
#include <utility>

#include "clhad/cube.hpp"

namespace clhad {

// Recipe for a deterministic synthetic scene. The seed fully determines the
// output; two calls with equal specs produce bit-identical cubes and masks.
struct SceneSpec {
  int size = 64;                  // square scene, size x size
  int bands = 64;
  int endmembers = 4;
  double anomaly_fraction = 0.01; // in (0, 0.05]
  double noise_sigma = 0.008;
  std::uint64_t seed = 0;
};

void validate(const SceneSpec& spec);

// Background pixels are convex mixtures of smooth endmember spectra (spatially
// smooth abundance fields) plus Gaussian noise. Anomalies are compact blobs
// carrying a spectrally distinct signature; the generator re-draws the
// signature until the angle between mean anomaly and mean background spectra
// falls below the selection threshold regime (cosine < 0.99).
std::pair<HsiCube, GroundTruthMask> synth_scene(const SceneSpec& spec);

}  // namespace clhad
