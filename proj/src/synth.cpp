#include "clhad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "clhad/rng.hpp"

namespace clhad {

namespace {

constexpr std::uint64_t kTagEndmembers = 0x31;
constexpr std::uint64_t kTagAbundance = 0x32;
constexpr std::uint64_t kTagNoise = 0x33;
constexpr std::uint64_t kTagAnomaly = 0x34;
constexpr std::uint64_t kTagPlacement = 0x35;

// Smooth positive spectrum: a gentle ramp plus Gaussian bumps whose centers
// cluster around `region` (fraction of the band axis). Seeding the region per
// scene keeps endmember families from different seeds spectrally apart.
std::vector<double> smooth_spectrum(int bands, double region, Rng& rng) {
  std::vector<double> s(bands, 0.0);
  const double base = rng.uniform(0.15, 0.35);
  const double slope = rng.uniform(-0.15, 0.15);
  const int bumps = 2 + static_cast<int>(rng.uniform_index(3));
  std::vector<double> center(bumps), width(bumps), amp(bumps);
  for (int k = 0; k < bumps; ++k) {
    center[k] = std::clamp(region + rng.uniform(-0.18, 0.18), 0.02, 0.98) * (bands - 1);
    width[k] = rng.uniform(0.05, 0.16) * bands;
    amp[k] = rng.uniform(0.25, 0.6);
  }
  for (int b = 0; b < bands; ++b) {
    double v = base + slope * (static_cast<double>(b) / (bands - 1));
    for (int k = 0; k < bumps; ++k) {
      const double d = (b - center[k]) / width[k];
      v += amp[k] * std::exp(-0.5 * d * d);
    }
    s[b] = v;
  }
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double span = std::max(*hi - *lo, 1e-9);
  for (double& v : s) v = 0.15 + 0.7 * (v - *lo) / span;
  return s;
}

// Bilinear upsample of a coarse random grid, then a softmax across
// endmembers; yields spatially smooth convex abundance fields.
std::vector<std::vector<double>> abundance_fields(int size, int endmembers, Rng& rng) {
  const int grid = 5;  // coarse control points per axis
  std::vector<std::vector<double>> coarse(
      endmembers, std::vector<double>(static_cast<std::size_t>(grid) * grid));
  for (auto& field : coarse)
    for (double& v : field) v = rng.uniform();

  std::vector<std::vector<double>> fields(
      endmembers, std::vector<double>(static_cast<std::size_t>(size) * size));
  const double scale = static_cast<double>(grid - 1) / (size - 1);
  for (int y = 0; y < size; ++y) {
    const double gy = y * scale;
    const int y0 = std::min(static_cast<int>(gy), grid - 2);
    const double fy = gy - y0;
    for (int x = 0; x < size; ++x) {
      const double gx = x * scale;
      const int x0 = std::min(static_cast<int>(gx), grid - 2);
      const double fx = gx - x0;
      for (int k = 0; k < endmembers; ++k) {
        const auto& c = coarse[k];
        const double v00 = c[y0 * grid + x0], v01 = c[y0 * grid + x0 + 1];
        const double v10 = c[(y0 + 1) * grid + x0], v11 = c[(y0 + 1) * grid + x0 + 1];
        fields[k][static_cast<std::size_t>(y) * size + x] =
            (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  // softmax across endmembers, temperature tuned for smooth mixing
  const double inv_temp = 1.0 / 0.35;
  for (int i = 0; i < size * size; ++i) {
    double zmax = -1e300;
    for (int k = 0; k < endmembers; ++k) zmax = std::max(zmax, fields[k][i]);
    double sum = 0.0;
    for (int k = 0; k < endmembers; ++k) {
      fields[k][i] = std::exp((fields[k][i] - zmax) * inv_temp);
      sum += fields[k][i];
    }
    for (int k = 0; k < endmembers; ++k) fields[k][i] /= sum;
  }
  return fields;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// Compact anomaly blobs with an exact total pixel count.
void place_anomalies(GroundTruthMask& mask, int count, Rng& rng) {
  int remaining = count;
  int guard = 0;
  while (remaining > 0 && ++guard < 100000) {
    int bw = 2 + static_cast<int>(rng.uniform_index(2));
    int bh = 2 + static_cast<int>(rng.uniform_index(2));
    if (bw * bh > remaining) {
      bw = std::min(bw, remaining);
      bh = 1;
      if (bw > remaining) bw = remaining;
    }
    const int x0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(mask.width - bw + 1)));
    const int y0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(mask.height - bh + 1)));
    // keep blobs separated by one pixel so each stays locally salient
    bool free = true;
    for (int y = std::max(0, y0 - 1); y < std::min(mask.height, y0 + bh + 1) && free; ++y)
      for (int x = std::max(0, x0 - 1); x < std::min(mask.width, x0 + bw + 1); ++x)
        if (mask.at(x, y)) {
          free = false;
          break;
        }
    if (!free) continue;
    int placed = 0;
    for (int y = y0; y < y0 + bh && remaining - placed > 0; ++y)
      for (int x = x0; x < x0 + bw && remaining - placed > 0; ++x) {
        mask.at(x, y) = 1;
        ++placed;
      }
    remaining -= placed;
  }
  if (remaining > 0) throw DataError("synth_scene: could not place all anomaly pixels");
}

}  // namespace

void validate(const SceneSpec& spec) {
  if (spec.size < 8) throw ArgumentError("scene size must be >= 8");
  if (spec.bands < 2) throw ArgumentError("scene bands must be >= 2");
  if (spec.endmembers < 1) throw ArgumentError("endmember count must be >= 1");
  if (!(spec.anomaly_fraction > 0.0) || spec.anomaly_fraction > 0.05)
    throw ArgumentError("anomaly fraction must lie in (0, 0.05]");
  if (spec.noise_sigma < 0.0) throw ArgumentError("noise sigma must be >= 0");
}

std::pair<HsiCube, GroundTruthMask> synth_scene(const SceneSpec& spec) {
  validate(spec);
  const int n = spec.size;
  const int bands = spec.bands;

  Rng rng_end(mix_seed(spec.seed, kTagEndmembers));
  const double region = rng_end.uniform(0.15, 0.85);
  std::vector<std::vector<double>> endmembers(spec.endmembers);
  for (auto& e : endmembers) e = smooth_spectrum(bands, region, rng_end);

  Rng rng_ab(mix_seed(spec.seed, kTagAbundance));
  const auto fields = abundance_fields(n, spec.endmembers, rng_ab);

  GroundTruthMask mask(n, n);
  const int anomaly_count =
      static_cast<int>(std::lround(spec.anomaly_fraction * n * n));
  Rng rng_place(mix_seed(spec.seed, kTagPlacement));
  place_anomalies(mask, anomaly_count, rng_place);

  // Mean background spectrum (noise-free) for the signature self-check.
  std::vector<double> mean_bg(bands, 0.0);
  int n_bg = 0;
  for (int i = 0; i < n * n; ++i) {
    if (mask.labels[i]) continue;
    ++n_bg;
    for (int b = 0; b < bands; ++b) {
      double v = 0;
      for (int k = 0; k < spec.endmembers; ++k) v += fields[k][i] * endmembers[k][b];
      mean_bg[b] += v;
    }
  }
  for (double& v : mean_bg) v /= std::max(n_bg, 1);

  // Self-check loop: redraw the anomaly signature until it is spectrally
  // distinct from the background (cosine vs. mean background < 0.99).
  std::vector<double> signature;
  Rng rng_anom(mix_seed(spec.seed, kTagAnomaly));
  bool distinct = false;
  for (int attempt = 0; attempt < 64 && !distinct; ++attempt) {
    const double anom_region = std::fmod(region + rng_anom.uniform(0.35, 0.65), 1.0);
    signature = smooth_spectrum(bands, anom_region, rng_anom);
    // sharpen: suppress the background's strong region
    for (int b = 0; b < bands; ++b) {
      const double d = (static_cast<double>(b) / (bands - 1)) - region;
      signature[b] *= 1.0 - 0.8 * std::exp(-0.5 * d * d / 0.02);
    }
    distinct = cosine(signature, mean_bg) < 0.99;
  }
  if (!distinct) throw DataError("synth_scene: failed to draw a distinct anomaly signature");

  HsiCube cube(n, n, bands, "synth-" + std::to_string(spec.seed));
  Rng rng_noise(mix_seed(spec.seed, kTagNoise));
  for (int i = 0; i < n * n; ++i) {
    const int x = i % n, y = i / n;
    const bool anomalous = mask.labels[i] != 0;
    const double gain = anomalous ? rng_noise.uniform(0.9, 1.1) : 1.0;
    for (int b = 0; b < bands; ++b) {
      double v;
      if (anomalous) {
        v = gain * signature[b];
      } else {
        v = 0;
        for (int k = 0; k < spec.endmembers; ++k) v += fields[k][i] * endmembers[k][b];
      }
      v += spec.noise_sigma * rng_noise.normal();
      cube.at(x, y, b) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return {std::move(cube), std::move(mask)};
}

}  // namespace clhad
