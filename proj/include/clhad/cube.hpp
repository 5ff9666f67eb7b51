#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clhad/error.hpp"
#include "clhad/types.hpp"

namespace clhad {

// A radiance cube in band-sequential order: data[b*H*W + y*W + x].
// Immutable by convention once loaded; the pipeline normalizes a copy.
struct HsiCube {
  int width = 0;
  int height = 0;
  int bands = 0;
  std::vector<float> data;
  std::string name;

  HsiCube() = default;
  HsiCube(int w, int h, int c, std::string task_name = {})
      : width(w),
        height(h),
        bands(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0f),
        name(std::move(task_name)) {}

  int pixels() const { return width * height; }

  float& at(int x, int y, int b) {
    return data[static_cast<std::size_t>(b) * pixels() + static_cast<std::size_t>(y) * width + x];
  }
  float at(int x, int y, int b) const {
    return data[static_cast<std::size_t>(b) * pixels() + static_cast<std::size_t>(y) * width + x];
  }

  // Spectrum of the pixel with linear index i = y*width + x.
  template <typename Scalar = float>
  VectorX<Scalar> spectrum(int i) const {
    VectorX<Scalar> s(bands);
    const std::size_t stride = static_cast<std::size_t>(pixels());
    for (int b = 0; b < bands; ++b)
      s[b] = static_cast<Scalar>(data[static_cast<std::size_t>(b) * stride + i]);
    return s;
  }

  bool shape_valid() const { return width >= 1 && height >= 1 && pixels() >= 1 && bands >= 2; }
};

struct GroundTruthMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;  // 1 anomaly, 0 background, row-major

  GroundTruthMask() = default;
  GroundTruthMask(int w, int h)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  int pixels() const { return width * height; }
  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Throws DataError on NaN/Inf payloads.
void validate_finite(const HsiCube& cube);

// Min-max rescale to [0,1] in place; a constant cube maps to 0.5 everywhere.
// Returns the (min, max) that were used.
std::pair<float, float> normalize(HsiCube& cube);

// Per-pixel linear interpolation of the spectrum down to target_bands
// samples. Identity when target equals the source band count.
HsiCube resample_bands(const HsiCube& cube, int target_bands);

// --- on-disk formats ---------------------------------------------------
// Payload `.bsq`: float32 little-endian, band-sequential. Sidecar JSON at
// "<payload>.json": {"width","height","bands","dtype":"f32le","order":"bsq","name"}.
// Masks use a `.mask` payload of uint8 {0,1} row-major, "dtype":"u8", bands 1.

void save_cube(const HsiCube& cube, const std::filesystem::path& payload_path);
HsiCube load_cube(const std::filesystem::path& payload_path);

void save_mask(const GroundTruthMask& mask, const std::filesystem::path& payload_path);
GroundTruthMask load_mask(const std::filesystem::path& payload_path);

}  // namespace clhad
