#include "clhad/cube.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace clhad {

namespace {

using nlohmann::json;

json read_sidecar(const std::filesystem::path& payload_path) {
  const std::filesystem::path sidecar = payload_path.string() + ".json";
  std::ifstream in(sidecar);
  if (!in) throw FormatError("missing sidecar header: " + sidecar.string());
  json header;
  try {
    in >> header;
  } catch (const json::exception& e) {
    throw FormatError("unparseable sidecar " + sidecar.string() + ": " + e.what());
  }
  return header;
}

void write_sidecar(const json& header, const std::filesystem::path& payload_path) {
  const std::filesystem::path sidecar = payload_path.string() + ".json";
  std::ofstream out(sidecar);
  if (!out) throw DataError("cannot write sidecar: " + sidecar.string());
  out << header.dump(2) << "\n";
}

std::vector<char> read_payload(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open payload: " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff n = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<std::size_t>(n));
  in.read(bytes.data(), n);
  if (!in) throw FormatError("short read on payload: " + path.string());
  return bytes;
}

void write_payload(const void* data, std::size_t n, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write payload: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw DataError("short write on payload: " + path.string());
}

int header_int(const json& h, const char* key, const std::filesystem::path& p) {
  if (!h.contains(key) || !h[key].is_number_integer())
    throw FormatError(std::string("sidecar missing integer field '") + key + "': " + p.string());
  return h[key].get<int>();
}

}  // namespace

void validate_finite(const HsiCube& cube) {
  for (float v : cube.data)
    if (!std::isfinite(v)) throw DataError("cube '" + cube.name + "' contains non-finite values");
}

std::pair<float, float> normalize(HsiCube& cube) {
  const auto [lo_it, hi_it] = std::minmax_element(cube.data.begin(), cube.data.end());
  const float lo = *lo_it, hi = *hi_it;
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    for (float& v : cube.data) v = (v - lo) * inv;
  } else {
    std::fill(cube.data.begin(), cube.data.end(), 0.5f);
  }
  return {lo, hi};
}

HsiCube resample_bands(const HsiCube& cube, int target_bands) {
  if (target_bands < 2) throw ArgumentError("resample_bands: target_bands must be >= 2");
  if (target_bands > cube.bands)
    throw ArgumentError("resample_bands: target exceeds source band count");
  if (target_bands == cube.bands) return cube;

  HsiCube out(cube.width, cube.height, target_bands, cube.name);
  const int npix = cube.pixels();
  const double step = static_cast<double>(cube.bands - 1) / (target_bands - 1);
  for (int j = 0; j < target_bands; ++j) {
    const double pos = j * step;
    const int b0 = std::min(static_cast<int>(pos), cube.bands - 2);
    const float frac = static_cast<float>(pos - b0);
    const float* src0 = cube.data.data() + static_cast<std::size_t>(b0) * npix;
    const float* src1 = src0 + npix;
    float* dst = out.data.data() + static_cast<std::size_t>(j) * npix;
    for (int i = 0; i < npix; ++i) dst[i] = src0[i] + frac * (src1[i] - src0[i]);
  }
  return out;
}

void save_cube(const HsiCube& cube, const std::filesystem::path& payload_path) {
  write_payload(cube.data.data(), cube.data.size() * sizeof(float), payload_path);
  json header = {{"width", cube.width},   {"height", cube.height}, {"bands", cube.bands},
                 {"dtype", "f32le"},      {"order", "bsq"},        {"name", cube.name}};
  write_sidecar(header, payload_path);
}

HsiCube load_cube(const std::filesystem::path& payload_path) {
  const json header = read_sidecar(payload_path);
  HsiCube cube;
  cube.width = header_int(header, "width", payload_path);
  cube.height = header_int(header, "height", payload_path);
  cube.bands = header_int(header, "bands", payload_path);
  cube.name = header.value("name", std::string{});
  if (header.value("dtype", "") != "f32le" || header.value("order", "") != "bsq")
    throw FormatError("unsupported cube encoding in " + payload_path.string());
  if (!cube.shape_valid()) throw FormatError("invalid cube shape in " + payload_path.string());

  const std::vector<char> bytes = read_payload(payload_path);
  const std::size_t expected =
      static_cast<std::size_t>(cube.pixels()) * cube.bands * sizeof(float);
  if (bytes.size() != expected)
    throw FormatError("payload size mismatch for " + payload_path.string() + ": header declares " +
                      std::to_string(expected) + " bytes, file has " +
                      std::to_string(bytes.size()));
  cube.data.resize(bytes.size() / sizeof(float));
  std::memcpy(cube.data.data(), bytes.data(), bytes.size());
  validate_finite(cube);
  return cube;
}

void save_mask(const GroundTruthMask& mask, const std::filesystem::path& payload_path) {
  write_payload(mask.labels.data(), mask.labels.size(), payload_path);
  json header = {{"width", mask.width}, {"height", mask.height}, {"bands", 1},
                 {"dtype", "u8"},       {"order", "bsq"},        {"name", ""}};
  write_sidecar(header, payload_path);
}

GroundTruthMask load_mask(const std::filesystem::path& payload_path) {
  const json header = read_sidecar(payload_path);
  GroundTruthMask mask;
  mask.width = header_int(header, "width", payload_path);
  mask.height = header_int(header, "height", payload_path);
  if (header_int(header, "bands", payload_path) != 1 || header.value("dtype", "") != "u8")
    throw FormatError("unsupported mask encoding in " + payload_path.string());
  if (mask.width < 1 || mask.height < 1)
    throw FormatError("invalid mask shape in " + payload_path.string());

  const std::vector<char> bytes = read_payload(payload_path);
  if (bytes.size() != static_cast<std::size_t>(mask.pixels()))
    throw FormatError("mask payload size mismatch for " + payload_path.string());
  mask.labels.assign(bytes.begin(), bytes.end());
  for (std::uint8_t v : mask.labels)
    if (v > 1) throw DataError("mask labels must be 0/1 in " + payload_path.string());
  return mask;
}

}  // namespace clhad
