#pragma once

// Volumetric data model and bit-exact file I/O. A stored grid is a pair of
// files: "<stem>.json" carrying dims/spacing/dtype and "<stem>.raw" carrying
// the little-endian payload, z slowest, then y, then x.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpnet/common.hpp"

namespace cpnet {

struct Volume {
  Shape3 dims;
  std::array<double, 3> spacing_mm = {1.0, 1.0, 1.0};  // (sz, sy, sx)
  std::vector<float> voxels;

  float& at(int z, int y, int x) { return voxels[flat_index(dims, z, y, x)]; }
  float at(int z, int y, int x) const { return voxels[flat_index(dims, z, y, x)]; }
};

struct LabelVolume {
  Shape3 dims;
  std::array<double, 3> spacing_mm = {1.0, 1.0, 1.0};
  std::vector<std::uint8_t> labels;

  std::uint8_t& at(int z, int y, int x) { return labels[flat_index(dims, z, y, x)]; }
  std::uint8_t at(int z, int y, int x) const { return labels[flat_index(dims, z, y, x)]; }
};

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kCortex = 1;
inline constexpr std::uint8_t kMedulla = 2;
inline constexpr int kNumClasses = 3;

inline Volume make_volume(Shape3 dims, float fill = 0.0f,
                          std::array<double, 3> spacing = {1.0, 1.0, 1.0}) {
  Volume v;
  v.dims = dims;
  v.spacing_mm = spacing;
  v.voxels.assign(static_cast<std::size_t>(dims.voxels()), fill);
  return v;
}

inline LabelVolume make_label_volume(Shape3 dims, std::uint8_t fill = 0,
                                     std::array<double, 3> spacing = {1.0, 1.0, 1.0}) {
  LabelVolume v;
  v.dims = dims;
  v.spacing_mm = spacing;
  v.labels.assign(static_cast<std::size_t>(dims.voxels()), fill);
  return v;
}

namespace detail {

inline void validate_header_fields(const Shape3& dims, const std::array<double, 3>& spacing) {
  if (dims.d <= 0 || dims.h <= 0 || dims.w <= 0)
    throw ValidationError("volume dims must be positive, got " + dims.str());
  for (double s : spacing)
    if (!(s > 0.0))
      throw ValidationError("spacing components must be > 0");
}

inline void validate(const Volume& v) {
  validate_header_fields(v.dims, v.spacing_mm);
  if (static_cast<std::int64_t>(v.voxels.size()) != v.dims.voxels())
    throw ValidationError("voxel count does not match dims");
  for (float x : v.voxels)
    if (!std::isfinite(x)) throw ValidationError("volume contains non-finite value");
}

inline void validate(const LabelVolume& v) {
  validate_header_fields(v.dims, v.spacing_mm);
  if (static_cast<std::int64_t>(v.labels.size()) != v.dims.voxels())
    throw ValidationError("label count does not match dims");
  for (std::uint8_t l : v.labels)
    if (l >= kNumClasses) throw ValidationError("label out of {0,1,2}");
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw WriteError("short write to " + path.string());
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path.string());
  const auto size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(size));
  in.read(buf.data(), size);
  if (!in) throw FormatError("short read from " + path.string());
  return buf;
}

inline void write_header(const std::filesystem::path& stem, const Shape3& dims,
                         const std::array<double, 3>& spacing, const char* dtype) {
  nlohmann::json j;
  j["dims"] = {dims.d, dims.h, dims.w};
  j["spacing_mm"] = {spacing[0], spacing[1], spacing[2]};
  j["dtype"] = dtype;
  const std::string text = j.dump(2) + "\n";
  write_file(std::filesystem::path(stem) += ".json", text.data(), text.size());
}

}  // namespace detail

inline void write_volume(const std::filesystem::path& stem, const Volume& v) {
  detail::validate(v);
  static_assert(sizeof(float) == 4);
  detail::write_header(stem, v.dims, v.spacing_mm, "f32le");
  detail::write_file(std::filesystem::path(stem) += ".raw", v.voxels.data(),
                     v.voxels.size() * sizeof(float));
}

inline void write_volume(const std::filesystem::path& stem, const LabelVolume& v) {
  detail::validate(v);
  detail::write_header(stem, v.dims, v.spacing_mm, "u8");
  detail::write_file(std::filesystem::path(stem) += ".raw", v.labels.data(), v.labels.size());
}

using AnyVolume = std::variant<Volume, LabelVolume>;

inline AnyVolume read_volume(const std::filesystem::path& stem) {
  const auto header_path = std::filesystem::path(stem) += ".json";
  const auto raw_path = std::filesystem::path(stem) += ".raw";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(header_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt header " + header_path.string() + ": " + e.what());
  }

  Shape3 dims;
  std::array<double, 3> spacing;
  std::string dtype;
  try {
    const auto& jd = j.at("dims");
    dims = {jd.at(0).get<int>(), jd.at(1).get<int>(), jd.at(2).get<int>()};
    const auto& js = j.at("spacing_mm");
    spacing = {js.at(0).get<double>(), js.at(1).get<double>(), js.at(2).get<double>()};
    dtype = j.at("dtype").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed header " + header_path.string() + ": " + e.what());
  }
  if (dims.d <= 0 || dims.h <= 0 || dims.w <= 0)
    throw FormatError("header dims not positive in " + header_path.string());

  const auto raw = detail::read_file(raw_path);
  const auto n = static_cast<std::size_t>(dims.voxels());

  if (dtype == "f32le") {
    if (raw.size() != n * sizeof(float))
      throw FormatError("payload size mismatch in " + raw_path.string() + ": expected " +
                        std::to_string(n * sizeof(float)) + " bytes, got " +
                        std::to_string(raw.size()));
    Volume v;
    v.dims = dims;
    v.spacing_mm = spacing;
    v.voxels.resize(n);
    std::memcpy(v.voxels.data(), raw.data(), raw.size());
    return v;
  }
  if (dtype == "u8") {
    if (raw.size() != n)
      throw FormatError("payload size mismatch in " + raw_path.string() + ": expected " +
                        std::to_string(n) + " bytes, got " + std::to_string(raw.size()));
    LabelVolume v;
    v.dims = dims;
    v.spacing_mm = spacing;
    v.labels.assign(raw.begin(), raw.end());
    for (std::uint8_t l : v.labels)
      if (l >= kNumClasses)
        throw FormatError("label payload contains value outside {0,1,2} in " + raw_path.string());
    return v;
  }
  throw FormatError("unknown dtype \"" + dtype + "\" in " + header_path.string());
}

inline Volume read_scalar_volume(const std::filesystem::path& stem) {
  auto any = read_volume(stem);
  if (!std::holds_alternative<Volume>(any))
    throw FormatError("expected f32le volume at " + stem.string());
  return std::get<Volume>(std::move(any));
}

inline LabelVolume read_label_volume(const std::filesystem::path& stem) {
  auto any = read_volume(stem);
  if (!std::holds_alternative<LabelVolume>(any))
    throw FormatError("expected u8 label volume at " + stem.string());
  return std::get<LabelVolume>(std::move(any));
}

}  // namespace cpnet
