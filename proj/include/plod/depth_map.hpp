#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "plod/errors.hpp"

namespace plod {

/// Dense per-pixel depth raster (meters, row-major); 0 marks invalid.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), data(w * h, 0.0f) {}

  static bool is_valid(float d) { return d > 0.0f && std::isfinite(d); }

  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width && v >= 0 && v < height;
  }

  float at(int u, int v) const { return data[v * width + u]; }
  float& at(int u, int v) { return data[v * width + u]; }
};

// Binary raster file: magic "SPLD", u32 width, u32 height, u32 reserved,
// then width*height little-endian float32 row-major.

inline void write_spld(const DepthMap& map, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetFormatError("cannot open for writing: " + path.string());
  const char magic[4] = {'S', 'P', 'L', 'D'};
  const std::uint32_t w = map.width, h = map.height, reserved = 0;
  f.write(magic, 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  f.write(reinterpret_cast<const char*>(&reserved), 4);
  f.write(reinterpret_cast<const char*>(map.data.data()),
          static_cast<std::streamsize>(map.data.size() * sizeof(float)));
  if (!f) throw DatasetFormatError("short write: " + path.string());
}

inline DepthMap read_spld(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetFormatError("cannot open: " + path.string());
  char magic[4];
  std::uint32_t w = 0, h = 0, reserved = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  f.read(reinterpret_cast<char*>(&reserved), 4);
  if (!f || std::memcmp(magic, "SPLD", 4) != 0)
    throw DatasetFormatError("bad depth raster header: " + path.string());
  if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16)
    throw DatasetFormatError("implausible raster size: " + path.string());
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  f.read(reinterpret_cast<char*>(map.data.data()),
         static_cast<std::streamsize>(map.data.size() * sizeof(float)));
  if (!f) throw DatasetFormatError("truncated raster: " + path.string());
  return map;
}

}  // namespace plod
