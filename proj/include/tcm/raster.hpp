#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"

namespace tcm {

// Interleaved (row, col, channel) image with float samples.
struct Raster {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Raster() = default;
  Raster(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {
    require(h >= 1 && w >= 1 && c >= 1, "InvalidRaster", "raster dimensions must be positive",
            ErrorKind::data);
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  bool empty() const { return data.empty(); }

  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)) *
           static_cast<std::size_t>(channels);
  }
  float& at(int row, int col, int ch) { return data[offset(row, col) + static_cast<std::size_t>(ch)]; }
  float at(int row, int col, int ch) const { return data[offset(row, col) + static_cast<std::size_t>(ch)]; }

  std::span<const float> pixel(int row, int col) const {
    return {data.data() + offset(row, col), static_cast<std::size_t>(channels)};
  }
  std::span<float> pixel(int row, int col) {
    return {data.data() + offset(row, col), static_cast<std::size_t>(channels)};
  }

  bool same_shape(const Raster& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  friend bool operator==(const Raster&, const Raster&) = default;
};

// Binary raster; 1 marks footprint pixels.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0) {}

  std::uint8_t& at(int row, int col) { return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)]; }
  std::uint8_t at(int row, int col) const { return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
  std::size_t size() const { return data.size(); }
  friend bool operator==(const Mask&, const Mask&) = default;
};

}  // namespace tcm
