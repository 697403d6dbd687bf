#pragma once

#include <cstddef>
#include <vector>

namespace disentlab {

/// Interleaved (row-major, channel-last) float image with values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return height <= 0 || width <= 0; }
};

}  // namespace disentlab
