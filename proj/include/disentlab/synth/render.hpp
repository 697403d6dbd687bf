#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "disentlab/io/image.hpp"
#include "disentlab/synth/factor_space.hpp"

namespace disentlab::synth {

enum class Shape { square = 0, ellipse = 1, heart = 2 };
enum class Texture { solid = 0, checker = 1, stripes = 2, dots = 3, noise = 4 };

struct RenderSpec {
  int image_side = 64;
  std::array<std::array<float, 3>, 7> palette{{{1.0f, 0.0f, 0.0f},
                                               {0.0f, 1.0f, 0.0f},
                                               {0.0f, 0.0f, 1.0f},
                                               {1.0f, 1.0f, 1.0f},
                                               {1.0f, 1.0f, 0.0f},
                                               {1.0f, 0.0f, 1.0f},
                                               {0.0f, 1.0f, 1.0f}}};
  // Side of the shape's bounding box as a fraction of the image side.
  std::vector<double> scale_fractions{0.25, 0.30, 0.35, 0.40, 0.45, 0.50};
  // Texture intensity never drops to zero so the foreground mask stays
  // independent of texture and color.
  float texture_low = 0.35f;
  float texture_high = 1.0f;
  std::uint64_t noise_seed = 0x5eedULL;

  static RenderSpec desk() { return RenderSpec{}; }
  static RenderSpec paper() {
    RenderSpec s;
    s.image_side = 224;
    return s;
  }
  void validate() const;
};

/// Texture intensity at integer pixel (x, y), in [texture_low, texture_high].
float texture_value(const RenderSpec& spec, Texture texture, int x, int y);

/// Geometry-only test of whether pixel (x, y) is covered by the shape.
bool covers(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t, int x, int y);

/// Render one factor tuple. Background is black; the shape is filled with its
/// texture modulated by its color. Pure and deterministic.
Image render(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t);

/// Binary foreground mask (1 channel) matching render().
Image render_mask(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t);

/// Visit every grid tuple in flat-index order. Refuses grids above `budget`.
void enumerate(const FactorSpace& space, const RenderSpec& spec, std::uint64_t budget,
               const std::function<void(std::uint64_t, const FactorTuple&, const Image&)>& visit);

}  // namespace disentlab::synth
