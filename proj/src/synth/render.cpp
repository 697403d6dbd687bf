#include "disentlab/synth/render.hpp"

#include <cmath>
#include <numbers>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"

namespace disentlab::synth {

namespace {

struct Placement {
  Texture texture = Texture::solid;
  std::array<float, 3> color{};
  Shape shape = Shape::square;
  double half_extent = 0.0;
  double cos_t = 1.0;
  double sin_t = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

int value_or(const FactorSpace& space, const FactorTuple& t, const char* name, int fallback) {
  return space.contains(name) ? t[space.index_of(name)] : fallback;
}

double position_center(const FactorSpace& space, const FactorTuple& t, const char* name, int side) {
  if (!space.contains(name)) return side * 0.5;
  const auto& f = space.factor(space.index_of(name));
  const double card = f.cardinality;
  const double p = t[space.index_of(name)];
  // dSprites-style span of 60% of the image, centered at value card/2.
  return side * (0.5 + 0.6 * (p - std::floor(card / 2.0)) / card);
}

Placement place(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t) {
  space.validate(t);
  for (const char* required : {"Texture", "Color", "Shape", "Scale"}) {
    if (!space.contains(required)) throw ValidationError(std::string("render needs factor ") + required);
  }
  const auto check_card = [&](const char* name, std::size_t limit) {
    const auto& f = space.factor(space.index_of(name));
    if (static_cast<std::size_t>(f.cardinality) > limit) {
      throw ValidationError("factor " + f.name + " cardinality " + std::to_string(f.cardinality) +
                            " exceeds the " + std::to_string(limit) + " values the renderer knows");
    }
  };
  check_card("Texture", 5);
  check_card("Color", spec.palette.size());
  check_card("Shape", 3);
  check_card("Scale", spec.scale_fractions.size());

  Placement p;
  p.texture = static_cast<Texture>(t[space.index_of("Texture")]);
  p.color = spec.palette[static_cast<std::size_t>(t[space.index_of("Color")])];
  p.shape = static_cast<Shape>(t[space.index_of("Shape")]);
  p.half_extent = 0.5 * spec.scale_fractions[static_cast<std::size_t>(t[space.index_of("Scale")])] * spec.image_side;
  double angle = 0.0;
  if (space.contains("Orientation")) {
    const auto& f = space.factor(space.index_of("Orientation"));
    angle = 2.0 * std::numbers::pi * value_or(space, t, "Orientation", 0) / f.cardinality;
  }
  p.cos_t = std::cos(angle);
  p.sin_t = std::sin(angle);
  p.cx = position_center(space, t, "PosX", spec.image_side);
  p.cy = position_center(space, t, "PosY", spec.image_side);
  return p;
}

bool inside(const Placement& p, int x, int y) {
  const double dx = (x + 0.5) - p.cx;
  const double dy = (y + 0.5) - p.cy;
  const double u = (p.cos_t * dx + p.sin_t * dy) / p.half_extent;
  const double v = (-p.sin_t * dx + p.cos_t * dy) / p.half_extent;
  switch (p.shape) {
    case Shape::square:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case Shape::ellipse:
      return u * u + (v / 0.6) * (v / 0.6) <= 1.0;
    case Shape::heart: {
      // (X^2 + Y^2 - 1)^3 - X^2 Y^3 <= 0, fitted to the [-1, 1]^2 box.
      const double hx = 1.139 * u;
      const double hy = 0.118 - 1.118 * v;
      const double r = hx * hx + hy * hy - 1.0;
      return r * r * r - hx * hx * hy * hy * hy <= 0.0;
    }
  }
  return false;
}

}  // namespace

void RenderSpec::validate() const {
  if (image_side < 4) throw ValidationError("image_side must be at least 4");
  for (std::size_t i = 0; i < palette.size(); ++i) {
    for (std::size_t j = i + 1; j < palette.size(); ++j) {
      if (palette[i] == palette[j]) throw ValidationError("palette entries must be distinct");
    }
  }
  for (std::size_t i = 0; i < scale_fractions.size(); ++i) {
    if (scale_fractions[i] <= 0.0 || scale_fractions[i] > 1.0) {
      throw ValidationError("scale fractions must lie in (0, 1]");
    }
    if (i > 0 && scale_fractions[i] <= scale_fractions[i - 1]) {
      throw ValidationError("scale fractions must be strictly increasing");
    }
  }
  if (!(texture_low > 0.0f && texture_low < texture_high && texture_high <= 1.0f)) {
    throw ValidationError("texture intensities must satisfy 0 < low < high <= 1");
  }
}

float texture_value(const RenderSpec& spec, Texture texture, int x, int y) {
  bool high = true;
  switch (texture) {
    case Texture::solid:
      high = true;
      break;
    case Texture::checker:
      // Period 4 px: 2 px cells.
      high = ((x / 2) + (y / 2)) % 2 == 0;
      break;
    case Texture::stripes:
      // Period 4 px along the diagonal.
      high = ((x + y) % 4) < 2;
      break;
    case Texture::dots: {
      const double fx = std::fmod(x + 0.5, 5.0) - 2.5;
      const double fy = std::fmod(y + 0.5, 5.0) - 2.5;
      high = fx * fx + fy * fy <= 1.5 * 1.5;
      break;
    }
    case Texture::noise: {
      const auto key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 32) |
                       static_cast<std::uint32_t>(x);
      const auto h = splitmix64(key ^ spec.noise_seed);
      const float unit = static_cast<float>(h >> 40) * 0x1.0p-24f;
      return spec.texture_low + (spec.texture_high - spec.texture_low) * unit;
    }
  }
  return high ? spec.texture_high : spec.texture_low;
}

bool covers(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t, int x, int y) {
  return inside(place(space, spec, t), x, y);
}

Image render(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t) {
  const auto p = place(space, spec, t);
  const int side = spec.image_side;
  Image img(side, side, 3, 0.0f);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (!inside(p, x, y)) continue;
      const float tv = texture_value(spec, p.texture, x, y);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = p.color[static_cast<std::size_t>(c)] * tv;
    }
  }
  return img;
}

Image render_mask(const FactorSpace& space, const RenderSpec& spec, const FactorTuple& t) {
  const auto p = place(space, spec, t);
  const int side = spec.image_side;
  Image mask(side, side, 1, 0.0f);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (inside(p, x, y)) mask.at(y, x, 0) = 1.0f;
    }
  }
  return mask;
}

void enumerate(const FactorSpace& space, const RenderSpec& spec, std::uint64_t budget,
               const std::function<void(std::uint64_t, const FactorTuple&, const Image&)>& visit) {
  const auto n = space.grid_size();
  if (n > budget) {
    throw ValidationError("grid has " + std::to_string(n) + " items, budget allows " + std::to_string(budget));
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto t = space.tuple_at(i);
    visit(i, t, render(space, spec, t));
  }
}

}  // namespace disentlab::synth
