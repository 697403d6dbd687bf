#include "disentlab/io/preprocess.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"

namespace disentlab::io {

Image resize_bilinear(const Image& image, int out_height, int out_width) {
  if (image.empty()) throw ValidationError("cannot resize a zero-area image");
  Image out(out_height, out_width, image.channels);
  const double sy = static_cast<double>(image.height) / out_height;
  const double sx = static_cast<double>(image.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = image.at(y0, x0, c) + wx * (image.at(y0, x1, c) - image.at(y0, x0, c));
        const double bottom = image.at(y1, x0, c) + wx * (image.at(y1, x1, c) - image.at(y1, x0, c));
        out.at(y, x, c) = static_cast<float>(top + wy * (bottom - top));
      }
    }
  }
  return out;
}

Image pad_and_resize(const Image& image, int side) {
  if (image.empty()) throw ValidationError("cannot preprocess a zero-area image");
  if (image.channels != 1 && image.channels != 3) {
    throw ValidationError("expected 1 or 3 channels, got " + std::to_string(image.channels));
  }
  if (side <= 0) throw ValidationError("target side must be positive");
  const int square = std::max(image.height, image.width);
  const int top = (square - image.height) / 2;
  const int left = (square - image.width) / 2;
  Image padded(square, square, 3, 0.0f);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        padded.at(y + top, x + left, c) = image.at(y, x, image.channels == 1 ? 0 : c);
      }
    }
  }
  if (square == side) return padded;
  return resize_bilinear(padded, side, side);
}

Manifest stratified_split(const Manifest& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& r = manifest.rows[i];
    if (!r.class_label) throw ValidationError("row " + r.id + " has no class_label; cannot stratify");
    by_class[*r.class_label].push_back(i);
  }
  Manifest out = manifest;
  Rng rng(seed);
  for (auto& [label, members] : by_class) {
    if (members.size() < 2) throw ValidationError("class " + label + " has fewer than 2 items");
    const auto n = static_cast<long>(members.size());
    const long target = std::clamp(std::lround(fraction * static_cast<double>(n)), 1L, n - 1);
    long have_train = 0;
    std::vector<std::size_t> open;
    for (auto i : members) {
      if (!manifest.rows[i].split) open.push_back(i);
      else if (*manifest.rows[i].split == Split::train) ++have_train;
    }
    rng.shuffle(std::span<std::size_t>(open));
    long need = std::clamp(target - have_train, 0L, static_cast<long>(open.size()));
    for (auto i : open) {
      out.rows[i].split = need > 0 ? Split::train : Split::test;
      if (need > 0) --need;
    }
  }
  return out;
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw ValidationError("cannot read PNG " + path.string() + ": " + png.message);
  }
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ValidationError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image img(static_cast<int>(png.height), static_cast<int>(png.width), channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = buffer[i] / 255.0f;
  return img;
}

}  // namespace disentlab::io
