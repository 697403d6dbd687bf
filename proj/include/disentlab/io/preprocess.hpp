#pragma once

#include <cstdint>
#include <filesystem>

#include "disentlab/io/image.hpp"
#include "disentlab/io/manifest.hpp"

namespace disentlab::io {

/// Zero-pad symmetrically to a square (odd remainder goes to the bottom or
/// right), then bilinear-resize to side x side. 1-channel input is
/// replicated to 3 channels; the result always has 3 channels.
Image pad_and_resize(const Image& image, int side);

// Half-pixel-centre bilinear resize with edge clamping. Identity at equal size.
Image resize_bilinear(const Image& image, int out_height, int out_width);

/// Per-class stratified train/test assignment. Rows that already carry a
/// split keep it; the remaining rows of each class are assigned so the class
/// reaches round(fraction * n) train rows where possible.
Manifest stratified_split(const Manifest& manifest, double fraction, std::uint64_t seed);

/// 8-bit PNG to float image (gray stays 1 channel, alpha dropped).
Image read_png(const std::filesystem::path& path);

}  // namespace disentlab::io
