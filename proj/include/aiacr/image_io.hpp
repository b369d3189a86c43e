#pragma once

// Grayscale PNG storage for slices and masks.

#include <filesystem>

#include "aiacr/geometry.hpp"

namespace aiacr {

/// Values in [0,1] stored as 16-bit gray, v -> round(v * 65535).
void write_image_png(const std::filesystem::path& path, const Grid<double>& image);
Grid<double> read_image_png(const std::filesystem::path& path);

/// Mask stored as 8-bit gray, 0 / 255. Any nonzero pixel reads back as 1.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask_png(const std::filesystem::path& path);

/// Rounds onto the 16-bit grid so a PNG round trip is exact.
double quantize16(double v);

}  // namespace aiacr
