#pragma once

#include <string>

#include "wmc/tensor.hpp"

namespace wmc {

// Writes an [H, W, 3] float image in [0,1] as an 8-bit RGB PNG.
void write_png(const std::string& path, const Tensor32& rgb);

// Writes an [H, W] float map as a grayscale PNG normalized to [lo, hi].
void write_png_gray(const std::string& path, const Tensor32& gray, float lo, float hi);

}  // namespace wmc
