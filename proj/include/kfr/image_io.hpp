#pragma once

#include <string>

#include "kfr/geometry.hpp"

namespace kfr::io {

// Raster I/O, format chosen by extension: .ppm/.pgm (binary, 8-bit) or
// .pfm (float32, lossless round-trip of ImageBuffer contents).
ImageBuffer load_image(const std::string& path);
void save_image(const std::string& path, const ImageBuffer& img);

// Landmark text files: 68 lines, each "x y" as decimal floats, pixel
// coordinates with origin top-left.
LandmarkSet load_landmarks(const std::string& path);
void save_landmarks(const std::string& path, const LandmarkSet& lms);

}  // namespace kfr::io
