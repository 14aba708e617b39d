#pragma once

#include <string>

#include "mvp/matrix.hpp"

namespace mvp {

// Binary PGM (P5, maxval 255).  Values are grayscale in [0,1]; writing
// quantizes to 8 bits, so a roundtrip may differ by up to 1/255 per pixel.
void write_pgm(const Matrix& image, const std::string& path);
Matrix read_pgm(const std::string& path);

}  // namespace mvp
