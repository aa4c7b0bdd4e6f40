#pragma once

// Minimal 8-bit grayscale PNG writer/reader for frame export and import.

#include <string>

#include "nca/frame.hpp"

namespace nca {

void write_png_gray(const std::string& path, const Frame& frame);
Frame read_png_gray(const std::string& path);  // converts color inputs to luma

}  // namespace nca
