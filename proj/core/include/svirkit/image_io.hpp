#pragma once

#include <string>

#include <Eigen/Dense>

namespace svirkit {

// Grayscale image convention: row 0 is the top scanline.  PFM files store
// 32-bit floats (negative scale marks little-endian, rows bottom-up); PGM
// copies are 8-bit P5 for quick display.

void write_pfm(const Eigen::MatrixXd& image, const std::string& path);
Eigen::MatrixXd read_pfm(const std::string& path);

// Linear map of [lo, hi] onto [0, 255] with clamping; lo == hi uses the
// image's own range.
void write_pgm(const Eigen::MatrixXd& image, const std::string& path, double lo = 0.0,
               double hi = 0.0);

} // namespace svirkit
