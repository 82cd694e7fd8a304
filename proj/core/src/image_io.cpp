#include "svirkit/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "svirkit/errors.hpp"

namespace svirkit {

namespace {

std::uint32_t swap32(std::uint32_t x) {
  return ((x & 0xFFu) << 24) | ((x & 0xFF00u) << 8) | ((x >> 8) & 0xFF00u) | (x >> 24);
}

void put_float_le(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  if constexpr (std::endian::native == std::endian::big) bits = swap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), 4);
}

float get_float(std::ifstream& in, bool file_little) {
  std::uint32_t bits;
  in.read(reinterpret_cast<char*>(&bits), 4);
  if (!in) throw ValidationError("PFM pixel data truncated");
  const bool host_little = std::endian::native == std::endian::little;
  if (host_little != file_little) bits = swap32(bits);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

} // namespace

void write_pfm(const Eigen::MatrixXd& image, const std::string& path) {
  if (image.size() == 0) throw ValidationError("cannot write an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write image " + path);
  out << "Pf\n" << image.cols() << " " << image.rows() << "\n-1.0\n";
  for (long i = image.rows() - 1; i >= 0; --i)
    for (long j = 0; j < image.cols(); ++j) put_float_le(out, static_cast<float>(image(i, j)));
}

Eigen::MatrixXd read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open image " + path);
  std::string magic;
  long width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (magic != "Pf") throw ValidationError("not a grayscale PFM file: " + path);
  if (width < 1 || height < 1) throw ValidationError("PFM header has invalid dimensions");
  if (scale == 0.0) throw ValidationError("PFM header has zero scale");
  in.get(); // single whitespace byte ending the header
  Eigen::MatrixXd image(height, width);
  const bool little = scale < 0.0;
  for (long i = height - 1; i >= 0; --i)
    for (long j = 0; j < width; ++j) image(i, j) = get_float(in, little);
  return image;
}

void write_pgm(const Eigen::MatrixXd& image, const std::string& path, double lo, double hi) {
  if (image.size() == 0) throw ValidationError("cannot write an empty image");
  if (lo == hi) {
    lo = image.minCoeff();
    hi = image.maxCoeff();
    if (lo == hi) hi = lo + 1.0;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write image " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (long i = 0; i < image.rows(); ++i)
    for (long j = 0; j < image.cols(); ++j) {
      const double t = std::clamp((image(i, j) - lo) / (hi - lo), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
}

} // namespace svirkit
