#pragma once

#include "fdz/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fdz {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct file_not_found : io_error {
  using io_error::io_error;
};
struct unsupported_format : io_error {
  using io_error::io_error;
};
struct corrupt_data : io_error {
  using io_error::io_error;
};
struct unwritable_path : io_error {
  using io_error::io_error;
};

// Reads an 8-bit PNG (grayscale or RGB) or binary PPM (P6). Each 8-bit code v
// maps to v/255 exactly. Format is selected by file content, not extension.
Image load_image(const std::string& path);

// Writes PNG or PPM depending on the path extension (.png / .ppm). Values are
// quantized with round-half-away-from-zero to v*255. Encoding is
// deterministic: saving the result of load(save(x)) reproduces the same bytes.
// PPM output is always 3-channel; grayscale images are saved with the gray
// plane replicated.
void save_image(const Image& img, const std::string& path);

// The quantizer used by save_image.
inline unsigned char quantize_u8(float v) {
  long q = std::lround(static_cast<double>(v) * 255.0);
  if (q < 0) q = 0;
  if (q > 255) q = 255;
  return static_cast<unsigned char>(q);
}

}  // namespace fdz
