#include "fdz/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <vector>

namespace fdz {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  return FilePtr(std::fopen(path.c_str(), mode));
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  throw corrupt_data(std::string("png: ") + msg);
}
void png_warn_fn(png_structp, png_const_charp) {}

Image load_png(std::FILE* f, const std::string& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
  if (!png) throw io_error("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("png: allocation failure");
  }
  struct Guard {
    png_structp p;
    png_infop i;
    ~Guard() { png_destroy_read_struct(&p, &i, nullptr); }
  } guard{png, info};

  png_init_io(png, f);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 8)
    throw unsupported_format(path + ": only 8-bit PNG is supported (got bit depth " +
                             std::to_string(bit_depth) + ")");
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)
    throw unsupported_format(path + ": only grayscale or RGB PNG is supported");

  const int h = static_cast<int>(png_get_image_height(png, info));
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int c = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;

  std::vector<unsigned char> row(static_cast<size_t>(w) * c);
  Image img(h, w, c);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        img.at(y, x, ch) = static_cast<float>(row[static_cast<size_t>(x) * c + ch]) / 255.f;
  }
  png_read_end(png, nullptr);
  return img;
}

int ppm_next_token(std::FILE* f, char* buf, int cap, const std::string& path) {
  int ch;
  do {
    ch = std::fgetc(f);
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = std::fgetc(f);
    }
  } while (ch != EOF && std::isspace(ch));
  if (ch == EOF) throw corrupt_data(path + ": truncated PPM header");
  int n = 0;
  while (ch != EOF && !std::isspace(ch)) {
    if (n + 1 >= cap) throw corrupt_data(path + ": malformed PPM header");
    buf[n++] = static_cast<char>(ch);
    ch = std::fgetc(f);
  }
  buf[n] = '\0';
  return n;
}

long ppm_next_int(std::FILE* f, const std::string& path) {
  char buf[32];
  ppm_next_token(f, buf, sizeof(buf), path);
  char* end = nullptr;
  long v = std::strtol(buf, &end, 10);
  if (end == buf || *end != '\0') throw corrupt_data(path + ": malformed PPM header");
  return v;
}

Image load_ppm(std::FILE* f, const std::string& path) {
  char magic[8];
  ppm_next_token(f, magic, sizeof(magic), path);
  if (std::strcmp(magic, "P6") != 0)
    throw unsupported_format(path + ": only binary PPM (P6) is supported");
  long w = ppm_next_int(f, path);
  long h = ppm_next_int(f, path);
  long maxval = ppm_next_int(f, path);
  if (w < 1 || h < 1) throw corrupt_data(path + ": bad PPM dimensions");
  if (maxval != 255)
    throw unsupported_format(path + ": only 8-bit PPM (maxval 255) is supported");

  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  Image img(static_cast<int>(h), static_cast<int>(w), 3);
  for (long y = 0; y < h; ++y) {
    if (std::fread(row.data(), 1, row.size(), f) != row.size())
      throw corrupt_data(path + ": truncated PPM payload");
    for (long x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img.at(static_cast<int>(y), static_cast<int>(x), ch) =
            static_cast<float>(row[static_cast<size_t>(x) * 3 + ch]) / 255.f;
  }
  return img;
}

void save_png(const Image& img, const std::string& path) {
  FilePtr f = open_file(path, "wb");
  if (!f) throw unwritable_path("cannot open for writing: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
  if (!png) throw io_error("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("png: allocation failure");
  }
  struct Guard {
    png_structp p;
    png_infop i;
    ~Guard() { png_destroy_write_struct(&p, &i); }
  } guard{png, info};

  png_init_io(png, f.get());
  const int color_type = img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width(), img.height(), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed encoder settings keep output bytes deterministic within a build.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_write_info(png, info);

  const int c = img.channels();
  std::vector<unsigned char> row(static_cast<size_t>(img.width()) * c);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int ch = 0; ch < c; ++ch)
        row[static_cast<size_t>(x) * c + ch] = quantize_u8(img.at(y, x, ch));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

void save_ppm(const Image& img, const std::string& path) {
  FilePtr f = open_file(path, "wb");
  if (!f) throw unwritable_path("cannot open for writing: " + path);
  std::string header =
      "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size())
    throw unwritable_path("write failed: " + path);
  std::vector<unsigned char> row(static_cast<size_t>(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x)
      for (int ch = 0; ch < 3; ++ch)
        row[static_cast<size_t>(x) * 3 + ch] =
            quantize_u8(img.at(y, x, img.channels() == 1 ? 0 : ch));
    if (std::fwrite(row.data(), 1, row.size(), f.get()) != row.size())
      throw unwritable_path("write failed: " + path);
  }
}

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Image load_image(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  if (!f) throw file_not_found("no such file: " + path);

  unsigned char sig[8] = {0};
  size_t got = std::fread(sig, 1, sizeof(sig), f.get());
  std::rewind(f.get());
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (got >= 8 && std::memcmp(sig, png_sig, 8) == 0) return load_png(f.get(), path);
  if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return load_ppm(f.get(), path);
  throw unsupported_format(path + ": not a PNG or binary PPM file");
}

void save_image(const Image& img, const std::string& path) {
  if (has_suffix(path, ".ppm")) {
    save_ppm(img, path);
  } else if (has_suffix(path, ".png")) {
    save_png(img, path);
  } else {
    throw unsupported_format(path + ": unknown output extension (use .png or .ppm)");
  }
}

}  // namespace fdz
