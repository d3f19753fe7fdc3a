#include "doors/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>

#include "doors/errors.hpp"

namespace doors {

Image mirror_horizontal(const Image& im) {
  Image out(im.h, im.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < im.h; ++y)
      for (int x = 0; x < im.w; ++x) out.at(c, y, x) = im.at(c, y, im.w - 1 - x);
  return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
  double s = 0;
  for (size_t i = 0; i < a.pix.size(); ++i) s += std::abs(static_cast<double>(a.pix[i]) - b.pix[i]);
  return s / static_cast<double>(a.pix.size());
}

namespace {

struct FileCloser {
  FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_png(const std::filesystem::path& path, const Image& im) {
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError("cannot open for write: " + path.string());
  FileCloser closer{f};

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed writing " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error writing " + path.string());
  }
  png_init_io(png, f);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, im.w, im.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<uint8_t> row(3LL * im.w);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = im.at(c, y, x);
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        row[3LL * x + c] = static_cast<uint8_t>(std::lround(255.0 * v));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open for read: " + path.string());
  FileCloser closer{f};

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed reading " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng error reading " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  Image im(h, w);
  std::vector<uint8_t> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) im.at(c, y, x) = row[3LL * x + c] / 255.f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return im;
}

Image contact_sheet(const std::vector<Image>& tiles, int cols, int gutter) {
  if (tiles.empty()) return Image(1, 1);
  const int th = tiles[0].h, tw = tiles[0].w;
  const int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
  Image sheet(rows * th + (rows - 1) * gutter, cols * tw + (cols - 1) * gutter);
  std::fill(sheet.pix.begin(), sheet.pix.end(), 1.f);
  for (size_t t = 0; t < tiles.size(); ++t) {
    const int r = static_cast<int>(t) / cols, cIdx = static_cast<int>(t) % cols;
    const int y0 = r * (th + gutter), x0 = cIdx * (tw + gutter);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) sheet.at(c, y0 + y, x0 + x) = tiles[t].at(c, y, x);
  }
  return sheet;
}

}  // namespace doors
