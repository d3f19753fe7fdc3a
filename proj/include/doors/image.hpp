#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace doors {

// Planar RGB, [3, H, W], intensities in [0, 1].
struct Image {
  int h = 0, w = 0;
  std::vector<float> pix;

  Image() = default;
  Image(int height, int width) : h(height), w(width), pix(3LL * height * width, 0.f) {}

  float& at(int c, int y, int x) { return pix[(static_cast<size_t>(c) * h + y) * w + x]; }
  float at(int c, int y, int x) const { return pix[(static_cast<size_t>(c) * h + y) * w + x]; }
  size_t numel() const { return pix.size(); }
};

Image mirror_horizontal(const Image& im);
double mean_abs_diff(const Image& a, const Image& b);

// 8-bit PNG, intensity = round(255 * value). Fixed encoder settings so
// identical pixels give identical bytes.
void write_png(const std::filesystem::path& path, const Image& im);
Image read_png(const std::filesystem::path& path);

// Row-major grid of equally sized tiles with a white gutter between them.
Image contact_sheet(const std::vector<Image>& tiles, int cols, int gutter = 2);

}  // namespace doors
