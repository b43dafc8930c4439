#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semicount {

// 8-bit grayscale PNG. Values clamped to [0,1] and quantised by round(v*255).
void write_png_gray8(const std::string& path, std::size_t height,
                     std::size_t width, const std::vector<double>& values01);

// RGB variant; rgb[(y*width+x)*3 + c] in [0,1].
void write_png_rgb8(const std::string& path, std::size_t height,
                    std::size_t width, const std::vector<std::uint8_t>& rgb);

struct PngImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;              // 1 or 3
  std::vector<double> values01;          // planar [c][y][x], in [0,1]
};

PngImage read_png(const std::string& path);

}  // namespace semicount
