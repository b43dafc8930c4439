#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace semicount::plot {

using Color = std::array<std::uint8_t, 3>;

struct Series {
  std::string name;
  Color color{0, 0, 0};
  std::vector<double> y;  // x is the 1-based index (epoch)
};

// Raster line chart with axes, ticks, and a legend; text uses a built-in
// 5x7 uppercase font. Intended as a quick visual companion to the CSV.
void line_chart(const std::string& path, const std::string& title,
                const std::vector<Series>& series, std::size_t width = 720,
                std::size_t height = 440, bool log_y = false);

struct Dot {
  double x = 0.0, y = 0.0;
  Color color{0, 0, 0};
  int radius = 2;
};

void scatter(const std::string& path, const std::string& title, const std::vector<Dot>& dots,
             double xmin, double xmax, double ymin, double ymax, std::size_t width = 360,
             std::size_t height = 360);

}  // namespace semicount::plot
