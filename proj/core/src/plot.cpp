#include "semicount/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "semicount/png_io.hpp"

namespace semicount::plot {

namespace {

// 5x7 glyphs, 'X' = on. Uppercase + digits + chart punctuation.
const std::map<char, std::array<const char*, 7>>& glyphs() {
  static const std::map<char, std::array<const char*, 7>> g = {
      {'0', {".XXX.", "X...X", "X..XX", "X.X.X", "XX..X", "X...X", ".XXX."}},
      {'1', {"..X..", ".XX..", "..X..", "..X..", "..X..", "..X..", ".XXX."}},
      {'2', {".XXX.", "X...X", "....X", "...X.", "..X..", ".X...", "XXXXX"}},
      {'3', {".XXX.", "X...X", "....X", "..XX.", "....X", "X...X", ".XXX."}},
      {'4', {"...X.", "..XX.", ".X.X.", "X..X.", "XXXXX", "...X.", "...X."}},
      {'5', {"XXXXX", "X....", "XXXX.", "....X", "....X", "X...X", ".XXX."}},
      {'6', {".XXX.", "X....", "X....", "XXXX.", "X...X", "X...X", ".XXX."}},
      {'7', {"XXXXX", "....X", "...X.", "..X..", "..X..", "..X..", "..X.."}},
      {'8', {".XXX.", "X...X", "X...X", ".XXX.", "X...X", "X...X", ".XXX."}},
      {'9', {".XXX.", "X...X", "X...X", ".XXXX", "....X", "....X", ".XXX."}},
      {'A', {".XXX.", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"}},
      {'B', {"XXXX.", "X...X", "X...X", "XXXX.", "X...X", "X...X", "XXXX."}},
      {'C', {".XXX.", "X...X", "X....", "X....", "X....", "X...X", ".XXX."}},
      {'D', {"XXXX.", "X...X", "X...X", "X...X", "X...X", "X...X", "XXXX."}},
      {'E', {"XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "XXXXX"}},
      {'F', {"XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "X...."}},
      {'G', {".XXX.", "X...X", "X....", "X.XXX", "X...X", "X...X", ".XXXX"}},
      {'H', {"X...X", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"}},
      {'I', {".XXX.", "..X..", "..X..", "..X..", "..X..", "..X..", ".XXX."}},
      {'J', {"..XXX", "...X.", "...X.", "...X.", "...X.", "X..X.", ".XX.."}},
      {'K', {"X...X", "X..X.", "X.X..", "XX...", "X.X..", "X..X.", "X...X"}},
      {'L', {"X....", "X....", "X....", "X....", "X....", "X....", "XXXXX"}},
      {'M', {"X...X", "XX.XX", "X.X.X", "X.X.X", "X...X", "X...X", "X...X"}},
      {'N', {"X...X", "XX..X", "X.X.X", "X..XX", "X...X", "X...X", "X...X"}},
      {'O', {".XXX.", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."}},
      {'P', {"XXXX.", "X...X", "X...X", "XXXX.", "X....", "X....", "X...."}},
      {'Q', {".XXX.", "X...X", "X...X", "X...X", "X.X.X", "X..X.", ".XX.X"}},
      {'R', {"XXXX.", "X...X", "X...X", "XXXX.", "X.X..", "X..X.", "X...X"}},
      {'S', {".XXXX", "X....", "X....", ".XXX.", "....X", "....X", "XXXX."}},
      {'T', {"XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "..X.."}},
      {'U', {"X...X", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."}},
      {'V', {"X...X", "X...X", "X...X", "X...X", "X...X", ".X.X.", "..X.."}},
      {'W', {"X...X", "X...X", "X...X", "X.X.X", "X.X.X", "XX.XX", "X...X"}},
      {'X', {"X...X", "X...X", ".X.X.", "..X..", ".X.X.", "X...X", "X...X"}},
      {'Y', {"X...X", "X...X", ".X.X.", "..X..", "..X..", "..X..", "..X.."}},
      {'Z', {"XXXXX", "....X", "...X.", "..X..", ".X...", "X....", "XXXXX"}},
      {'.', {".....", ".....", ".....", ".....", ".....", ".XX..", ".XX.."}},
      {',', {".....", ".....", ".....", ".....", ".XX..", "..X..", ".X..."}},
      {'-', {".....", ".....", ".....", ".XXX.", ".....", ".....", "....."}},
      {'+', {".....", "..X..", "..X..", "XXXXX", "..X..", "..X..", "....."}},
      {'_', {".....", ".....", ".....", ".....", ".....", ".....", "XXXXX"}},
      {'/', {"....X", "....X", "...X.", "..X..", ".X...", "X....", "X...."}},
      {':', {".....", ".XX..", ".XX..", ".....", ".XX..", ".XX..", "....."}},
      {'%', {"XX..X", "XX..X", "...X.", "..X..", ".X...", "X..XX", "X..XX"}},
      {'=', {".....", ".....", "XXXXX", ".....", "XXXXX", ".....", "....."}},
      {'(', {"...X.", "..X..", ".X...", ".X...", ".X...", "..X..", "...X."}},
      {')', {".X...", "..X..", "...X.", "...X.", "...X.", "..X..", ".X..."}},
      {' ', {".....", ".....", ".....", ".....", ".....", ".....", "....."}},
  };
  return g;
}

struct Canvas {
  std::size_t w, h;
  std::vector<std::uint8_t> rgb;

  Canvas(std::size_t width, std::size_t height) : w(width), h(height), rgb(width * height * 3, 255) {}

  void set(std::ptrdiff_t x, std::ptrdiff_t y, Color c) {
    if (x < 0 || y < 0 || x >= std::ptrdiff_t(w) || y >= std::ptrdiff_t(h)) return;
    std::size_t i = (std::size_t(y) * w + std::size_t(x)) * 3;
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }

  void line(double x0, double y0, double x1, double y1, Color c, int thick = 1) {
    double dx = x1 - x0, dy = y1 - y0;
    int steps = std::max(1, int(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
    for (int i = 0; i <= steps; ++i) {
      double t = double(i) / steps;
      double x = x0 + t * dx, y = y0 + t * dy;
      for (int oy = 0; oy < thick; ++oy)
        for (int ox = 0; ox < thick; ++ox)
          set(std::ptrdiff_t(std::lround(x)) + ox, std::ptrdiff_t(std::lround(y)) + oy, c);
    }
  }

  void disc(double cx, double cy, int r, Color c) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (dx * dx + dy * dy <= r * r)
          set(std::ptrdiff_t(std::lround(cx)) + dx, std::ptrdiff_t(std::lround(cy)) + dy, c);
  }

  void text(std::ptrdiff_t x, std::ptrdiff_t y, const std::string& s, Color c) {
    const auto& font = glyphs();
    std::ptrdiff_t cx = x;
    for (char raw : s) {
      char ch = char(std::toupper(static_cast<unsigned char>(raw)));
      auto it = font.find(ch);
      if (it == font.end()) it = font.find(' ');
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (it->second[std::size_t(row)][col] == 'X') set(cx + col, y + row, c);
      cx += 6;
    }
  }
};

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const Color kBlack{0, 0, 0};
const Color kGray{200, 200, 205};

}  // namespace

void line_chart(const std::string& path, const std::string& title,
                const std::vector<Series>& series, std::size_t width, std::size_t height,
                bool log_y) {
  if (series.empty()) throw std::invalid_argument("line_chart: no series");
  Canvas cv(width, height);
  const double ml = 66, mr = 14, mt = 30, mb = 40;
  const double px0 = ml, px1 = double(width) - mr;
  const double py0 = double(height) - mb, py1 = mt;  // y grows upward in data space

  std::size_t n = 0;
  double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y) {
      double t = log_y ? std::log10(std::max(v, 1e-12)) : v;
      ymin = std::min(ymin, t);
      ymax = std::max(ymax, t);
    }
  }
  if (n == 0) throw std::invalid_argument("line_chart: empty series");
  if (!(ymax > ymin)) {
    ymax += 1.0;
    ymin -= 1.0;
  }
  double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto sx = [&](double i) { return n == 1 ? (px0 + px1) / 2 : px0 + (px1 - px0) * (i / double(n - 1)); };
  auto sy = [&](double v) {
    double t = log_y ? std::log10(std::max(v, 1e-12)) : v;
    return py0 + (py1 - py0) * ((t - ymin) / (ymax - ymin));
  };

  // Grid + y ticks.
  for (int k = 0; k <= 4; ++k) {
    double tv = ymin + (ymax - ymin) * k / 4.0;
    double y = py0 + (py1 - py0) * (k / 4.0);
    cv.line(px0, y, px1, y, kGray);
    double label_v = log_y ? std::pow(10.0, tv) : tv;
    cv.text(4, std::ptrdiff_t(y) - 3, fmt_tick(label_v), kBlack);
  }
  // x ticks: up to 8 integer epochs.
  int step = std::max<int>(1, int(n) / 8);
  for (std::size_t i = 0; i < n; i += std::size_t(step)) {
    double x = sx(double(i));
    cv.line(x, py0, x, py0 + 4, kBlack);
    cv.text(std::ptrdiff_t(x) - 5, std::ptrdiff_t(py0) + 8, fmt_tick(double(i + 1)), kBlack);
  }
  cv.line(px0, py0, px1, py0, kBlack);
  cv.line(px0, py0, px0, py1, kBlack);
  cv.text(std::ptrdiff_t(px0), 8, title, kBlack);
  cv.text(std::ptrdiff_t((px0 + px1) / 2) - 15, std::ptrdiff_t(double(height)) - 12, "EPOCH",
          kBlack);

  // Legend right-aligned on the title row, stacked if long.
  std::ptrdiff_t lx = std::ptrdiff_t(px1) - 150, ly = 8;
  for (const auto& s : series) {
    for (int dx = 0; dx < 10; ++dx)
      for (int dy = 0; dy < 3; ++dy) cv.set(lx + dx, ly + 2 + dy, s.color);
    cv.text(lx + 14, ly, s.name, kBlack);
    ly += 10;
  }

  for (const auto& s : series) {
    for (std::size_t i = 0; i + 1 < s.y.size(); ++i)
      cv.line(sx(double(i)), sy(s.y[i]), sx(double(i + 1)), sy(s.y[i + 1]), s.color, 2);
    for (std::size_t i = 0; i < s.y.size(); ++i) cv.disc(sx(double(i)), sy(s.y[i]), 2, s.color);
  }

  write_png_rgb8(path, cv.h, cv.w, cv.rgb);
}

void scatter(const std::string& path, const std::string& title, const std::vector<Dot>& dots,
             double xmin, double xmax, double ymin, double ymax, std::size_t width,
             std::size_t height) {
  Canvas cv(width, height);
  const double m = 18;
  auto sx = [&](double x) { return m + (double(width) - 2 * m) * ((x - xmin) / (xmax - xmin)); };
  auto sy = [&](double y) {
    return (double(height) - m) - (double(height) - 2 * m - 12) * ((y - ymin) / (ymax - ymin));
  };
  cv.text(std::ptrdiff_t(m), 4, title, kBlack);
  // frame
  cv.line(m, m + 12, double(width) - m, m + 12, kGray);
  cv.line(m, double(height) - m, double(width) - m, double(height) - m, kGray);
  cv.line(m, m + 12, m, double(height) - m, kGray);
  cv.line(double(width) - m, m + 12, double(width) - m, double(height) - m, kGray);
  for (const Dot& d : dots) cv.disc(sx(d.x), sy(d.y), d.radius, d.color);
  write_png_rgb8(path, cv.h, cv.w, cv.rgb);
}

}  // namespace semicount::plot
