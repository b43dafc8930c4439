#include "semicount/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "semicount/png_io.hpp"
#include "semicount/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace semicount {

const char* to_string(Split s) {
  switch (s) {
    case Split::labeled: return "labeled";
    case Split::unlabeled: return "unlabeled";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "labeled") return Split::labeled;
  if (s == "unlabeled") return Split::unlabeled;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s);
}

const char* to_string(Layout l) {
  switch (l) {
    case Layout::uniform: return "uniform";
    case Layout::clustered: return "clustered";
    case Layout::gradient: return "gradient";
  }
  return "?";
}

Layout layout_from_string(const std::string& s) {
  if (s == "uniform") return Layout::uniform;
  if (s == "clustered") return Layout::clustered;
  if (s == "gradient") return Layout::gradient;
  throw std::invalid_argument("unknown layout: " + s);
}

Image Image::zeros(std::size_t h, std::size_t w, std::size_t c) {
  Image im;
  im.height = h;
  im.width = w;
  im.channels = c;
  im.pixels.assign(c * h * w, 0.0);
  return im;
}

void validate(const SceneSample& s) {
  auto bad = [&](const std::string& why) {
    throw std::invalid_argument("sample '" + s.id + "': " + why);
  };
  if (s.image.height == 0 || s.image.width == 0) bad("empty image");
  if (s.image.channels != 1 && s.image.channels != 3) bad("channels must be 1 or 3");
  if (s.image.pixels.size() != s.image.channels * s.image.height * s.image.width)
    bad("pixel buffer size mismatch");
  for (const Point& p : s.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) bad("non-finite point coordinate");
    if (p.x < 0 || p.y < 0 || p.x >= double(s.image.width) || p.y >= double(s.image.height)) {
      std::ostringstream os;
      os << "point (" << p.x << "," << p.y << ") outside " << s.image.width << "x"
         << s.image.height;
      bad(os.str());
    }
  }
}

double CellGrid::sum() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

CellGrid CellGrid::zeros(int stride, std::size_t h, std::size_t w) {
  CellGrid g;
  g.stride = stride;
  g.height = h;
  g.width = w;
  g.values.assign(h * w, 0.0);
  return g;
}

static std::size_t cells(std::size_t extent, int stride) {
  return (extent + static_cast<std::size_t>(stride) - 1) / static_cast<std::size_t>(stride);
}

CellGrid rasterize_density(const std::vector<Point>& pts, int stride,
                           std::size_t img_h, std::size_t img_w) {
  if (stride <= 0) throw std::invalid_argument("stride must be positive");
  CellGrid g = CellGrid::zeros(stride, cells(img_h, stride), cells(img_w, stride));
  for (const Point& p : pts) {
    auto cy = static_cast<std::size_t>(std::floor(p.y / stride));
    auto cx = static_cast<std::size_t>(std::floor(p.x / stride));
    if (cy >= g.height || cx >= g.width)
      throw std::invalid_argument("point outside image during rasterization");
    g.at(cy, cx) += 1.0;
  }
  return g;
}

CellGrid rasterize_mask(const std::vector<Point>& pts, int stride,
                        std::size_t img_h, std::size_t img_w, int dilation) {
  CellGrid occ = rasterize_density(pts, stride, img_h, img_w);
  CellGrid g = CellGrid::zeros(stride, occ.height, occ.width);
  auto H = static_cast<std::ptrdiff_t>(occ.height);
  auto W = static_cast<std::ptrdiff_t>(occ.width);
  for (std::ptrdiff_t y = 0; y < H; ++y)
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      if (occ.at(std::size_t(y), std::size_t(x)) <= 0.0) continue;
      for (std::ptrdiff_t dy = -dilation; dy <= dilation; ++dy)
        for (std::ptrdiff_t dx = -dilation; dx <= dilation; ++dx) {
          std::ptrdiff_t yy = y + dy, xx = x + dx;
          if (yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
          g.at(std::size_t(yy), std::size_t(xx)) = 1.0;
        }
    }
  return g;
}

SceneSample generate_scene(std::size_t count, const SceneConfig& cfg, std::uint64_t seed) {
  const std::size_t H = cfg.height, W = cfg.width;
  if (H == 0 || W == 0) throw std::invalid_argument("scene dimensions must be positive");
  if (count > H * W / 25) {
    std::ostringstream os;
    os << "count " << count << " exceeds capacity for " << W << "x" << H
       << " (max " << H * W / 25 << ")";
    throw std::invalid_argument(os.str());
  }

  Rng rng(mix_seed(seed, 0x5ce9eULL));
  SceneSample s;
  s.image = Image::zeros(H, W, 1);

  // Clustered layout draws its centres up front so the per-point draw order
  // is identical across layouts.
  std::vector<Point> centres;
  if (cfg.layout == Layout::clustered) {
    int k = std::max(1, cfg.cluster_count);
    centres.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      centres.push_back({uniform(rng, 0.0, double(W)), uniform(rng, 0.0, double(H))});
  }

  auto clamp_coord = [](double v, double hi) {
    return std::clamp(v, 0.0, hi - 1e-6);
  };

  s.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Point p;
    switch (cfg.layout) {
      case Layout::uniform:
        p.x = uniform(rng, 0.0, double(W));
        p.y = uniform(rng, 0.0, double(H));
        break;
      case Layout::clustered: {
        auto ci = static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<std::int64_t>(centres.size()) - 1));
        p.x = centres[ci].x + normal(rng, 0.0, cfg.cluster_sigma);
        p.y = centres[ci].y + normal(rng, 0.0, cfg.cluster_sigma);
        break;
      }
      case Layout::gradient:
        // pdf linear in x: more heads to the right.
        p.x = double(W) * std::sqrt(uniform01(rng));
        p.y = uniform(rng, 0.0, double(H));
        break;
    }
    p.x = clamp_coord(p.x, double(W));
    p.y = clamp_coord(p.y, double(H));
    s.points.push_back(p);

    double r = uniform(rng, cfg.blob_radius_lo, cfg.blob_radius_hi);
    double amp = uniform(rng, cfg.blob_amp_lo, cfg.blob_amp_hi);
    double sigma = r / 2.0;
    auto win = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    auto cy = static_cast<std::ptrdiff_t>(std::lround(p.y));
    auto cx = static_cast<std::ptrdiff_t>(std::lround(p.x));
    for (std::ptrdiff_t y = cy - win; y <= cy + win; ++y) {
      if (y < 0 || y >= static_cast<std::ptrdiff_t>(H)) continue;
      for (std::ptrdiff_t x = cx - win; x <= cx + win; ++x) {
        if (x < 0 || x >= static_cast<std::ptrdiff_t>(W)) continue;
        double dx = double(x) - p.x, dy = double(y) - p.y;
        s.image.at(0, std::size_t(y), std::size_t(x)) +=
            amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    }
  }

  for (double& v : s.image.pixels) {
    v += normal(rng, 0.0, cfg.noise_sigma);
    v = std::clamp(v, 0.0, 1.0);
  }
  return s;
}

SceneSample augment(const SceneSample& s, const AugmentConfig& cfg) {
  const std::size_t H = s.image.height, W = s.image.width, C = s.image.channels;
  if (cfg.crop == 0) throw std::invalid_argument("crop must be positive");

  Rng rng(mix_seed(cfg.seed, hash_str(s.id)));
  // Fixed draw order: scale, flip, crop-x, crop-y.
  double scale = uniform(rng, cfg.scale_lo, cfg.scale_hi);
  bool flip = uniform01(rng) < cfg.hflip_prob;

  auto Hs = static_cast<std::size_t>(std::lround(double(H) * scale));
  auto Ws = static_cast<std::size_t>(std::lround(double(W) * scale));
  Hs = std::max(Hs, cfg.crop);
  Ws = std::max(Ws, cfg.crop);

  SceneSample out;
  out.id = s.id;
  out.split = s.split;

  Image scaled;
  std::vector<Point> pts;
  pts.reserve(s.points.size());
  if (Hs == H && Ws == W) {
    scaled = s.image;  // exact: no resampling, points unchanged
    pts = s.points;
  } else {
    scaled = Image::zeros(Hs, Ws, C);
    double fy = double(H) / double(Hs), fx = double(W) / double(Ws);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < Hs; ++y) {
        double sy = std::clamp((double(y) + 0.5) * fy - 0.5, 0.0, double(H - 1));
        auto y0 = static_cast<std::size_t>(sy);
        std::size_t y1 = std::min(y0 + 1, H - 1);
        double wy = sy - double(y0);
        for (std::size_t x = 0; x < Ws; ++x) {
          double sx = std::clamp((double(x) + 0.5) * fx - 0.5, 0.0, double(W - 1));
          auto x0 = static_cast<std::size_t>(sx);
          std::size_t x1 = std::min(x0 + 1, W - 1);
          double wx = sx - double(x0);
          double v = (1 - wy) * ((1 - wx) * s.image.at(c, y0, x0) + wx * s.image.at(c, y0, x1)) +
                     wy * ((1 - wx) * s.image.at(c, y1, x0) + wx * s.image.at(c, y1, x1));
          scaled.at(c, y, x) = v;
        }
      }
    double gy = double(Hs) / double(H), gx = double(Ws) / double(W);
    for (const Point& p : s.points)
      pts.push_back({(p.x + 0.5) * gx - 0.5, (p.y + 0.5) * gy - 0.5});
  }

  if (flip) {
    Image flipped = Image::zeros(Hs, Ws, C);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < Hs; ++y)
        for (std::size_t x = 0; x < Ws; ++x)
          flipped.at(c, y, x) = scaled.at(c, y, Ws - 1 - x);
    scaled = std::move(flipped);
    for (Point& p : pts) p.x = double(Ws - 1) - p.x;
  }

  auto ox = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(Ws - cfg.crop)));
  auto oy = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(Hs - cfg.crop)));

  if (ox == 0 && oy == 0 && Hs == cfg.crop && Ws == cfg.crop) {
    out.image = std::move(scaled);
    out.points = std::move(pts);
    // points may sit fractionally outside after scaling; the crop filter
    // below must still run, so fall through via a filtered copy.
    std::vector<Point> kept;
    kept.reserve(out.points.size());
    for (const Point& p : out.points)
      if (p.x >= 0 && p.y >= 0 && p.x < double(cfg.crop) && p.y < double(cfg.crop))
        kept.push_back(p);
    out.points = std::move(kept);
    return out;
  }

  out.image = Image::zeros(cfg.crop, cfg.crop, C);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < cfg.crop; ++y)
      for (std::size_t x = 0; x < cfg.crop; ++x)
        out.image.at(c, y, x) = scaled.at(c, y + oy, x + ox);
  for (const Point& p : pts) {
    double px = p.x - double(ox), py = p.y - double(oy);
    if (px >= 0 && py >= 0 && px < double(cfg.crop) && py < double(cfg.crop))
      out.points.push_back({px, py});
  }
  return out;
}

std::vector<const SceneSample*> Dataset::split(Split s) const {
  std::vector<const SceneSample*> out;
  for (const auto& smp : samples)
    if (smp.split == s) out.push_back(&smp);
  return out;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  if (cfg.n_train == 0) throw std::invalid_argument("n_train must be positive");
  if (cfg.count_lo > cfg.count_hi) throw std::invalid_argument("count_lo > count_hi");

  Dataset ds;
  ds.stride_hint = 8;
  Rng meta(mix_seed(cfg.seed, 0xd5ULL));

  auto n_labeled = static_cast<std::size_t>(
      std::lround(cfg.labeled_fraction * double(cfg.n_train)));
  n_labeled = std::clamp<std::size_t>(n_labeled, 1, cfg.n_train);

  // Which train indices are labeled: shuffled prefix, so the labeled subset
  // is unbiased w.r.t. generation order.
  std::vector<std::size_t> order(cfg.n_train);
  for (std::size_t i = 0; i < cfg.n_train; ++i) order[i] = i;
  shuffle(order, meta);
  std::vector<bool> labeled(cfg.n_train, false);
  for (std::size_t i = 0; i < n_labeled; ++i) labeled[order[i]] = true;

  auto make = [&](std::size_t index, Split split, const char* prefix) {
    auto count = static_cast<std::size_t>(uniform_int(
        meta, static_cast<std::int64_t>(cfg.count_lo), static_cast<std::int64_t>(cfg.count_hi)));
    SceneSample s = generate_scene(count, cfg.scene, mix_seed(cfg.seed, 0x5eedULL, index));
    std::ostringstream id;
    id << prefix << "_";
    id.width(4);
    id.fill('0');
    id << index;
    s.id = id.str();
    s.split = split;
    return s;
  };

  for (std::size_t i = 0; i < cfg.n_train; ++i)
    ds.samples.push_back(make(i, labeled[i] ? Split::labeled : Split::unlabeled, "train"));
  for (std::size_t i = 0; i < cfg.n_test; ++i)
    ds.samples.push_back(make(cfg.n_train + i, Split::test, "test"));
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  json manifest;
  manifest["stride_hint"] = ds.stride_hint;
  manifest["samples"] = json::array();
  for (const auto& s : ds.samples) {
    validate(s);
    std::string rel = "images/" + s.id + ".png";
    std::string abspath = (fs::path(dir) / rel).string();
    if (s.image.channels == 1) {
      write_png_gray8(abspath, s.image.height, s.image.width, s.image.pixels);
    } else {
      std::vector<std::uint8_t> rgb(s.image.height * s.image.width * 3);
      for (std::size_t y = 0; y < s.image.height; ++y)
        for (std::size_t x = 0; x < s.image.width; ++x)
          for (std::size_t c = 0; c < 3; ++c) {
            double v = std::clamp(s.image.at(c, y, x), 0.0, 1.0);
            rgb[(y * s.image.width + x) * 3 + c] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
          }
      write_png_rgb8(abspath, s.image.height, s.image.width, rgb);
    }
    json rec;
    rec["id"] = s.id;
    rec["file"] = rel;
    rec["split"] = to_string(s.split);
    json pts = json::array();
    for (const Point& p : s.points) pts.push_back(json::array({p.x, p.y}));
    rec["points"] = std::move(pts);
    manifest["samples"].push_back(std::move(rec));
  }
  std::ofstream out(fs::path(dir) / "dataset.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  fs::path manifest_path(path);
  if (fs::is_directory(manifest_path)) manifest_path /= "dataset.json";
  fs::path base = manifest_path.parent_path();

  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest parse error in " + manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  std::vector<std::string> errors;
  auto complain = [&](const std::string& msg) {
    if (errors.size() < 10) errors.push_back(msg);
  };

  if (!manifest.contains("stride_hint") || !manifest["stride_hint"].is_number_integer())
    complain("missing integer stride_hint");
  else
    ds.stride_hint = manifest["stride_hint"].get<int>();
  if (!manifest.contains("samples") || !manifest["samples"].is_array())
    complain("missing samples array");

  if (errors.empty()) {
    for (const auto& rec : manifest["samples"]) {
      std::string id = rec.value("id", "<missing-id>");
      try {
        SceneSample s;
        s.id = rec.at("id").get<std::string>();
        s.split = split_from_string(rec.at("split").get<std::string>());
        fs::path file = base / rec.at("file").get<std::string>();
        if (!fs::exists(file)) throw std::runtime_error("image file missing: " + file.string());
        PngImage png = read_png(file.string());
        s.image.height = png.height;
        s.image.width = png.width;
        s.image.channels = png.channels;
        s.image.pixels = std::move(png.values01);
        for (const auto& pt : rec.at("points")) {
          if (!pt.is_array() || pt.size() != 2) throw std::runtime_error("malformed point");
          s.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
        validate(s);
        ds.samples.push_back(std::move(s));
      } catch (const std::exception& e) {
        complain("sample '" + id + "': " + e.what());
      }
    }
  }

  if (!errors.empty()) {
    std::ostringstream os;
    os << "dataset load failed (" << errors.size() << " issue(s) shown):";
    for (const auto& e : errors) os << "\n  - " << e;
    throw std::runtime_error(os.str());
  }
  return ds;
}

}  // namespace semicount
