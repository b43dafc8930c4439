#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semicount {

struct Point {
  double x = 0.0;  // column coordinate, in [0, width)
  double y = 0.0;  // row coordinate, in [0, height)
};

enum class Split { labeled, unlabeled, test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

// Planar channel-major image, values in [0,1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;  // size = channels*height*width, [c][y][x]

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  static Image zeros(std::size_t h, std::size_t w, std::size_t c = 1);
};

struct SceneSample {
  std::string id;
  Image image;
  std::vector<Point> points;  // continuous head coordinates
  Split split = Split::labeled;
};

// Throws std::invalid_argument naming the offending sample on any violation
// (empty image, point out of bounds, non-finite coordinate).
void validate(const SceneSample& s);

// Cell grid over an image at a fixed stride; height/width are cell counts.
struct CellGrid {
  int stride = 8;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // [y][x]

  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double sum() const;
  static CellGrid zeros(int stride, std::size_t h, std::size_t w);
};

// Cell counts: point (x,y) lands in cell (floor(y/stride), floor(x/stride)).
// Grid dims are ceil(H/stride) x ceil(W/stride).
CellGrid rasterize_density(const std::vector<Point>& pts, int stride,
                           std::size_t img_h, std::size_t img_w);

// Binary occupancy dilated by `dilation` cells (Chebyshev ball).
CellGrid rasterize_mask(const std::vector<Point>& pts, int stride,
                        std::size_t img_h, std::size_t img_w, int dilation = 1);

enum class Layout { uniform, clustered, gradient };

const char* to_string(Layout l);
Layout layout_from_string(const std::string& s);

struct SceneConfig {
  std::size_t height = 128;
  std::size_t width = 128;
  Layout layout = Layout::uniform;
  double blob_radius_lo = 2.0;
  double blob_radius_hi = 5.0;
  double blob_amp_lo = 0.5;
  double blob_amp_hi = 1.0;
  double noise_sigma = 0.05;
  int cluster_count = 3;       // clustered layout only
  double cluster_sigma = 10.0; // pixel spread around a cluster centre
};

// Deterministic given (count, cfg, seed). Throws if count exceeds the
// capacity heuristic H*W/25 (blobs would tile solid).
SceneSample generate_scene(std::size_t count, const SceneConfig& cfg,
                           std::uint64_t seed);

struct AugmentConfig {
  double scale_lo = 0.7;
  double scale_hi = 1.3;
  double hflip_prob = 0.5;
  std::size_t crop = 64;
  std::uint64_t seed = 0;  // mixed with the sample id; same (seed,id) -> same output
};

// Random scale -> optional horizontal flip -> random crop. Points are
// transformed with the image and dropped when they leave the crop.
// scale==1 resamples nothing, so an identity config is bit-exact.
SceneSample augment(const SceneSample& s, const AugmentConfig& cfg);

struct DatasetConfig {
  std::size_t n_train = 40;
  std::size_t n_test = 10;
  double labeled_fraction = 0.25;  // of n_train, at least 1 scene
  std::size_t count_lo = 4;
  std::size_t count_hi = 60;
  SceneConfig scene;
  std::uint64_t seed = 1;
};

struct Dataset {
  int stride_hint = 8;
  std::vector<SceneSample> samples;

  std::vector<const SceneSample*> split(Split s) const;
};

Dataset generate_dataset(const DatasetConfig& cfg);

// Writes <dir>/dataset.json plus <dir>/images/<id>.png (8-bit grayscale;
// multi-channel images are stored per-channel planar in one tall PNG).
void save_dataset(const Dataset& ds, const std::string& dir);

// Accepts the directory or the dataset.json path itself. Validates every
// record and throws with the offending ids on failure.
Dataset load_dataset(const std::string& path);

}  // namespace semicount
