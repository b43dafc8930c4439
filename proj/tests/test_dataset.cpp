#include <filesystem>

#include "doctest.h"
#include "semicount/dataset.hpp"
#include "testutil.hpp"

using namespace semicount;
namespace fs = std::filesystem;

TEST_SUITE("dataset") {

TEST_CASE("density rasterization: cell placement and count preservation") {
  std::vector<Point> pts{{0.0, 0.0}, {7.9, 7.9}, {8.0, 0.0}, {15.0, 12.0}};
  CellGrid g = rasterize_density(pts, 8, 16, 16);
  REQUIRE(g.height == 2);
  REQUIRE(g.width == 2);
  CHECK(g.at(0, 0) == 2.0);  // (0,0) and (7.9,7.9) share cell (0,0)
  CHECK(g.at(0, 1) == 1.0);  // x=8 crosses the cell border
  CHECK(g.at(1, 1) == 1.0);
  CHECK(g.sum() == doctest::Approx(double(pts.size())));

  // Non-divisible image dims round the grid up.
  CellGrid g2 = rasterize_density({}, 8, 17, 33);
  CHECK(g2.height == 3);
  CHECK(g2.width == 5);
}

TEST_CASE("out-of-bounds points are rejected") {
  CHECK_THROWS_AS(rasterize_density({{16.0, 0.0}}, 8, 16, 16), std::invalid_argument);
  CHECK_THROWS_AS(rasterize_density({{0.0, -0.1}}, 8, 16, 16), std::invalid_argument);
}

TEST_CASE("mask dilation is a Chebyshev ball of cells") {
  CellGrid m = rasterize_mask({{12.0, 12.0}}, 8, 40, 40, 1);  // occupied cell (1,1)
  REQUIRE(m.height == 5);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x) {
      bool in_ball = y <= 2 && x <= 2;
      CHECK(m.at(y, x) == (in_ball ? 1.0 : 0.0));
    }
  CellGrid m0 = rasterize_mask({{12.0, 12.0}}, 8, 40, 40, 0);
  CHECK(m0.sum() == 1.0);
}

TEST_CASE("scene generation is deterministic and count-exact") {
  SceneConfig cfg;
  cfg.height = 64;
  cfg.width = 64;
  SceneSample a = generate_scene(9, cfg, 7);
  SceneSample b = generate_scene(9, cfg, 7);
  CHECK(a.points.size() == 9);
  CHECK(a.image.pixels == b.image.pixels);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].y == b.points[i].y);
  }
  SceneSample c = generate_scene(9, cfg, 8);
  CHECK(a.image.pixels != c.image.pixels);
  for (double v : a.image.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS(generate_scene(64 * 64, cfg, 1));  // over the blob capacity
}

TEST_CASE("layouts produce valid scenes") {
  SceneConfig cfg;
  cfg.height = 64;
  cfg.width = 64;
  for (Layout l : {Layout::uniform, Layout::clustered, Layout::gradient}) {
    cfg.layout = l;
    SceneSample s = generate_scene(12, cfg, 3);
    s.id = "probe";
    CHECK_NOTHROW(validate(s));
  }
}

TEST_CASE("identity augmentation is bit-exact") {
  SceneConfig scfg;
  scfg.height = 64;
  scfg.width = 64;
  SceneSample s = generate_scene(8, scfg, 11);
  s.id = "aug_probe";

  AugmentConfig acfg;
  acfg.scale_lo = acfg.scale_hi = 1.0;
  acfg.hflip_prob = 0.0;
  acfg.crop = 64;  // crop == image size: the only offset is 0
  SceneSample out = augment(s, acfg);
  CHECK(out.image.pixels == s.image.pixels);
  REQUIRE(out.points.size() == s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    CHECK(out.points[i].x == s.points[i].x);
    CHECK(out.points[i].y == s.points[i].y);
  }
}

TEST_CASE("horizontal flip mirrors pixels and points together") {
  SceneConfig scfg;
  scfg.height = 32;
  scfg.width = 32;
  SceneSample s = generate_scene(5, scfg, 13);
  s.id = "flip_probe";

  AugmentConfig acfg;
  acfg.scale_lo = acfg.scale_hi = 1.0;
  acfg.hflip_prob = 1.0;
  acfg.crop = 32;
  SceneSample out = augment(s, acfg);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      CHECK(out.image.at(0, y, x) == s.image.at(0, y, 31 - x));
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    CHECK(out.points[i].x == doctest::Approx(31.0 - s.points[i].x));
    CHECK(out.points[i].y == s.points[i].y);
  }
}

TEST_CASE("augmentation is seeded by (config seed, sample id)") {
  SceneConfig scfg;
  scfg.height = 96;
  scfg.width = 96;
  SceneSample s = generate_scene(10, scfg, 17);
  s.id = "seed_probe";
  AugmentConfig acfg;
  acfg.crop = 64;
  acfg.seed = 5;
  SceneSample a = augment(s, acfg);
  SceneSample b = augment(s, acfg);
  CHECK(a.image.pixels == b.image.pixels);
  acfg.seed = 6;
  SceneSample c = augment(s, acfg);
  CHECK(a.image.pixels != c.image.pixels);
  CHECK(a.image.height == 64);
  CHECK(a.image.width == 64);
  for (const Point& p : a.points) {
    CHECK(p.x >= 0.0);
    CHECK(p.x < 64.0);
    CHECK(p.y >= 0.0);
    CHECK(p.y < 64.0);
  }
}

TEST_CASE("dataset split sizes follow the labeled fraction") {
  DatasetConfig cfg;
  cfg.n_train = 8;
  cfg.n_test = 3;
  cfg.labeled_fraction = 0.25;
  cfg.count_lo = 4;
  cfg.count_hi = 10;
  cfg.scene.height = 48;
  cfg.scene.width = 48;
  Dataset ds = generate_dataset(cfg);
  CHECK(ds.split(Split::labeled).size() == 2);
  CHECK(ds.split(Split::unlabeled).size() == 6);
  CHECK(ds.split(Split::test).size() == 3);
  for (const auto& s : ds.samples) {
    CHECK(s.points.size() >= 4);
    CHECK(s.points.size() <= 10);
  }

  // At least one labeled scene even for a vanishing fraction.
  cfg.labeled_fraction = 0.0;
  CHECK(generate_dataset(cfg).split(Split::labeled).size() == 1);
}

TEST_CASE("manifest round-trip preserves ids, splits, points, and counts") {
  DatasetConfig cfg;
  cfg.n_train = 4;
  cfg.n_test = 2;
  cfg.count_lo = 3;
  cfg.count_hi = 8;
  cfg.scene.height = 40;
  cfg.scene.width = 40;
  Dataset ds = generate_dataset(cfg);

  fs::path dir = fs::temp_directory_path() / "semicount_ds_roundtrip";
  fs::remove_all(dir);
  save_dataset(ds, dir.string());
  Dataset back = load_dataset(dir.string());
  Dataset back2 = load_dataset((dir / "dataset.json").string());  // either path form

  REQUIRE(back.samples.size() == ds.samples.size());
  REQUIRE(back2.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& orig = ds.samples[i];
    const auto& got = back.samples[i];
    CHECK(got.id == orig.id);
    CHECK(got.split == orig.split);
    REQUIRE(got.points.size() == orig.points.size());
    for (std::size_t j = 0; j < orig.points.size(); ++j) {
      CHECK(got.points[j].x == orig.points[j].x);  // JSON doubles round-trip
      CHECK(got.points[j].y == orig.points[j].y);
    }
    REQUIRE(got.image.pixels.size() == orig.image.pixels.size());
    for (std::size_t k = 0; k < orig.image.pixels.size(); ++k)
      CHECK(std::abs(got.image.pixels[k] - orig.image.pixels[k]) <=
            0.5 / 255.0 + 1e-12);  // 8-bit quantization
  }
  fs::remove_all(dir);
}

TEST_CASE("validation names the offending sample") {
  SceneSample s;
  s.id = "bad_sample";
  s.image = Image::zeros(16, 16);
  s.points.push_back({20.0, 4.0});
  try {
    validate(s);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("bad_sample") != std::string::npos);
  }
}

}  // TEST_SUITE
