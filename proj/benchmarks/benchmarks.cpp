// Microbenchmarks for the hot paths: backbone forward, full training step,
// the agency losses, posterior construction, and data plumbing.
#include <benchmark/benchmark.h>

#include <vector>

#include "semicount/agency.hpp"
#include "semicount/contrastive.hpp"
#include "semicount/dataset.hpp"
#include "semicount/network.hpp"
#include "semicount/random.hpp"
#include "semicount/regression_losses.hpp"
#include "semicount/trainer.hpp"

using namespace semicount;

namespace {

SceneSample make_scene(std::size_t side, std::size_t count, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.height = side;
  cfg.width = side;
  cfg.layout = Layout::clustered;
  return generate_scene(count, cfg, seed);
}

Dataset make_dataset(std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  DatasetConfig cfg;
  cfg.n_train = n_train;
  cfg.n_test = n_test;
  cfg.labeled_fraction = 0.25;
  cfg.count_lo = 6;
  cfg.count_hi = 20;
  cfg.scene.height = 64;
  cfg.scene.width = 64;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

}  // namespace

static void ForwardPass(benchmark::State& state) {
  std::size_t side = std::size_t(state.range(0));
  SceneSample scene = make_scene(side, side / 6, 7);
  net::NetworkConfig cfg;
  net::Network network(cfg);
  for (auto _ : state) {
    net::Forward fwd = network.forward(scene.image);
    benchmark::DoNotOptimize(fwd.full_density.data());
  }
  state.SetComplexityN(int64_t(side * side));
}
BENCHMARK(ForwardPass)->Arg(64)->Arg(96)->Arg(128)->Complexity();

static void TrainStep(benchmark::State& state) {
  Dataset ds = make_dataset(8, 2, 11);
  train::TrainConfig cfg;
  cfg.batch_labeled = 1;
  cfg.batch_unlabeled = std::size_t(state.range(0));
  cfg.crop = 48;
  cfg.n_agents = 12;
  cfg.network.channels = 16;
  cfg.network.attn_layers = 1;
  train::Trainer trainer(ds, cfg);
  std::size_t step = 0;
  for (auto _ : state) {
    losses::LossReport rep = trainer.train_step(0, step++);
    benchmark::DoNotOptimize(rep.total);
  }
}
BENCHMARK(TrainStep)->Arg(0)->Arg(2)->Arg(4);

static void MatchedContrastive(benchmark::State& state) {
  std::size_t n_emb = std::size_t(state.range(0));
  const std::size_t dim = 32, n_agents = 24;
  Rng rng(3);
  agency::AgentBank bank = agency::AgentBank::random_init(n_agents, dim, 5);
  std::vector<double> dens;
  for (std::size_t i = 0; i < 200; ++i) dens.push_back(uniform(rng, 0.05, 4.0));
  agency::Partition part = agency::build_partition(dens, n_agents);
  std::vector<double> emb(n_emb * dim), d(n_emb);
  for (double& v : emb) v = normal(rng);
  for (double& v : d) v = uniform(rng, 0.05, 4.0);
  contrastive::ContrastiveConfig cfg;
  std::vector<double> ga(bank.weights.size()), ge(emb.size());
  for (auto _ : state) {
    std::fill(ga.begin(), ga.end(), 0.0);
    std::fill(ge.begin(), ge.end(), 0.0);
    double loss =
        contrastive::matched_contrastive_loss(bank, part, emb, d, dim, cfg, 1.0, &ga, &ge);
    benchmark::DoNotOptimize(loss);
  }
  state.SetComplexityN(int64_t(n_emb));
}
BENCHMARK(MatchedContrastive)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

static void AlignmentAndPush(benchmark::State& state) {
  std::size_t n_emb = std::size_t(state.range(0));
  const std::size_t dim = 32, n_agents = 24;
  Rng rng(4);
  agency::AgentBank bank = agency::AgentBank::random_init(n_agents, dim, 6);
  std::vector<double> dens;
  for (std::size_t i = 0; i < 200; ++i) dens.push_back(uniform(rng, 0.05, 4.0));
  agency::Partition part = agency::build_partition(dens, n_agents);
  std::vector<double> emb(n_emb * dim), bg(n_emb * dim), d(n_emb);
  for (double& v : emb) v = normal(rng);
  for (double& v : bg) v = normal(rng);
  for (double& v : d) v = uniform(rng, 0.05, 4.0);
  std::vector<double> ga(bank.weights.size()), ge(emb.size()), gb(bg.size());
  for (auto _ : state) {
    std::fill(ga.begin(), ga.end(), 0.0);
    std::fill(ge.begin(), ge.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    double loss = agency::alignment_loss(bank, part, emb, d, dim, 1.0, &ga, &ge) +
                  agency::background_push_loss(bank, bg, dim, 1.0, &ga, &gb);
    benchmark::DoNotOptimize(loss);
  }
  state.SetComplexityN(int64_t(n_emb));
}
BENCHMARK(AlignmentAndPush)->RangeMultiplier(4)->Range(16, 1024)->Complexity();

static void PosteriorMatrix(benchmark::State& state) {
  std::size_t n_pts = std::size_t(state.range(0));
  Rng rng(8);
  std::vector<losses::PointXY> pts(n_pts);
  for (auto& p : pts) {
    p.x = uniform(rng, 0.0, 128.0);
    p.y = uniform(rng, 0.0, 128.0);
  }
  for (auto _ : state) {
    losses::Posterior post = losses::posterior_matrix(pts, 8, 16, 16, 8.0);
    benchmark::DoNotOptimize(post.p.data());
  }
  state.SetComplexityN(int64_t(n_pts));
}
BENCHMARK(PosteriorMatrix)->RangeMultiplier(4)->Range(8, 512)->Complexity();

static void NdBayesLoss(benchmark::State& state) {
  std::size_t n_pts = std::size_t(state.range(0));
  Rng rng(9);
  std::vector<losses::PointXY> pts(n_pts);
  for (auto& p : pts) {
    p.x = uniform(rng, 0.0, 128.0);
    p.y = uniform(rng, 0.0, 128.0);
  }
  losses::Posterior post = losses::posterior_matrix(pts, 8, 16, 16, 8.0);
  std::vector<double> dens(post.n_cells), grad(post.n_cells);
  for (double& v : dens) v = uniform(rng, 0.0, 2.0);
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = losses::nd_bayes_loss(dens, post, 1.0, 1.0, grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetComplexityN(int64_t(n_pts));
}
BENCHMARK(NdBayesLoss)->RangeMultiplier(4)->Range(8, 512)->Complexity();

static void AugmentScene(benchmark::State& state) {
  SceneSample scene = make_scene(128, 30, 13);
  AugmentConfig cfg;
  cfg.crop = 64;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    cfg.seed = seed++;
    SceneSample out = augment(scene, cfg);
    benchmark::DoNotOptimize(out.image.pixels.data());
  }
}
BENCHMARK(AugmentScene);

static void BuildPartition(benchmark::State& state) {
  std::size_t n = std::size_t(state.range(0));
  Rng rng(14);
  std::vector<double> dens(n);
  for (double& v : dens) v = uniform(rng, 0.01, 6.0);
  for (auto _ : state) {
    agency::Partition part = agency::build_partition(dens, 24);
    benchmark::DoNotOptimize(part.centers.data());
  }
  state.SetComplexityN(int64_t(n));
}
BENCHMARK(BuildPartition)->RangeMultiplier(8)->Range(64, 32768)->Complexity();

BENCHMARK_MAIN();
