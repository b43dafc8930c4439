#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semicount/agency.hpp"
#include "semicount/trainer.hpp"

namespace semicount::evalkit {

// --- training curves --------------------------------------------------------
void write_epochs_csv(const std::string& path, const train::TrainResult& result);
train::TrainResult read_epochs_csv(const std::string& path);

// One named run per entry (e.g. "full" vs "labeled-only"); curves.csv +
// curves.png under `dir` overlay the runs' training MAE/MSE. The CSV is
// authoritative, the PNG is a rendered companion.
using NamedRun = std::pair<std::string, train::TrainResult>;
void write_curves(const std::string& dir, const std::vector<NamedRun>& runs);
inline void write_curves(const std::string& dir, const train::TrainResult& result) {
  write_curves(dir, std::vector<NamedRun>{{"run", result}});
}

// --- parameter sweeps -------------------------------------------------------
struct SweepSpec {
  std::string param;
  std::vector<std::string> labels;  // one per cell, e.g. "0.1" or "laplace"
  std::function<void(train::TrainConfig&, std::size_t)> apply;
};

// Preset grids: beta, lambda_c, tau, lambda_m, lambda_u, distribution.
SweepSpec sweep_preset(const std::string& param);
std::vector<std::string> sweep_names();

struct SweepCell {
  std::string label;
  std::uint64_t seed = 0;  // the exact training seed used for this cell
  double mae = 0.0;
  double mse = 0.0;
  double seconds = 0.0;
  std::string error;  // nonempty: the cell failed and the sweep moved on
};

struct SweepResult {
  std::string param;
  std::vector<SweepCell> cells;
  std::size_t epochs = 0;
  std::size_t steps_per_epoch = 0;
};

SweepResult run_sweep(const Dataset& dataset, const train::TrainConfig& base,
                      const SweepSpec& spec);
// results.csv + table.md (one column per cell, metric rows) under `dir`.
void write_sweep(const std::string& dir, const SweepResult& result);

// --- toy geometry lab -------------------------------------------------------
// Free 2-D feature points under cosine geometry: per-class clusters with
// densities near their agent's centre plus a background cluster. Schemes
// differ in which objective moves features vs. agents.
enum class ToyScheme {
  init_only,          // a: nothing trains
  align_align,        // b: features & agents follow alignment + push
  contrast_contrast,  // c: features & agents follow matched contrastive + push
  contrast_align,     // d: features contrastive, agents alignment (+ push)
};

const char* to_string(ToyScheme s);

struct ToyConfig {
  std::size_t n_classes = 4;
  std::size_t pts_per_class = 12;
  std::size_t n_background = 24;
  std::size_t dim = 2;
  std::size_t iters = 400;
  double feature_lr = 0.05;
  double agent_lr = 0.05;
  double tau = 0.1;
  double lambda_b = 1.0;
  agency::MatchKernel kernel = agency::MatchKernel::laplace;
  std::uint64_t seed = 1;
  std::size_t frame_every = 50;  // 0: no frames
};

struct ToyMetrics {
  double intra_spread = 0.0;   // mean within-class pairwise cosine distance
  double inter_margin = 0.0;   // min between-class centroid cosine distance
  double fg_bg_margin = 0.0;   // min foreground/background cosine distance
};

struct ToySchemeResult {
  std::string scheme;
  ToyMetrics initial, final_state;
};

struct ToyResult {
  std::vector<ToySchemeResult> schemes;
};

// One scheme; writes frames into frames_dir when non-empty.
ToySchemeResult run_toy_scheme(const ToyConfig& cfg, ToyScheme scheme,
                               const std::string& frames_dir = "");
// The given schemes (default all four); writes toy_metrics.json and
// toy_frames/ under out_dir.
ToyResult run_toy(const ToyConfig& cfg, const std::string& out_dir,
                  const std::vector<ToyScheme>& schemes = {
                      ToyScheme::init_only, ToyScheme::align_align,
                      ToyScheme::contrast_contrast, ToyScheme::contrast_align});

}  // namespace semicount::evalkit
