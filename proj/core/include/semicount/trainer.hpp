#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semicount/agency.hpp"
#include "semicount/contrastive.hpp"
#include "semicount/dataset.hpp"
#include "semicount/network.hpp"
#include "semicount/optim.hpp"
#include "semicount/random.hpp"
#include "semicount/regression_losses.hpp"

namespace semicount::train {

struct TrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_labeled = 1;
  std::size_t batch_unlabeled = 4;
  double model_lr = 1e-4;
  double agent_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  losses::LossWeights loss;                 // lambda_m, lambda_c, lambda_u, beta
  contrastive::ContrastiveConfig contrastive;  // tau, lambda_b, kernel, clamp
  std::size_t n_agents = 24;
  // Baseline mode: unlabeled work is skipped entirely but the step schedule
  // stays the one the full dataset implies, so runs are comparable.
  bool labeled_only = false;
  std::uint64_t seed = 1;
  double aug_scale_lo = 0.7;
  double aug_scale_hi = 1.3;
  double aug_hflip = 0.5;
  std::size_t crop = 64;
  double sigma_posterior = 8.0;
  int mask_dilation = 1;
  net::NetworkConfig network;
  std::string checkpoint_dir;     // empty: no checkpoints
  std::size_t checkpoint_every = 0;  // in epochs; 0: only final (if dir set)
};

struct EpochRow {
  std::size_t epoch = 0;
  losses::LossReport mean;  // per-step means
  double train_mae = 0.0;   // over the full training split, labels and not
  double train_mse = 0.0;   // RMSE, counting convention
  double test_mae = 0.0;
  double test_mse = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRow> epochs;
  double final_test_mae = 0.0;
  double final_test_mse = 0.0;
};

struct Metrics {
  struct PerImage {
    std::string id;
    double gt = 0.0;
    double pred = 0.0;
  };
  double mae = 0.0;
  double mse = 0.0;  // RMSE
  std::vector<PerImage> per_image;
};

// MAE = mean |pred-gt|, MSE = sqrt(mean (pred-gt)^2). Jensen: MAE <= MSE.
Metrics metrics_from_counts(std::span<const double> gt, std::span<const double> pred);

// Count-level metrics over a sample set; prediction is the density sum.
Metrics evaluate(const net::Network& network, const std::vector<const SceneSample*>& samples);

// Wrapping shuffled index stream; reshuffles each pass with its own rng.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::uint64_t seed);
  std::size_t next();
  std::size_t size() const { return idx_.size(); }

 private:
  std::vector<std::size_t> idx_;
  std::size_t pos_;
  Rng rng_;
};

class Trainer {
 public:
  Trainer(const Dataset& dataset, TrainConfig cfg);

  TrainResult run();
  losses::LossReport train_step(std::size_t epoch, std::size_t step);
  Metrics evaluate_split(Split split) const;

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  net::Network& network() { return network_; }
  const net::Network& network() const { return network_; }
  agency::AgentBank& agents() { return agents_; }
  const agency::AgentBank& agents() const { return agents_; }
  const agency::Partition& partition() const { return partition_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epochs_done() const { return epochs_done_; }

  // Checkpoint bridge (definitions live with the checkpoint format).
  void save_checkpoint(const std::string& path) const;
  void restore_checkpoint(const std::string& path);

 private:
  friend struct TrainerAccess;
  const Dataset& dataset_;
  TrainConfig cfg_;
  std::vector<const SceneSample*> labeled_, unlabeled_, test_;
  net::Network network_;
  agency::AgentBank agents_;
  agency::Partition partition_;
  std::vector<Adam> model_opt_;  // aligned with network_.params()
  Adam agent_opt_;
  std::vector<double> agent_grad_;
  IndexStream labeled_stream_, unlabeled_stream_;
  std::size_t steps_per_epoch_ = 0;
  std::size_t epochs_done_ = 0;
};

}  // namespace semicount::train
