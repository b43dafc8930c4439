#pragma once

#include <span>
#include <vector>

#include "semicount/agency.hpp"

namespace semicount::contrastive {

// Keeps the numerator/denominator ratio defined when every weight is zero.
inline constexpr double kEpsNum = 1e-12;

struct ContrastiveConfig {
  double tau = 0.1;
  double lambda_b = 1.0;  // weight of the background-push term inside the total
  agency::MatchConfig match;
};

// Per-embedding diagnostics; primarily for tests and the toy lab.
struct FeatureTerms {
  std::vector<double> omega_hat;       // matching probabilities
  std::vector<double> omega;           // uncertainty weights
  std::vector<double> u;               // exp(s_i/tau), possibly max-shifted
  std::vector<std::size_t> positives;  // indices with omega_hat >= 1/4, or the
                                       // allocator fallback when that set is empty
  bool fallback_positive = false;
  double loss = 0.0;
};

FeatureTerms feature_terms(const agency::AgentBank& bank, const agency::Partition& part,
                           std::span<const double> embedding, double density,
                           const ContrastiveConfig& cfg);

// Sum over embeddings of -log(sum_P omega*u / sum omega*u), scaled by
// `weight`. Gradients are accumulated (+=) into the optional buffers.
double matched_contrastive_loss(const agency::AgentBank& bank, const agency::Partition& part,
                                std::span<const double> embeddings,
                                std::span<const double> densities, std::size_t dim,
                                const ContrastiveConfig& cfg, double weight,
                                std::vector<double>* grad_agents,
                                std::vector<double>* grad_embeddings);

}  // namespace semicount::contrastive
