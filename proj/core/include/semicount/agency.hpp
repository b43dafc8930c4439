#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semicount::agency {

// Norm guard inside cosine; keeps s finite for (near-)zero vectors.
inline constexpr double kNormGuard = 1e-12;
// Agents are rescaled up to this norm after an update; an exactly-zero row
// reverts to its pre-step value instead.
inline constexpr double kAgentNormFloor = 1e-8;
// Density floor for cells that must allocate but carry zero density
// (dilation ring on labeled masks, zero-density predicted foreground).
inline constexpr double kDensityFloor = 1e-3;

double cosine(std::span<const double> a, std::span<const double> b);

enum class MatchKernel { laplace, normal };

const char* to_string(MatchKernel k);
MatchKernel kernel_from_string(const std::string& s);

struct MatchConfig {
  MatchKernel kernel = MatchKernel::laplace;
  bool clamp_weights = false;  // clamp uncertainty weights to [0,2]
};

// Density intervals (0,v_1], (v_1,v_2], ..., (v_{n-1},inf) with one
// representative centre per interval.
struct Partition {
  std::vector<double> borders;   // strictly increasing, size n_agents-1
  std::vector<double> centers;   // size n_agents
  std::size_t n_agents() const { return centers.size(); }
  std::size_t index_of(double density) const;
};

// Quantile partition over observed positive densities; falls back to
// geometric spacing when quantile borders collapse. Centres: a_1 = v_1/2,
// interior midpoints, a_n = v_{n-1}.
Partition build_partition(std::vector<double> positive_densities, std::size_t n_agents);

// Partition from explicit borders (strictly increasing), same centre rule.
Partition partition_from_borders(std::vector<double> borders);

// Probability that density d matches an agent centred at `center`.
// laplace: (1/4) exp(-|d-center|/2); peaks at exactly 1/4.
// normal: sqrt(2/pi) exp(-2 (d-center)^2); peaks at ~0.7979.
double match_prob(double d, double center, MatchKernel k);

// omega = 8 |omega_hat - 1/4|, optionally clamped to [0,2].
double uncertainty_weight(double omega_hat, bool clamp);

struct AgentBank {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> weights;  // [n][dim]

  std::span<double> row(std::size_t i) { return {weights.data() + i * dim, dim}; }
  std::span<const double> row(std::size_t i) const { return {weights.data() + i * dim, dim}; }

  // Unit-norm rows, seeded spherical (gaussian then normalise).
  static AgentBank random_init(std::size_t n, std::size_t dim, std::uint64_t seed);

  // Enforce the norm floor; `before` is the bank's weights prior to the
  // optimizer step (exact-zero rows revert to it).
  void apply_norm_floor(const std::vector<double>& before);
};

// L_E = -sum_i s(f_{Z(d_i)}, e_i), scaled by `weight`. Gradients are
// accumulated (+=) into the optional buffers ([n][dim] and [count][dim]).
double alignment_loss(const AgentBank& bank, const Partition& part,
                      std::span<const double> embeddings,
                      std::span<const double> densities, std::size_t dim,
                      double weight, std::vector<double>* grad_agents,
                      std::vector<double>* grad_embeddings);

// L_B = (1/n_agents) sum_f sum_b s(f, b), scaled by `weight`.
double background_push_loss(const AgentBank& bank, std::span<const double> background,
                            std::size_t dim, double weight,
                            std::vector<double>* grad_agents,
                            std::vector<double>* grad_background);

}  // namespace semicount::agency
