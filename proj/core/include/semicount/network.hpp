#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semicount/dataset.hpp"
#include "semicount/nn.hpp"

namespace semicount::net {

struct NetworkConfig {
  std::size_t in_channels = 1;
  std::size_t channels = 32;    // token width c; must be divisible by 4
  std::size_t attn_layers = 2;  // refinement depth on foreground tokens
  std::uint64_t seed = 42;
};

// One forward pass. Token index i corresponds to cell (i / grid_w, i % grid_w).
struct Forward {
  nn::NodePtr tokens;               // [N, c] backbone feature tokens
  nn::NodePtr mask_prob;            // [N] foreground probability (continuous)
  std::vector<char> mask_bin;       // mask_prob >= 0.5
  std::vector<std::size_t> fg_idx;  // predicted-foreground token indices
  std::vector<std::size_t> bg_idx;
  nn::NodePtr fg_density;           // [|fg_idx|] densities; null when fg empty
  std::vector<double> full_density; // detached per-cell densities, background 0
  std::size_t grid_h = 0, grid_w = 0;

  double predicted_count() const;
};

// Conv backbone (stride 8) -> per-token foreground gate -> attention
// refinement of foreground tokens against background context -> per-token
// density. Residual output projections start at zero, so refinement is the
// identity at initialisation.
class Network {
 public:
  explicit Network(NetworkConfig cfg);

  Forward forward(const Image& img) const;  // pads to a stride multiple

  int stride() const { return 8; }
  const NetworkConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, nn::NodePtr>>& params() { return params_; }
  const std::vector<std::pair<std::string, nn::NodePtr>>& params() const { return params_; }
  nn::NodePtr param(const std::string& name) const;

 private:
  NetworkConfig cfg_;
  std::vector<std::pair<std::string, nn::NodePtr>> params_;
};

}  // namespace semicount::net
