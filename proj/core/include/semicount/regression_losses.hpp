#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace semicount::losses {

// Row-major [n_cells][n_points]: p(point j | cell i), a softmax over points
// of -||cell_centre_i - point_j||^2 / (2 sigma^2). Cell centres sit at
// ((cx+0.5)*stride, (cy+0.5)*stride). Empty when there are no points.
struct Posterior {
  std::size_t n_cells = 0;
  std::size_t n_points = 0;
  std::vector<double> p;  // n_cells * n_points

  double at(std::size_t cell, std::size_t point) const { return p[cell * n_points + point]; }
  bool empty() const { return n_points == 0; }
};

struct PointXY {
  double x, y;
};

Posterior posterior_matrix(std::span<const PointXY> points, int stride,
                           std::size_t grid_h, std::size_t grid_w, double sigma);

// Noise-depressed expected-count loss:
//   eps_j = |1 - sum_i p_ij D_i|
//   L = sum_j exp(-beta * sg(eps_j)) * eps_j
// The exponential factor is a constant in the gradient. beta = 0 recovers
// the plain expected-count loss exactly. No points -> 0.
double nd_bayes_loss(std::span<const double> density, const Posterior& post,
                     double beta, double weight, std::span<double> grad_density);

// Euclidean distance between predicted and target masks (flattened):
// L = sqrt(sum (m - t)^2); gradient (m - t)/L, zero at L = 0.
double mask_loss(std::span<const double> predicted, std::span<const double> target,
                 double weight, std::span<double> grad_predicted);

struct LossWeights {
  double lambda_m = 0.1;   // mask loss
  double lambda_c = 0.01;  // contrastive block
  double lambda_u = 0.1;   // unlabeled objective
  double beta = 1.0;       // noise depression strength
};

struct ComposedLoss {
  double labeled = 0.0;
  double unlabeled = 0.0;
  double total = 0.0;
};

// labeled   = l_count + lambda_m * l_mask + lambda_c * l_contrast_labeled
// unlabeled = lambda_c * l_contrast_unlabeled
// total     = labeled + lambda_u * unlabeled
ComposedLoss compose(double l_count, double l_mask, double l_contrast_labeled,
                     double l_contrast_unlabeled, const LossWeights& w);

// Per-step scalar diagnostics, in the units the optimizer saw.
struct LossReport {
  double count = 0.0;               // noise-depressed expected-count loss
  double mask = 0.0;
  double contrast_labeled = 0.0;    // matched contrastive + push, labeled
  double contrast_unlabeled = 0.0;  // same, unlabeled (before lambda_u)
  double labeled = 0.0;
  double unlabeled = 0.0;
  double total = 0.0;
  double agent_align = 0.0;         // alignment loss at the agent update
  double agent_push = 0.0;          // background push at the agent update
};

}  // namespace semicount::losses
