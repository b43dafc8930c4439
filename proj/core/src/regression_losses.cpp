#include "semicount/regression_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semicount::losses {

Posterior posterior_matrix(std::span<const PointXY> points, int stride,
                           std::size_t grid_h, std::size_t grid_w, double sigma) {
  if (stride <= 0) throw std::invalid_argument("posterior_matrix: stride must be positive");
  if (sigma <= 0.0) throw std::invalid_argument("posterior_matrix: sigma must be positive");
  Posterior post;
  post.n_cells = grid_h * grid_w;
  post.n_points = points.size();
  if (points.empty()) return post;

  post.p.resize(post.n_cells * post.n_points);
  double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> logits(points.size());
  for (std::size_t cy = 0; cy < grid_h; ++cy) {
    for (std::size_t cx = 0; cx < grid_w; ++cx) {
      double ccx = (double(cx) + 0.5) * stride;
      double ccy = (double(cy) + 0.5) * stride;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < points.size(); ++j) {
        double dx = ccx - points[j].x, dy = ccy - points[j].y;
        logits[j] = -(dx * dx + dy * dy) * inv;
        m = std::max(m, logits[j]);
      }
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - m);  // max shift: far cells stay normalised
        z += l;
      }
      std::size_t cell = cy * grid_w + cx;
      for (std::size_t j = 0; j < points.size(); ++j)
        post.p[cell * post.n_points + j] = logits[j] / z;
    }
  }
  return post;
}

double nd_bayes_loss(std::span<const double> density, const Posterior& post,
                     double beta, double weight, std::span<double> grad_density) {
  if (post.empty()) return 0.0;
  if (density.size() != post.n_cells)
    throw std::invalid_argument("nd_bayes_loss: density/cell count mismatch");
  if (!grad_density.empty() && grad_density.size() != density.size())
    throw std::invalid_argument("nd_bayes_loss: grad size mismatch");

  double loss = 0.0;
  for (std::size_t j = 0; j < post.n_points; ++j) {
    double expected = 0.0;
    for (std::size_t i = 0; i < post.n_cells; ++i)
      expected += post.p[i * post.n_points + j] * density[i];
    double resid = 1.0 - expected;
    double eps = std::abs(resid);
    double damp = std::exp(-beta * eps);  // stop-gradient: constant factor
    loss += damp * eps;
    if (!grad_density.empty() && resid != 0.0) {
      double sgn = resid > 0.0 ? -1.0 : 1.0;  // d eps / d expected
      double coeff = weight * damp * sgn;
      for (std::size_t i = 0; i < post.n_cells; ++i)
        grad_density[i] += coeff * post.p[i * post.n_points + j];
    }
  }
  return weight * loss;
}

double mask_loss(std::span<const double> predicted, std::span<const double> target,
                 double weight, std::span<double> grad_predicted) {
  if (predicted.size() != target.size())
    throw std::invalid_argument("mask_loss: size mismatch");
  if (!grad_predicted.empty() && grad_predicted.size() != predicted.size())
    throw std::invalid_argument("mask_loss: grad size mismatch");

  double sq = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    double d = predicted[i] - target[i];
    sq += d * d;
  }
  double l = std::sqrt(sq);
  if (!grad_predicted.empty() && l > 0.0) {
    for (std::size_t i = 0; i < predicted.size(); ++i)
      grad_predicted[i] += weight * (predicted[i] - target[i]) / l;
  }
  return weight * l;
}

ComposedLoss compose(double l_count, double l_mask, double l_contrast_labeled,
                     double l_contrast_unlabeled, const LossWeights& w) {
  ComposedLoss out;
  out.labeled = l_count + w.lambda_m * l_mask + w.lambda_c * l_contrast_labeled;
  out.unlabeled = w.lambda_c * l_contrast_unlabeled;
  out.total = out.labeled + w.lambda_u * out.unlabeled;
  return out;
}

}  // namespace semicount::losses
