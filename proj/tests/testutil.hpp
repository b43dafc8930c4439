#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "semicount/random.hpp"

namespace testutil {

// Central finite difference of `loss` along every coordinate of `x`.
inline std::vector<double> fd_grad(std::vector<double>& x,
                                   const std::function<double()>& loss,
                                   double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + h;
    double up = loss();
    x[i] = keep - h;
    double dn = loss();
    x[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

// Worst relative error, with an absolute floor so near-zero entries don't
// blow the ratio up on FD noise.
inline double max_rel_err(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline void fill_uniform(semicount::Rng& rng, std::span<double> out, double lo,
                         double hi) {
  for (double& v : out) v = semicount::uniform(rng, lo, hi);
}

inline void fill_normal(semicount::Rng& rng, std::span<double> out,
                        double stddev = 1.0) {
  for (double& v : out) v = semicount::normal(rng, 0.0, stddev);
}

}  // namespace testutil
