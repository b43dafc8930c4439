#include "semicount/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace semicount::contrastive {

namespace {

double guarded_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::max(std::sqrt(s), agency::kNormGuard);
}

struct PerFeature {
  std::vector<double> omega_hat, omega, u, s;
  std::vector<std::size_t> positives;
  bool fallback = false;
  double num = 0.0, den = 0.0, loss = 0.0;
};

PerFeature compute(const agency::AgentBank& bank, const agency::Partition& part,
                   std::span<const double> e, double density,
                   const ContrastiveConfig& cfg) {
  std::size_t n = bank.n;
  PerFeature r;
  r.omega_hat.resize(n);
  r.omega.resize(n);
  r.u.resize(n);
  r.s.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    r.s[i] = agency::cosine(bank.row(i), e);
    r.omega_hat[i] = agency::match_prob(density, part.centers[i], cfg.match.kernel);
    r.omega[i] = agency::uncertainty_weight(r.omega_hat[i], cfg.match.clamp_weights);
    if (r.omega_hat[i] >= 0.25) r.positives.push_back(i);
  }
  if (r.positives.empty()) {
    r.positives.push_back(part.index_of(density));
    r.fallback = true;
  }

  // Direct evaluation keeps the documented epsilon semantics; only shift
  // when exp would overflow (tau can be as small as 0.01).
  double m = -std::numeric_limits<double>::infinity();
  for (double s : r.s) m = std::max(m, s / cfg.tau);
  double shift = m > 500.0 ? m : 0.0;
  double eps_eff = shift > 0.0 ? 0.0 : kEpsNum;

  for (std::size_t i = 0; i < n; ++i) r.u[i] = std::exp(r.s[i] / cfg.tau - shift);

  for (std::size_t i = 0; i < n; ++i) r.den += r.omega[i] * r.u[i];
  for (std::size_t i : r.positives) r.num += r.omega[i] * r.u[i];
  r.num += eps_eff;
  r.den += eps_eff;

  if (r.den <= 0.0) {  // all weights zero: the ratio degenerates to 1
    r.loss = 0.0;
  } else {
    double num = std::max(r.num, std::numeric_limits<double>::min());
    r.loss = std::log(r.den) - std::log(num);
  }
  return r;
}

void add_cosine_grad_wrt_first(std::span<const double> a, std::span<const double> b,
                               double s, double coeff, std::span<double> out) {
  double na = guarded_norm(a), nb = guarded_norm(b);
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] += coeff * (b[i] / (na * nb) - s * a[i] / (na * na));
}

}  // namespace

FeatureTerms feature_terms(const agency::AgentBank& bank, const agency::Partition& part,
                           std::span<const double> embedding, double density,
                           const ContrastiveConfig& cfg) {
  PerFeature r = compute(bank, part, embedding, density, cfg);
  FeatureTerms t;
  t.omega_hat = std::move(r.omega_hat);
  t.omega = std::move(r.omega);
  t.u = std::move(r.u);
  t.positives = std::move(r.positives);
  t.fallback_positive = r.fallback;
  t.loss = r.loss;
  return t;
}

double matched_contrastive_loss(const agency::AgentBank& bank, const agency::Partition& part,
                                std::span<const double> embeddings,
                                std::span<const double> densities, std::size_t dim,
                                const ContrastiveConfig& cfg, double weight,
                                std::vector<double>* grad_agents,
                                std::vector<double>* grad_embeddings) {
  if (dim != bank.dim) throw std::invalid_argument("contrastive: dim mismatch");
  if (densities.size() * dim != embeddings.size())
    throw std::invalid_argument("contrastive: embedding/density count mismatch");
  if (part.n_agents() != bank.n)
    throw std::invalid_argument("contrastive: partition/bank size mismatch");
  if (cfg.tau <= 0.0) throw std::invalid_argument("contrastive: tau must be positive");
  if (grad_agents && grad_agents->size() != bank.weights.size())
    throw std::invalid_argument("contrastive: grad_agents size");
  if (grad_embeddings && grad_embeddings->size() != embeddings.size())
    throw std::invalid_argument("contrastive: grad_embeddings size");

  double total = 0.0;
  std::vector<char> is_pos(bank.n);
  for (std::size_t j = 0; j < densities.size(); ++j) {
    std::span<const double> e = embeddings.subspan(j * dim, dim);
    PerFeature r = compute(bank, part, e, densities[j], cfg);
    total += r.loss;
    if (!grad_agents && !grad_embeddings) continue;
    if (r.den <= 0.0) continue;  // loss constant 0 here, no gradient

    std::fill(is_pos.begin(), is_pos.end(), 0);
    for (std::size_t i : r.positives) is_pos[i] = 1;
    double num = std::max(r.num, std::numeric_limits<double>::min());

    for (std::size_t i = 0; i < bank.n; ++i) {
      // dL/ds_i = (u_i/tau) * (omega_i/den - [i in P] omega_i/num)
      double g = (r.u[i] / cfg.tau) *
                 (r.omega[i] / r.den - (is_pos[i] ? r.omega[i] / num : 0.0));
      if (g == 0.0) continue;
      auto f = bank.row(i);
      if (grad_agents)
        add_cosine_grad_wrt_first(
            f, e, r.s[i], weight * g,
            std::span<double>(grad_agents->data() + i * dim, dim));
      if (grad_embeddings)
        add_cosine_grad_wrt_first(
            e, f, r.s[i], weight * g,
            std::span<double>(grad_embeddings->data() + j * dim, dim));
    }
  }
  return weight * total;
}

}  // namespace semicount::contrastive
