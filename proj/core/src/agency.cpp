#include "semicount/agency.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "semicount/random.hpp"

namespace semicount::agency {

namespace {

double norm_guarded(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::max(std::sqrt(s), kNormGuard);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dim mismatch");
  return dot(a, b) / (norm_guarded(a) * norm_guarded(b));
}

const char* to_string(MatchKernel k) {
  return k == MatchKernel::laplace ? "laplace" : "normal";
}

MatchKernel kernel_from_string(const std::string& s) {
  if (s == "laplace") return MatchKernel::laplace;
  if (s == "normal") return MatchKernel::normal;
  throw std::invalid_argument("unknown match kernel: " + s);
}

std::size_t Partition::index_of(double density) const {
  if (centers.empty()) throw std::logic_error("empty partition");
  // Intervals are upper-inclusive: d == v_i belongs to interval i.
  auto it = std::lower_bound(borders.begin(), borders.end(), density);
  return static_cast<std::size_t>(it - borders.begin());
}

Partition build_partition(std::vector<double> positive_densities, std::size_t n_agents) {
  if (n_agents == 0) throw std::invalid_argument("n_agents must be positive");

  std::erase_if(positive_densities,
                [](double d) { return !(d > 0.0) || !std::isfinite(d); });
  std::sort(positive_densities.begin(), positive_densities.end());

  Partition p;
  if (n_agents == 1) {
    double center = 1.0;
    if (!positive_densities.empty())
      center = positive_densities[positive_densities.size() / 2];
    p.centers = {center};
    return p;
  }

  auto geometric = [&](double lo, double hi) {
    if (!(hi > lo)) hi = 4.0 * lo;
    std::vector<double> b(n_agents - 1);
    for (std::size_t i = 1; i < n_agents; ++i)
      b[i - 1] = lo * std::pow(hi / lo, double(i) / double(n_agents));
    return b;
  };

  if (positive_densities.empty()) {
    p.borders = geometric(kDensityFloor, 1.0);
  } else {
    // Type-1 quantiles: q_i = i/n_agents -> sorted[ceil(q_i * n) - 1].
    std::size_t n = positive_densities.size();
    std::vector<double> b(n_agents - 1);
    for (std::size_t i = 1; i < n_agents; ++i) {
      auto k = static_cast<std::size_t>(
          std::ceil(double(i) / double(n_agents) * double(n)));
      k = std::clamp<std::size_t>(k, 1, n);
      b[i - 1] = positive_densities[k - 1];
    }
    bool increasing = true;
    for (std::size_t i = 1; i < b.size(); ++i)
      if (!(b[i] > b[i - 1])) increasing = false;
    if (!increasing || b.empty()) {
      double lo = std::max(positive_densities.front(), kDensityFloor);
      double hi = positive_densities.back();
      b = geometric(lo, hi);
    }
    p.borders = std::move(b);
  }

  p.centers.resize(n_agents);
  p.centers[0] = p.borders[0] / 2.0;
  for (std::size_t i = 1; i + 1 < n_agents; ++i)
    p.centers[i] = 0.5 * (p.borders[i - 1] + p.borders[i]);
  p.centers[n_agents - 1] = p.borders.back();  // extreme-interval rule
  return p;
}

Partition partition_from_borders(std::vector<double> borders) {
  if (borders.empty()) throw std::invalid_argument("partition_from_borders: no borders");
  for (std::size_t i = 1; i < borders.size(); ++i)
    if (!(borders[i] > borders[i - 1]))
      throw std::invalid_argument("partition_from_borders: borders must increase");
  Partition p;
  p.borders = std::move(borders);
  std::size_t n = p.borders.size() + 1;
  p.centers.resize(n);
  p.centers[0] = p.borders[0] / 2.0;
  for (std::size_t i = 1; i + 1 < n; ++i) p.centers[i] = 0.5 * (p.borders[i - 1] + p.borders[i]);
  p.centers[n - 1] = p.borders.back();
  return p;
}

double match_prob(double d, double center, MatchKernel k) {
  double delta = d - center;
  if (k == MatchKernel::laplace) return 0.25 * std::exp(-std::abs(delta) / 2.0);
  return std::sqrt(2.0 / std::numbers::pi) * std::exp(-2.0 * delta * delta);
}

double uncertainty_weight(double omega_hat, bool clamp) {
  double w = 8.0 * std::abs(omega_hat - 0.25);
  if (clamp) w = std::clamp(w, 0.0, 2.0);
  return w;
}

AgentBank AgentBank::random_init(std::size_t n, std::size_t dim, std::uint64_t seed) {
  if (n == 0 || dim == 0) throw std::invalid_argument("agent bank must be non-empty");
  AgentBank bank;
  bank.n = n;
  bank.dim = dim;
  bank.weights.resize(n * dim);
  Rng rng(mix_seed(seed, hash_str("agent_bank")));
  for (std::size_t i = 0; i < n; ++i) {
    auto r = bank.row(i);
    double nrm = 0.0;
    do {
      nrm = 0.0;
      for (double& x : r) {
        x = normal(rng);
        nrm += x * x;
      }
      nrm = std::sqrt(nrm);
    } while (nrm < 1e-6);
    for (double& x : r) x /= nrm;
  }
  return bank;
}

void AgentBank::apply_norm_floor(const std::vector<double>& before) {
  if (before.size() != weights.size())
    throw std::invalid_argument("apply_norm_floor: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    auto r = row(i);
    double nrm = 0.0;
    for (double x : r) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm >= kAgentNormFloor) continue;
    if (nrm == 0.0) {
      std::copy(before.begin() + static_cast<std::ptrdiff_t>(i * dim),
                before.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim), r.begin());
    } else {
      double s = kAgentNormFloor / nrm;
      for (double& x : r) x *= s;
    }
  }
}

namespace {

// d/da of s(a,b) = b/(|a||b|) - s * a/|a|^2, with guarded norms.
void add_cosine_grad_wrt_first(std::span<const double> a, std::span<const double> b,
                               double coeff, std::span<double> out) {
  double na = norm_guarded(a), nb = norm_guarded(b);
  double s = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] += coeff * (b[i] / (na * nb) - s * a[i] / (na * na));
}

}  // namespace

double alignment_loss(const AgentBank& bank, const Partition& part,
                      std::span<const double> embeddings,
                      std::span<const double> densities, std::size_t dim,
                      double weight, std::vector<double>* grad_agents,
                      std::vector<double>* grad_embeddings) {
  if (dim != bank.dim) throw std::invalid_argument("alignment_loss: dim mismatch");
  if (densities.size() * dim != embeddings.size())
    throw std::invalid_argument("alignment_loss: embedding/density count mismatch");
  if (part.n_agents() != bank.n)
    throw std::invalid_argument("alignment_loss: partition/bank size mismatch");
  if (grad_agents && grad_agents->size() != bank.weights.size())
    throw std::invalid_argument("alignment_loss: grad_agents size");
  if (grad_embeddings && grad_embeddings->size() != embeddings.size())
    throw std::invalid_argument("alignment_loss: grad_embeddings size");

  double loss = 0.0;
  for (std::size_t j = 0; j < densities.size(); ++j) {
    std::span<const double> e = embeddings.subspan(j * dim, dim);
    std::size_t zi = part.index_of(densities[j]);
    auto f = bank.row(zi);
    loss -= cosine(f, e);
    if (grad_agents)
      add_cosine_grad_wrt_first(f, e, -weight,
                                std::span<double>(grad_agents->data() + zi * dim, dim));
    if (grad_embeddings)
      add_cosine_grad_wrt_first(e, f, -weight,
                                std::span<double>(grad_embeddings->data() + j * dim, dim));
  }
  return weight * loss;
}

double background_push_loss(const AgentBank& bank, std::span<const double> background,
                            std::size_t dim, double weight,
                            std::vector<double>* grad_agents,
                            std::vector<double>* grad_background) {
  if (dim != bank.dim) throw std::invalid_argument("background_push_loss: dim mismatch");
  if (background.size() % dim != 0)
    throw std::invalid_argument("background_push_loss: background size not multiple of dim");
  if (grad_agents && grad_agents->size() != bank.weights.size())
    throw std::invalid_argument("background_push_loss: grad_agents size");
  if (grad_background && grad_background->size() != background.size())
    throw std::invalid_argument("background_push_loss: grad_background size");

  std::size_t nb = background.size() / dim;
  double inv = 1.0 / double(bank.n);
  double loss = 0.0;
  for (std::size_t i = 0; i < bank.n; ++i) {
    auto f = bank.row(i);
    for (std::size_t j = 0; j < nb; ++j) {
      std::span<const double> b = background.subspan(j * dim, dim);
      loss += cosine(f, b);
      // The 1/n_agents factor from the loss definition rides along in the
      // gradient so finite differences of the loss match exactly.
      if (grad_agents)
        add_cosine_grad_wrt_first(f, b, weight * inv,
                                  std::span<double>(grad_agents->data() + i * dim, dim));
      if (grad_background)
        add_cosine_grad_wrt_first(b, f, weight * inv,
                                  std::span<double>(grad_background->data() + j * dim, dim));
    }
  }
  return weight * inv * loss;
}

}  // namespace semicount::agency
