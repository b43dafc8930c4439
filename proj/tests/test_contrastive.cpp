#include <cmath>

#include "doctest.h"
#include "semicount/contrastive.hpp"
#include "testutil.hpp"

using namespace semicount;
using namespace semicount::contrastive;

TEST_SUITE("contrastive") {

// Two agents in R^2 with borders [2]: centres (1, 2). A feature aligned with
// agent 1 (cosines 1 and 0), density 1.5, tau 1. Both matching probabilities
// equal e^{-1/4}/4 < 1/4, so the threshold set is empty and the allocator
// fallback selects agent Z(1.5) = 1. Both uncertainty weights equal
// 2(1 - e^{-1/4}) and cancel, leaving L = log(1 + e^{-1}).
TEST_CASE("two-agent fixture evaluates to the hand-computed scalar") {
  agency::AgentBank bank;
  bank.n = 2;
  bank.dim = 2;
  bank.weights = {1.0, 0.0, 0.0, 1.0};
  agency::Partition part = agency::partition_from_borders({2.0});
  REQUIRE(part.centers[0] == doctest::Approx(1.0));
  REQUIRE(part.centers[1] == doctest::Approx(2.0));

  ContrastiveConfig cfg;
  cfg.tau = 1.0;
  std::vector<double> f{1.0, 0.0};

  FeatureTerms t = feature_terms(bank, part, f, 1.5, cfg);
  const double omega = 2.0 * (1.0 - std::exp(-0.25));
  CHECK(t.omega_hat[0] == doctest::Approx(0.25 * std::exp(-0.25)));
  CHECK(t.omega_hat[1] == doctest::Approx(0.25 * std::exp(-0.25)));
  CHECK(t.omega[0] == doctest::Approx(omega).epsilon(1e-12));
  CHECK(t.omega[0] == doctest::Approx(0.44239843385719024));
  CHECK(t.fallback_positive);
  REQUIRE(t.positives.size() == 1);
  CHECK(t.positives[0] == 0);
  // Ideal value (epsilon -> 0) and the exact value with the 1e-12 guard.
  CHECK(t.loss == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-9));
  CHECK(t.loss == doctest::Approx(0.3132616875182228).epsilon(1e-9));
  const double eps = 1e-12;
  const double num = omega * std::exp(1.0) + eps;
  const double den = omega * (std::exp(1.0) + 1.0) + eps;
  CHECK(t.loss == doctest::Approx(-std::log(num / den)).epsilon(1e-14));

  std::vector<double> dens{1.5};
  double total = matched_contrastive_loss(bank, part, f, dens, 2, cfg, 1.0,
                                          nullptr, nullptr);
  CHECK(total == doctest::Approx(t.loss).epsilon(1e-14));
}

TEST_CASE("normal kernel yields threshold positives near the centre") {
  agency::AgentBank bank = agency::AgentBank::random_init(3, 4, 21);
  agency::Partition part = agency::partition_from_borders({1.0, 2.0});
  ContrastiveConfig cfg;
  cfg.match.kernel = agency::MatchKernel::normal;
  std::vector<double> f(4, 0.5);

  // sqrt(2/pi) e^{-2 d^2} >= 1/4 within |delta| <~ 0.7617 of a centre.
  FeatureTerms near = feature_terms(bank, part, f, 1.6, cfg);
  CHECK(!near.fallback_positive);
  CHECK(!near.positives.empty());

  cfg.match.kernel = agency::MatchKernel::laplace;
  FeatureTerms lap = feature_terms(bank, part, f, 1.6, cfg);
  CHECK(lap.fallback_positive);  // laplace only reaches 1/4 at exact centres
  REQUIRE(lap.positives.size() == 1);
  CHECK(lap.positives[0] == part.index_of(1.6));

  // The peak itself sits on the inclusive threshold: a density placed exactly
  // on a centre still qualifies, so the degeneracy is strict only off-centre.
  FeatureTerms peak = feature_terms(bank, part, f, 1.5, cfg);
  CHECK(!peak.fallback_positive);
  CHECK(peak.omega_hat[part.index_of(1.5)] == 0.25);
}

TEST_CASE("gradients match finite differences for both kernels") {
  Rng rng(777);
  const double taus[] = {0.07, 0.1, 0.5, 1.0};
  for (int trial = 0; trial < 24; ++trial) {
    std::size_t dim = 2 + std::size_t(uniform_int(rng, 0, 6));
    std::size_t n_agents = 2 + std::size_t(uniform_int(rng, 0, 4));
    std::size_t n_emb = 1 + std::size_t(uniform_int(rng, 0, 3));

    agency::AgentBank bank = agency::AgentBank::random_init(n_agents, dim, rng());
    std::vector<double> borders(n_agents - 1);
    for (std::size_t i = 0; i < borders.size(); ++i)
      borders[i] = 0.5 * double(i + 1);
    agency::Partition part = agency::partition_from_borders(borders);

    ContrastiveConfig cfg;
    cfg.tau = taus[trial % 4];
    cfg.match.kernel = trial % 2 ? agency::MatchKernel::normal
                                 : agency::MatchKernel::laplace;

    std::vector<double> emb(n_emb * dim), dens(n_emb);
    testutil::fill_normal(rng, emb);
    testutil::fill_uniform(rng, dens, 0.05, 0.5 * double(n_agents) + 0.4);

    std::vector<double> ga(bank.weights.size(), 0.0), ge(emb.size(), 0.0);
    matched_contrastive_loss(bank, part, emb, dens, dim, cfg, 1.0, &ga, &ge);
    auto loss = [&] {
      return matched_contrastive_loss(bank, part, emb, dens, dim, cfg, 1.0,
                                      nullptr, nullptr);
    };
    CHECK(testutil::max_rel_err(ga, testutil::fd_grad(bank.weights, loss)) < 1e-4);
    CHECK(testutil::max_rel_err(ge, testutil::fd_grad(emb, loss)) < 1e-4);
  }
}

TEST_CASE("tiny temperature stays finite through the shift path") {
  agency::AgentBank bank = agency::AgentBank::random_init(4, 3, 9);
  agency::Partition part = agency::partition_from_borders({1.0, 2.0, 3.0});
  ContrastiveConfig cfg;
  cfg.tau = 1e-3;  // |s|/tau up to 1000 -> max-shifted exponentials
  std::vector<double> f{0.3, -0.8, 0.51};
  FeatureTerms t = feature_terms(bank, part, f, 2.2, cfg);
  CHECK(std::isfinite(t.loss));
  std::vector<double> dens{2.2};
  std::vector<double> ga(bank.weights.size(), 0.0), ge(f.size(), 0.0);
  double l = matched_contrastive_loss(bank, part, f, dens, 3, cfg, 1.0, &ga, &ge);
  CHECK(std::isfinite(l));
  for (double g : ga) CHECK(std::isfinite(g));
  for (double g : ge) CHECK(std::isfinite(g));
}

TEST_CASE("weight scales loss and gradients linearly") {
  agency::AgentBank bank = agency::AgentBank::random_init(3, 5, 31);
  agency::Partition part = agency::partition_from_borders({1.0, 2.0});
  ContrastiveConfig cfg;
  Rng rng(5);
  std::vector<double> emb(2 * 5), dens{0.7, 1.9};
  testutil::fill_normal(rng, emb);
  std::vector<double> g1(emb.size(), 0.0), g2(emb.size(), 0.0);
  double l1 = matched_contrastive_loss(bank, part, emb, dens, 5, cfg, 1.0, nullptr, &g1);
  double l2 = matched_contrastive_loss(bank, part, emb, dens, 5, cfg, 3.0, nullptr, &g2);
  CHECK(l2 == doctest::Approx(3.0 * l1));
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g2[i] == doctest::Approx(3.0 * g1[i]));
}

}  // TEST_SUITE
