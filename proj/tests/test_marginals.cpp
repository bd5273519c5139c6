#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pipemap/marginals.hpp"
#include "pipemap/normal.hpp"

using namespace pipemap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> draw_normal(std::mt19937_64& rng, double mean, double sd, int n) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

// Inverse-transform samplers from the textbook formulas; deliberately not
// the library quantile implementations.
std::vector<double> draw_gumbel(std::mt19937_64& rng, double loc, double scale, int n) {
  std::uniform_real_distribution<double> u(1e-15, 1.0 - 1e-15);
  std::vector<double> out(n);
  for (auto& v : out) v = loc - scale * std::log(-std::log(u(rng)));
  return out;
}

std::vector<double> draw_weibull(std::mt19937_64& rng, double scale, double shape, int n) {
  std::uniform_real_distribution<double> u(1e-15, 1.0 - 1e-15);
  std::vector<double> out(n);
  for (auto& v : out) v = scale * std::pow(-std::log(1.0 - u(rng)), 1.0 / shape);
  return out;
}

GaussianMixture three_component_gm() {
  GaussianMixture gm;
  gm.components = {{0.25, 4.0, 0.6}, {0.45, 9.0, 1.2}, {0.30, 13.0, 0.8}};
  return gm;
}

}  // namespace

TEST_CASE("EM with one component reproduces the closed-form mean and sd") {
  std::mt19937_64 rng(1);
  const auto samples = draw_normal(rng, 7.0, 2.0, 400);
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= samples.size();
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= samples.size();

  const auto fit = fit_gm_em(samples, 1, {});
  REQUIRE(fit.mixture.component_count() == 1);
  REQUIRE_THAT(fit.mixture.components[0].mean, WithinAbs(mean, 1e-12));
  REQUIRE_THAT(fit.mixture.components[0].sd, WithinAbs(std::sqrt(var), 1e-12));
  REQUIRE(fit.mixture.components[0].weight == 1.0);
}

TEST_CASE("EM recovers a single Gaussian within sampling error") {
  std::mt19937_64 rng(2);
  const int n = 5000;
  const auto samples = draw_normal(rng, 10.0, 1.0, n);
  const auto fit = fit_gm_em(samples, 1, {});
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  REQUIRE_THAT(fit.mixture.components[0].mean, WithinAbs(10.0, 3.0 * se));
  REQUIRE_THAT(fit.mixture.components[0].sd, WithinRel(1.0, 0.10));
}

TEST_CASE("EM recovers a well-separated two-component mixture") {
  // 0.7 N(12, 0.5) + 0.3 N(5, 0.8)
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution pick(0.7);
    std::normal_distribution<double> hi(12.0, 0.5), lo(5.0, 0.8);
    std::vector<double> samples(5000);
    for (auto& v : samples) v = pick(rng) ? hi(rng) : lo(rng);

    EmConfig cfg;
    cfg.rng_seed = seed;
    const auto fit = fit_gm_em(samples, 2, cfg);
    REQUIRE(fit.mixture.component_count() == 2);
    const auto& a = fit.mixture.components[0];  // sorted by mean: the low mode
    const auto& b = fit.mixture.components[1];
    CAPTURE(seed);
    REQUIRE_THAT(a.mean, WithinAbs(5.0, 0.2));
    REQUIRE_THAT(b.mean, WithinAbs(12.0, 0.2));
    REQUIRE_THAT(a.weight, WithinAbs(0.3, 0.05));
    REQUIRE_THAT(b.weight, WithinAbs(0.7, 0.05));
    REQUIRE_THAT(a.sd, WithinAbs(0.8, 0.15));
    REQUIRE_THAT(b.sd, WithinAbs(0.5, 0.15));

    // log-likelihood must never decrease across EM iterations
    for (std::size_t i = 1; i < fit.ll_history.size(); ++i)
      REQUIRE(fit.ll_history[i] >=
              fit.ll_history[i - 1] - 1e-9 * (std::abs(fit.ll_history[i - 1]) + 1.0));
  }
}

TEST_CASE("EM is deterministic given a seed") {
  std::mt19937_64 rng(3);
  const auto samples = draw_normal(rng, 8.0, 1.5, 600);
  EmConfig cfg;
  cfg.rng_seed = 42;
  const auto a = fit_gm_em(samples, 3, cfg);
  const auto b = fit_gm_em(samples, 3, cfg);
  REQUIRE(a.mixture.component_count() == b.mixture.component_count());
  for (int k = 0; k < a.mixture.component_count(); ++k) {
    REQUIRE(a.mixture.components[k].weight == b.mixture.components[k].weight);
    REQUIRE(a.mixture.components[k].mean == b.mixture.components[k].mean);
    REQUIRE(a.mixture.components[k].sd == b.mixture.components[k].sd);
  }
}

TEST_CASE("fitted mixtures satisfy the weight and ordering invariants") {
  std::mt19937_64 rng(4);
  std::vector<double> samples = draw_normal(rng, 3.0, 0.7, 300);
  const auto more = draw_normal(rng, 9.0, 1.1, 500);
  samples.insert(samples.end(), more.begin(), more.end());

  const auto fit = fit_gm_em(samples, 3, {});
  double wsum = 0.0;
  for (const auto& c : fit.mixture.components) wsum += c.weight;
  REQUIRE_THAT(wsum, WithinAbs(1.0, 1e-12));
  for (int k = 1; k < fit.mixture.component_count(); ++k)
    REQUIRE(fit.mixture.components[k - 1].mean <= fit.mixture.components[k].mean);
  REQUIRE_NOTHROW(fit.mixture.validate());
}

TEST_CASE("fit_gm_em validates its input") {
  std::vector<double> tiny = {1.0, 2.0, 3.0, 4.0, 5.0};
  REQUIRE_THROWS_AS(fit_gm_em(tiny, 2, {}), std::invalid_argument);  // 5 < 3*2
  REQUIRE_THROWS_AS(fit_gm_em(tiny, 0, {}), std::invalid_argument);
  std::vector<double> bad = {1.0, 2.0, std::nan("")};
  REQUIRE_THROWS_AS(fit_gm_em(bad, 1, {}), std::invalid_argument);
}

TEST_CASE("AIC selection prefers one component on unimodal data") {
  // AIC overselects mixtures with some probability by construction; the
  // rate depends on the sample size and how hard EM hunts for spurious
  // optima. This configuration sits comfortably inside the 90% bar.
  int chose_one = 0;
  const int trials = 20;
  for (int seed = 1; seed <= trials; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const auto samples = draw_normal(rng, 10.0, 1.0, 1500);
    EmConfig cfg;
    cfg.restarts = 2;
    cfg.rng_seed = static_cast<std::uint64_t>(seed);
    const auto fit = select_gm_by_aic(samples, 4, cfg);
    if (fit.mixture.component_count() == 1) ++chose_one;
  }
  INFO("N=1 selected in " << chose_one << "/" << trials << " trials");
  REQUIRE(chose_one >= 18);  // >= 90%
}

TEST_CASE("AIC selection finds two components in clearly bimodal data") {
  std::mt19937_64 rng(5);
  std::bernoulli_distribution pick(0.5);
  std::normal_distribution<double> a(0.0, 1.0), b(6.0, 1.0);  // modes 6 sigma apart
  std::vector<double> samples(2000);
  for (auto& v : samples) v = pick(rng) ? a(rng) : b(rng);
  const auto fit = select_gm_by_aic(samples, 4, {});
  REQUIRE(fit.mixture.component_count() == 2);
}

TEST_CASE("Gumbel MLE recovers known parameters from a large sample") {
  std::mt19937_64 rng(6);
  const auto samples = draw_gumbel(rng, 10.0, 2.0, 100000);
  const auto g = fit_gumbel_mle(samples);
  REQUIRE_THAT(g.location, WithinRel(10.0, 0.02));
  REQUIRE_THAT(g.scale, WithinRel(2.0, 0.02));
  REQUIRE(g.orientation == GumbelDist::Orientation::Max);
}

TEST_CASE("Weibull MLE recovers known parameters from a large sample") {
  std::mt19937_64 rng(7);
  const auto samples = draw_weibull(rng, 10.0, 3.0, 100000);
  const auto w = fit_weibull_mle(samples);
  REQUIRE_THAT(w.scale, WithinRel(10.0, 0.02));
  REQUIRE_THAT(w.shape, WithinRel(3.0, 0.02));
}

TEST_CASE("min-orientation Gumbel fits the mirrored data") {
  std::mt19937_64 rng(8);
  // mirror of a max-Gumbel: long lower tail
  auto samples = draw_gumbel(rng, 10.0, 2.0, 50000);
  for (auto& v : samples) v = 20.0 - v;  // min-Gumbel with location 10, scale 2
  const auto g = fit_gumbel_mle(samples, GumbelDist::Orientation::Min);
  REQUIRE(g.orientation == GumbelDist::Orientation::Min);
  REQUIRE_THAT(g.location, WithinRel(10.0, 0.02));
  REQUIRE_THAT(g.scale, WithinRel(2.0, 0.02));
  // median round trip in the min orientation
  REQUIRE_THAT(g.cdf(g.quantile(0.5)), WithinAbs(0.5, 1e-12));
}

TEST_CASE("degenerate samples are rejected by the MLE fitters") {
  std::vector<double> constant(100, 3.25);
  REQUIRE_THROWS_AS(fit_gumbel_mle(constant), std::runtime_error);
  REQUIRE_THROWS_AS(fit_weibull_mle(constant), std::runtime_error);
  std::vector<double> with_nonpositive = {1.0, 2.0, 0.0, 3.0};
  REQUIRE_THROWS_AS(fit_weibull_mle(with_nonpositive), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_gumbel_mle(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("closed-form cdf values") {
  GaussianMixture single;
  single.components = {{1.0, 7.5, 1.5}};
  REQUIRE_THAT(single.cdf(7.5), WithinAbs(0.5, 1e-14));

  WeibullDist w{10.0, 2.5};
  REQUIRE_THAT(w.cdf(10.0), WithinAbs(1.0 - std::exp(-1.0), 1e-14));

  GumbelDist g{3.0, 1.2};
  REQUIRE_THAT(g.cdf(3.0), WithinAbs(std::exp(-1.0), 1e-14));
}

TEST_CASE("quantile and cdf are mutual inverses for every family") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);

  SECTION("three-component mixture, tight round trip in probability") {
    const auto gm = three_component_gm();
    for (int i = 0; i < 100; ++i) {
      const double p = u(rng);
      REQUIRE_THAT(gm.cdf(gm.quantile(p)), WithinAbs(p, 1e-10));
    }
  }
  SECTION("mixture round trip in the sample domain") {
    const auto gm = three_component_gm();
    for (double t : {3.0, 4.5, 8.0, 9.5, 12.0, 13.5}) {
      REQUIRE_THAT(gm.quantile(gm.cdf(t)), WithinAbs(t, 1e-8));
    }
  }
  SECTION("closed-form families") {
    GumbelDist g{5.0, 2.0};
    WeibullDist w{9.0, 1.8};
    for (int i = 0; i < 100; ++i) {
      const double p = u(rng);
      REQUIRE_THAT(g.cdf(g.quantile(p)), WithinAbs(p, 1e-12));
      REQUIRE_THAT(w.cdf(w.quantile(p)), WithinAbs(p, 1e-12));
    }
    for (double t : {1.0, 4.0, 7.0, 12.0}) {
      REQUIRE_THAT(g.quantile(g.cdf(t)), WithinAbs(t, 1e-8));
      REQUIRE_THAT(w.quantile(w.cdf(t)), WithinAbs(t, 1e-8));
    }
  }
  SECTION("quantile rejects u outside (0,1)") {
    const auto gm = three_component_gm();
    REQUIRE_THROWS_AS(gm.quantile(0.0), std::domain_error);
    REQUIRE_THROWS_AS(gm.quantile(1.0), std::domain_error);
    REQUIRE_THROWS_AS(GumbelDist{}.quantile(-0.5), std::domain_error);
    REQUIRE_THROWS_AS(WeibullDist{}.quantile(1.5), std::domain_error);
  }
}

TEST_CASE("mixture pdf integrates to one") {
  const auto gm = three_component_gm();
  double lo = 1e300, hi = -1e300;
  for (const auto& c : gm.components) {
    lo = std::min(lo, c.mean - 10.0 * c.sd);
    hi = std::max(hi, c.mean + 10.0 * c.sd);
  }
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double integral = 0.5 * (gm.pdf(lo) + gm.pdf(hi));
  for (int i = 1; i < steps; ++i) integral += gm.pdf(lo + i * h);
  integral *= h;
  REQUIRE_THAT(integral, WithinAbs(1.0, 1e-6));
}

TEST_CASE("mixture cdf is nondecreasing with the right limits") {
  const auto gm = three_component_gm();
  double lo = 1e300, hi = -1e300;
  for (const auto& c : gm.components) {
    lo = std::min(lo, c.mean - 12.0 * c.sd);
    hi = std::max(hi, c.mean + 12.0 * c.sd);
  }
  REQUIRE(gm.cdf(lo) < 1e-12);
  REQUIRE(gm.cdf(hi) > 1.0 - 1e-12);
  double prev = -1.0;
  for (int i = 0; i <= 500; ++i) {
    const double f = gm.cdf(lo + (hi - lo) * i / 500.0);
    REQUIRE(f >= prev);
    prev = f;
  }
}

TEST_CASE("log_likelihood") {
  GaussianMixture single;
  single.components = {{1.0, 4.0, 1.0}};
  MarginalModel model(single, {});

  SECTION("single sample at the mean of a unit-sd component") {
    const std::vector<double> s = {4.0};
    REQUIRE_THAT(log_likelihood(model, s), WithinAbs(std::log(kInvSqrt2Pi), 1e-14));
  }
  SECTION("additivity over samples") {
    const std::vector<double> s1 = {3.0}, s2 = {5.5}, both = {3.0, 5.5};
    REQUIRE_THAT(log_likelihood(model, both),
                 WithinAbs(log_likelihood(model, s1) + log_likelihood(model, s2), 1e-12));
  }
  SECTION("matches a direct sum of pdf logs") {
    std::mt19937_64 rng(10);
    const auto gm = three_component_gm();
    MarginalModel m(gm, {});
    const auto samples = draw_normal(rng, 9.0, 3.0, 200);
    double direct = 0.0;
    for (double t : samples) direct += std::log(m.pdf(t));
    REQUIRE_THAT(log_likelihood(m, samples), WithinAbs(direct, 1e-12 * std::abs(direct)));
  }
  SECTION("Weibull rejects samples outside its support") {
    MarginalModel w(WeibullDist{2.0, 1.5}, {});
    const std::vector<double> bad = {1.0, -0.5};
    REQUIRE_THROWS_AS(log_likelihood(w, bad), std::domain_error);
  }
}

TEST_CASE("canonicalization sorts equal mixtures into the same form") {
  GaussianMixture a, b;
  a.components = {{0.4, 2.0, 0.5}, {0.6, 8.0, 1.0}};
  b.components = {{0.6, 8.0, 1.0}, {0.4, 2.0, 0.5}};
  b.canonicalize();
  REQUIRE(a.components.size() == b.components.size());
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    REQUIRE(a.components[i].weight == b.components[i].weight);
    REQUIRE(a.components[i].mean == b.components[i].mean);
    REQUIRE(a.components[i].sd == b.components[i].sd);
  }
}

TEST_CASE("MarginalModel JSON round trips preserve values exactly") {
  SECTION("mixture") {
    std::mt19937_64 rng(12);
    const auto samples = draw_normal(rng, 6.0, 1.3, 300);
    const auto fit = fit_gm_em(samples, 2, {});
    FitDiagnostics diag{fit.log_likelihood, gm_param_count(fit.mixture),
                        static_cast<int>(samples.size())};
    MarginalModel model(fit.mixture, diag);
    const auto back = MarginalModel::from_json(model.to_json());
    REQUIRE(back.family() == Family::Gm);
    REQUIRE(back.diagnostics().log_likelihood == diag.log_likelihood);
    REQUIRE(back.diagnostics().n_params == diag.n_params);
    for (std::size_t i = 0; i < fit.mixture.components.size(); ++i) {
      REQUIRE(back.gm().components[i].weight == fit.mixture.components[i].weight);
      REQUIRE(back.gm().components[i].mean == fit.mixture.components[i].mean);
      REQUIRE(back.gm().components[i].sd == fit.mixture.components[i].sd);
    }
  }
  SECTION("gumbel with orientation") {
    GumbelDist g{3.141592653589793, 0.577215664901532, GumbelDist::Orientation::Min};
    MarginalModel model(g, {-12.5, 2, 50});
    const auto back = MarginalModel::from_json(model.to_json());
    REQUIRE(back.gumbel().location == g.location);
    REQUIRE(back.gumbel().scale == g.scale);
    REQUIRE(back.gumbel().orientation == GumbelDist::Orientation::Min);
  }
  SECTION("weibull") {
    WeibullDist w{10.123456789012345, 2.987654321098765};
    MarginalModel model(w, {-99.25, 2, 77});
    const auto back = MarginalModel::from_json(model.to_json());
    REQUIRE(back.weibull().scale == w.scale);
    REQUIRE(back.weibull().shape == w.shape);
    REQUIRE(back.diagnostics().sample_size == 77);
  }
  SECTION("unknown family is rejected") {
    nlohmann::json j = {{"family", "frechet"},
                        {"params", {}},
                        {"diagnostics",
                         {{"log_likelihood", 0.0}, {"n_params", 0}, {"sample_size", 0}}}};
    REQUIRE_THROWS_AS(MarginalModel::from_json(j), std::invalid_argument);
  }
}
