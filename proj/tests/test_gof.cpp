#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pipemap/gof.hpp"
#include "pipemap/grid.hpp"

using namespace pipemap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MarginalModel single_gaussian(double mean, double sd) {
  GaussianMixture gm;
  gm.components = {{1.0, mean, sd}};
  return MarginalModel(std::move(gm), {});
}

}  // namespace

TEST_CASE("ks_statistic closed forms") {
  SECTION("single sample with F(t) = 0.5 gives KS = 0.5") {
    const auto model = single_gaussian(4.0, 1.0);
    const std::vector<double> one = {4.0};
    REQUIRE_THAT(ks_statistic(model, one), WithinAbs(0.5, 1e-14));
  }
  SECTION("model far from the data gives KS = 1 within 1/n") {
    const auto model = single_gaussian(1000.0, 1.0);  // cdf ~ 0 near the data
    std::vector<double> samples;
    for (int i = 0; i < 50; ++i) samples.push_back(0.1 * i);
    const double ks = ks_statistic(model, samples);
    REQUIRE(ks <= 1.0);
    REQUIRE(ks >= 1.0 - 1.0 / 50.0);
  }
  SECTION("KS is always inside [0,1]") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> d(5.0, 2.0);
    std::vector<double> s(200);
    for (auto& v : s) v = d(rng);
    for (double mean : {-50.0, 0.0, 5.0, 50.0}) {
      const double ks = ks_statistic(single_gaussian(mean, 2.0), s);
      REQUIRE(ks >= 0.0);
      REQUIRE(ks <= 1.0);
    }
  }
  SECTION("empty sample is an error") {
    REQUIRE_THROWS_AS(ks_statistic(single_gaussian(0, 1), std::vector<double>{}),
                      std::invalid_argument);
  }
}

TEST_CASE("ks_statistic on samples from the model itself stays under the DKW band") {
  // 1e5 draws from the model via inverse transform; at 99% confidence the
  // DKW inequality bounds the empirical gap by sqrt(ln(2/0.01)/(2n)) < 0.0052.
  GaussianMixture gm;
  gm.components = {{0.6, 10.0, 0.8}, {0.4, 6.0, 1.4}};
  MarginalModel model(gm, {});
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
  std::vector<double> samples(100000);
  for (auto& v : samples) v = model.quantile(u(rng));
  REQUIRE(ks_statistic(model, samples) < 0.006);
}

TEST_CASE("ks_statistic is invariant under simultaneous affine maps") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> d(5.0, 2.0);
  std::vector<double> s(300);
  for (auto& v : s) v = d(rng);
  const auto model = single_gaussian(4.5, 1.8);
  const double base = ks_statistic(model, s);

  for (auto [a, b] : {std::pair{2.0, 3.0}, std::pair{0.25, -7.0}}) {
    std::vector<double> mapped(s);
    for (auto& v : mapped) v = a * v + b;
    const auto mapped_model = single_gaussian(a * 4.5 + b, a * 1.8);
    REQUIRE_THAT(ks_statistic(mapped_model, mapped), WithinAbs(base, 1e-12));
  }
}

TEST_CASE("ks_critical_value reproduces the published approximations") {
  // n = 3080 and n = 2968 at 99% confidence -> 0.0294 and 0.0299
  REQUIRE_THAT(ks_critical_value(3080, 0.01), WithinAbs(0.0294, 0.0002));
  REQUIRE_THAT(ks_critical_value(2968, 0.01), WithinAbs(0.0299, 0.0002));

  SECTION("1/sqrt(n) scaling: quadrupling n halves the critical value") {
    const double c1 = ks_critical_value(500, 0.05);
    const double c4 = ks_critical_value(2000, 0.05);
    REQUIRE_THAT(c4, WithinRel(0.5 * c1, 1e-12));
  }
  SECTION("standard asymptotic constants") {
    REQUIRE_THAT(ks_critical_value(100, 0.10) * 10.0, WithinAbs(1.2239, 5e-4));
    REQUIRE_THAT(ks_critical_value(100, 0.05) * 10.0, WithinAbs(1.3581, 5e-4));
    REQUIRE_THAT(ks_critical_value(100, 0.01) * 10.0, WithinAbs(1.6276, 5e-4));
  }
  SECTION("small n and bad alpha are rejected") {
    REQUIRE_THROWS_AS(ks_critical_value(34, 0.01), std::invalid_argument);
    REQUIRE_THROWS_AS(ks_critical_value(100, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ks_critical_value(100, 1.0), std::invalid_argument);
  }
}

TEST_CASE("aic closed forms and monotonicity") {
  REQUIRE(aic(0.0, 2) == 4.0);
  REQUIRE(aic(-10.0, 0) == 20.0);
  // increasing in P at fixed likelihood, decreasing in likelihood at fixed P
  REQUIRE(aic(-5.0, 3) > aic(-5.0, 2));
  REQUIRE(aic(-4.0, 2) < aic(-5.0, 2));
  REQUIRE_THROWS_AS(aic(std::nan(""), 2), std::invalid_argument);
}

TEST_CASE("mixture beats Gumbel by AIC on bimodal data") {
  std::mt19937_64 rng(24);
  std::bernoulli_distribution pick(0.6);
  std::normal_distribution<double> a(11.0, 0.6), b(5.0, 1.0);
  std::vector<double> samples(3000);
  for (auto& v : samples) v = pick(rng) ? a(rng) : b(rng);

  const auto gm = fit_marginal(samples, Family::Gm, {});
  const auto gum = fit_marginal(samples, Family::Gumbel, {});
  const double aic_gm = aic(gm.diagnostics().log_likelihood, gm.diagnostics().n_params);
  const double aic_gum = aic(gum.diagnostics().log_likelihood, gum.diagnostics().n_params);
  REQUIRE(aic_gm < aic_gum);
}

TEST_CASE("compare_marginals on a heavy-lower-tail synthetic pipe") {
  SyntheticSpec spec;
  spec.geometry = PipeGeometry::from_grid(12, 40);
  spec.nominal_thickness_mm = 12.0;
  spec.patch_count = 30;
  spec.patch_depth_range_mm = {4.0, 9.0};
  spec.patch_radius_range_mm = {50.0, 120.0};
  spec.smooth_noise_sd_mm = 0.25;
  spec.correlation_length_mm = {150.0, 200.0};
  spec.rng_seed = 1;
  const auto grid = generate_synthetic(spec);
  const auto values = grid.observed_values();

  GofConfig cfg;
  cfg.em.rng_seed = 1;
  const auto report = compare_marginals(values, cfg);

  const auto& gm = report.entry(Family::Gm);
  const auto& gum = report.entry(Family::Gumbel);
  const auto& wei = report.entry(Family::Weibull);
  REQUIRE(gm.error.empty());
  REQUIRE(gum.error.empty());
  REQUIRE(wei.error.empty());

  REQUIRE(gm.ks->statistic < gum.ks->statistic);
  REQUIRE(gm.ks->statistic < wei.ks->statistic);
  REQUIRE(*gm.aic < *gum.aic);
  REQUIRE(*gm.aic < *wei.aic);
  REQUIRE(report.selected_family == Family::Gm);

  // reject flag is consistent with the comparison it reports
  for (const auto* slot : {&gm, &gum, &wei})
    REQUIRE(slot->ks->reject == (slot->ks->statistic > slot->ks->critical_value));
}

TEST_CASE("a true Gumbel sample is not rejected for the Gumbel fit") {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(1e-15, 1.0 - 1e-15);
  std::vector<double> samples(100000);
  for (auto& v : samples) v = 8.0 - 1.5 * std::log(-std::log(u(rng)));

  GofConfig cfg;
  cfg.max_gm_components = 2;  // keep runtime modest; only the Gumbel verdict matters
  cfg.em.restarts = 2;
  const auto report = compare_marginals(samples, cfg);
  REQUIRE(report.entry(Family::Gumbel).error.empty());
  REQUIRE_FALSE(report.entry(Family::Gumbel).ks->reject);
}

TEST_CASE("per-family fit failures are recorded, not fatal") {
  // constant data: the EV fitters throw, the mixture clamps at the sd floor
  std::vector<double> constant(100, 5.0);
  const auto report = compare_marginals(constant, {});
  REQUIRE(report.entry(Family::Gm).error.empty());
  REQUIRE_FALSE(report.entry(Family::Gumbel).error.empty());
  REQUIRE_FALSE(report.entry(Family::Weibull).error.empty());
  REQUIRE(report.selected_family == Family::Gm);
}

TEST_CASE("GofReport serialization and table") {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> d(9.0, 1.2);
  std::vector<double> samples(500);
  for (auto& v : samples) v = d(rng);

  const auto report = compare_marginals(samples, {});
  const auto j = report.to_json();
  REQUIRE(j.at("selected_family").is_string());
  for (const char* fam : {"gm", "gumbel", "weibull"}) {
    REQUIRE(j.at("families").contains(fam));
    const auto& f = j.at("families").at(fam);
    REQUIRE(f.contains("ks"));
    REQUIRE(f.at("ks").at("statistic").get<double>() >= 0.0);
  }
  const auto table = report.table();
  REQUIRE(table.find("Gumbel") != std::string::npos);
  REQUIRE(table.find("Gaussian mixture") != std::string::npos);
  REQUIRE(table.find("AIC") != std::string::npos);
  REQUIRE(table.find("selected:") != std::string::npos);
}
