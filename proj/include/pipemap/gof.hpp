#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipemap/marginals.hpp"

// Goodness-of-fit machinery: K-S statistic against a fitted marginal,
// asymptotic critical values, AIC, and the three-way family comparison.
//
// Note: following the reference procedure, the K-S test is applied with
// parameters estimated from the same sample (a Lilliefors-type setting);
// the standard critical values are therefore conservative.

namespace pipemap {

// sup-distance between the fitted cdf and the empirical step cdf,
// evaluating both one-sided gaps at every jump.
inline double ks_statistic(const MarginalModel& model, std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  for (double t : sorted)
    if (!std::isfinite(t)) throw std::invalid_argument("ks_statistic: non-finite sample");
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = model.cdf(sorted[i]);
    const double hi = std::abs(f - static_cast<double>(i + 1) / n);
    const double lo = std::abs(f - static_cast<double>(i) / n);
    ks = std::max(ks, std::max(hi, lo));
  }
  return ks;
}

// Asymptotic Kolmogorov critical value c(alpha)/sqrt(n) with
// c(alpha) = sqrt(-ln(alpha/2)/2); c(0.01) = 1.6276.
inline double ks_critical_value(int n, double alpha) {
  if (n < 35)
    throw std::invalid_argument(
        "ks_critical_value: asymptotic formula requires n >= 35 (got n = " +
        std::to_string(n) + ")");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ks_critical_value: alpha must lie in (0, 1)");
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c / std::sqrt(static_cast<double>(n));
}

inline double aic(double log_likelihood, int n_params) {
  if (!std::isfinite(log_likelihood))
    throw std::invalid_argument("aic: log-likelihood must be finite");
  if (n_params < 0) throw std::invalid_argument("aic: negative parameter count");
  return 2.0 * n_params - 2.0 * log_likelihood;
}

struct KsResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double alpha = 0.0;
  int n = 0;
  bool reject = false;
};

inline KsResult ks_test(const MarginalModel& model, std::span<const double> samples,
                        double alpha) {
  KsResult r;
  r.statistic = ks_statistic(model, samples);
  r.n = static_cast<int>(samples.size());
  r.alpha = alpha;
  r.critical_value = ks_critical_value(r.n, alpha);
  r.reject = r.statistic > r.critical_value;
  return r;
}

struct GofConfig {
  double alpha = 0.01;
  int max_gm_components = 8;
  EmConfig em{};
};

struct FamilyGof {
  std::optional<MarginalModel> model;
  std::optional<KsResult> ks;
  std::optional<double> aic;
  std::string error;  // empty when the fit succeeded
};

struct GofReport {
  std::array<FamilyGof, 3> families;  // indexed by Family
  Family selected_family = Family::Gm;

  const FamilyGof& entry(Family f) const { return families[static_cast<int>(f)]; }

  nlohmann::json to_json() const;
  std::string table() const;
};

// Fits all three families, scores each with K-S and AIC, selects the
// AIC-minimal one. Individual fit failures are recorded, not fatal,
// unless every family fails.
inline GofReport compare_marginals(std::span<const double> samples,
                                   const GofConfig& cfg = {}) {
  if (samples.empty()) throw std::invalid_argument("compare_marginals: no samples");
  GofReport report;
  MarginalFitConfig fit_cfg;
  fit_cfg.max_gm_components = cfg.max_gm_components;
  fit_cfg.em = cfg.em;

  for (Family fam : {Family::Gm, Family::Gumbel, Family::Weibull}) {
    auto& slot = report.families[static_cast<int>(fam)];
    try {
      MarginalFitConfig fc = fit_cfg;
      fc.em.rng_seed = mix_seed(cfg.em.rng_seed, static_cast<std::uint64_t>(fam));
      MarginalModel model = fit_marginal(samples, fam, fc);
      slot.ks = ks_test(model, samples, cfg.alpha);
      slot.aic = aic(model.diagnostics().log_likelihood, model.diagnostics().n_params);
      slot.model = std::move(model);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }

  double best = std::numeric_limits<double>::infinity();
  bool have = false;
  for (Family fam : {Family::Gm, Family::Gumbel, Family::Weibull}) {
    const auto& slot = report.entry(fam);
    if (slot.aic && *slot.aic < best) {
      best = *slot.aic;
      report.selected_family = fam;
      have = true;
    }
  }
  if (!have) throw std::runtime_error("compare_marginals: every family fit failed");
  return report;
}

inline nlohmann::json GofReport::to_json() const {
  nlohmann::json fams;
  for (Family fam : {Family::Gm, Family::Gumbel, Family::Weibull}) {
    const auto& slot = entry(fam);
    nlohmann::json j;
    if (!slot.error.empty()) {
      j["error"] = slot.error;
    } else {
      j["ks"] = {{"statistic", slot.ks->statistic},
                 {"critical_value", slot.ks->critical_value},
                 {"alpha", slot.ks->alpha},
                 {"n", slot.ks->n},
                 {"reject", slot.ks->reject}};
      j["aic"] = *slot.aic;
      j["model"] = slot.model->to_json();
    }
    fams[family_name(fam)] = std::move(j);
  }
  return {{"families", fams}, {"selected_family", family_name(selected_family)}};
}

// Aligned text table: families as columns, K-S and AIC as rows.
inline std::string GofReport::table() const {
  const std::array<Family, 3> order{Family::Gumbel, Family::Weibull, Family::Gm};
  std::ostringstream os;
  os << std::left << std::setw(14) << "";
  os << std::setw(14) << "Gumbel" << std::setw(14) << "Weibull" << "Gaussian mixture\n";

  auto row = [&](const std::string& label, auto getter) {
    os << std::setw(14) << label;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto& slot = entry(order[i]);
      std::string cell = slot.error.empty() ? getter(slot) : std::string("fit failed");
      if (i + 1 < order.size())
        os << std::setw(14) << cell;
      else
        os << cell;
    }
    os << '\n';
  };

  auto fmt = [](double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
  };
  row("KS", [&](const FamilyGof& s) { return fmt(s.ks->statistic, 4); });
  row("KS critical", [&](const FamilyGof& s) { return fmt(s.ks->critical_value, 4); });
  row("rejected", [](const FamilyGof& s) { return std::string(s.ks->reject ? "yes" : "no"); });
  row("AIC", [&](const FamilyGof& s) { return fmt(*s.aic, 1); });
  os << "selected: " << family_name(selected_family) << '\n';
  return os.str();
}

}  // namespace pipemap
