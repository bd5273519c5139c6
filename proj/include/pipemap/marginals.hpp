#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pipemap/normal.hpp"
#include "pipemap/util.hpp"

// Candidate marginal distributions for raw thickness readings: Gaussian
// mixture, Gumbel and Weibull, each with pdf/cdf/quantile/log-likelihood,
// plus EM and MLE fitting.

namespace pipemap {

inline constexpr double kDefaultSdFloorMm = 1e-3;

enum class Family { Gm, Gumbel, Weibull };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::Gm: return "gm";
    case Family::Gumbel: return "gumbel";
    case Family::Weibull: return "weibull";
  }
  throw std::logic_error("family_name: bad enum");
}

inline Family family_from_name(const std::string& s) {
  if (s == "gm") return Family::Gm;
  if (s == "gumbel") return Family::Gumbel;
  if (s == "weibull") return Family::Weibull;
  throw std::invalid_argument("unknown marginal family '" + s + "'");
}

// --- Gaussian mixture ------------------------------------------------------

struct GmComponent {
  double weight = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

struct GaussianMixture {
  std::vector<GmComponent> components;

  int component_count() const { return static_cast<int>(components.size()); }

  // Canonical form: components ordered by ascending mean.
  void canonicalize() {
    std::sort(components.begin(), components.end(),
              [](const GmComponent& a, const GmComponent& b) { return a.mean < b.mean; });
  }

  void validate(double sd_floor = kDefaultSdFloorMm) const {
    if (components.empty())
      throw std::invalid_argument("GaussianMixture: no components");
    double wsum = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0 && c.weight <= 1.0))
        throw std::invalid_argument("GaussianMixture: weights must lie in (0, 1]");
      if (!(c.sd >= sd_floor))
        throw std::invalid_argument("GaussianMixture: component sd below floor");
      if (!std::isfinite(c.mean))
        throw std::invalid_argument("GaussianMixture: non-finite mean");
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
      throw std::invalid_argument("GaussianMixture: weights must sum to 1");
    for (std::size_t i = 1; i < components.size(); ++i)
      if (components[i - 1].mean > components[i].mean)
        throw std::invalid_argument("GaussianMixture: components not sorted by mean");
  }

  double pdf(double t) const {
    double p = 0.0;
    for (const auto& c : components) {
      const double z = (t - c.mean) / c.sd;
      p += c.weight * norm_pdf(z) / c.sd;
    }
    return p;
  }

  // log pdf via log-sum-exp over components.
  double log_pdf(double t) const {
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> lp(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
      const auto& c = components[i];
      const double z = (t - c.mean) / c.sd;
      lp[i] = std::log(c.weight) - std::log(c.sd) + norm_log_pdf(z);
      m = std::max(m, lp[i]);
    }
    if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - m);
    return m + std::log(acc);
  }

  double cdf(double t) const {
    double p = 0.0;
    for (const auto& c : components) p += c.weight * norm_cdf((t - c.mean) / c.sd);
    return std::min(1.0, std::max(0.0, p));
  }

  // Monotone-cdf inversion: bracketing bisection with Newton polish.
  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
      throw std::domain_error("GaussianMixture::quantile: u must lie in (0, 1)");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : components) {
      lo = std::min(lo, c.mean - 9.0 * c.sd);
      hi = std::max(hi, c.mean + 9.0 * c.sd);
    }
    while (cdf(lo) > u) lo -= (hi - lo);
    while (cdf(hi) < u) hi += (hi - lo);

    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
      const double f = cdf(x) - u;
      if (f > 0.0) hi = x; else lo = x;
      if (std::abs(f) <= 5e-15) break;
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
        break;
      const double p = pdf(x);
      double next = (p > 0.0) ? x - f / p : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      x = next;
    }
    return x;
  }
};

// --- Gumbel ----------------------------------------------------------------

struct GumbelDist {
  enum class Orientation { Max, Min };

  double location = 0.0;
  double scale = 1.0;
  Orientation orientation = Orientation::Max;

  void validate() const {
    if (!(scale > 0.0)) throw std::invalid_argument("GumbelDist: scale must be positive");
    if (!std::isfinite(location)) throw std::invalid_argument("GumbelDist: bad location");
  }

  double log_pdf(double t) const {
    const double z = (orientation == Orientation::Max) ? (t - location) / scale
                                                       : (location - t) / scale;
    return -std::log(scale) - z - std::exp(-z);
  }

  double pdf(double t) const { return std::exp(log_pdf(t)); }

  double cdf(double t) const {
    if (orientation == Orientation::Max)
      return std::exp(-std::exp(-(t - location) / scale));
    return 1.0 - std::exp(-std::exp((t - location) / scale));
  }

  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
      throw std::domain_error("GumbelDist::quantile: u must lie in (0, 1)");
    if (orientation == Orientation::Max)
      return location - scale * std::log(-std::log(u));
    return location + scale * std::log(-std::log1p(-u));
  }
};

// --- Weibull ----------------------------------------------------------------

struct WeibullDist {
  double scale = 1.0;
  double shape = 1.0;

  void validate() const {
    if (!(scale > 0.0 && shape > 0.0))
      throw std::invalid_argument("WeibullDist: scale and shape must be positive");
  }

  double log_pdf(double t) const {
    if (t <= 0.0) return -std::numeric_limits<double>::infinity();
    const double r = t / scale;
    return std::log(shape / scale) + (shape - 1.0) * std::log(r) - std::pow(r, shape);
  }

  double pdf(double t) const {
    if (t <= 0.0) return 0.0;
    return std::exp(log_pdf(t));
  }

  double cdf(double t) const {
    if (t <= 0.0) return 0.0;
    return -std::expm1(-std::pow(t / scale, shape));
  }

  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
      throw std::domain_error("WeibullDist::quantile: u must lie in (0, 1)");
    return scale * std::pow(-std::log1p(-u), 1.0 / shape);
  }
};

// --- Tagged union ------------------------------------------------------------

struct FitDiagnostics {
  double log_likelihood = 0.0;
  int n_params = 0;  // 3N-1 for a mixture, 2 for Gumbel/Weibull
  int sample_size = 0;
};

class MarginalModel {
 public:
  MarginalModel(GaussianMixture gm, FitDiagnostics diag)
      : dist_(std::move(gm)), diag_(diag) {}
  MarginalModel(GumbelDist g, FitDiagnostics diag) : dist_(g), diag_(diag) {}
  MarginalModel(WeibullDist w, FitDiagnostics diag) : dist_(w), diag_(diag) {}

  Family family() const {
    if (std::holds_alternative<GaussianMixture>(dist_)) return Family::Gm;
    if (std::holds_alternative<GumbelDist>(dist_)) return Family::Gumbel;
    return Family::Weibull;
  }

  const FitDiagnostics& diagnostics() const { return diag_; }
  const GaussianMixture& gm() const { return std::get<GaussianMixture>(dist_); }
  const GumbelDist& gumbel() const { return std::get<GumbelDist>(dist_); }
  const WeibullDist& weibull() const { return std::get<WeibullDist>(dist_); }

  double pdf(double t) const {
    return std::visit([&](const auto& d) { return d.pdf(t); }, dist_);
  }
  double log_pdf(double t) const {
    return std::visit([&](const auto& d) { return d.log_pdf(t); }, dist_);
  }
  double cdf(double t) const {
    return std::visit([&](const auto& d) { return d.cdf(t); }, dist_);
  }
  double quantile(double u) const {
    return std::visit([&](const auto& d) { return d.quantile(u); }, dist_);
  }

  nlohmann::json to_json() const;
  static MarginalModel from_json(const nlohmann::json& j);

 private:
  std::variant<GaussianMixture, GumbelDist, WeibullDist> dist_;
  FitDiagnostics diag_;
};

// Sum of log densities. Weibull rejects samples outside its support.
inline double log_likelihood(const MarginalModel& model, std::span<const double> samples) {
  if (model.family() == Family::Weibull)
    for (double t : samples)
      if (t <= 0.0)
        throw std::domain_error("log_likelihood: Weibull sample outside support (t <= 0)");
  double ll = 0.0;
  for (double t : samples) ll += model.log_pdf(t);
  return ll;
}

// --- EM fitting ---------------------------------------------------------------

struct EmConfig {
  int max_iter = 500;
  double tol = 1e-8;  // relative log-likelihood gain
  int restarts = 8;
  std::uint64_t rng_seed = 0;
  double sd_floor = kDefaultSdFloorMm;
};

struct GmFitResult {
  GaussianMixture mixture;
  double log_likelihood = 0.0;
  std::vector<double> ll_history;  // winning restart, one entry per EM iteration
};

namespace detail {

struct DegenerateComponent {};

inline double gm_sample_log_likelihood(const GaussianMixture& gm,
                                       std::span<const double> samples) {
  double ll = 0.0;
  for (double t : samples) ll += gm.log_pdf(t);
  return ll;
}

// Initial means: sorted-sample quantiles (restart 0) or k-means++ draws.
inline std::vector<double> init_means(std::span<const double> samples, int n_components,
                                      int restart, std::mt19937_64& rng) {
  const std::size_t n = samples.size();
  std::vector<double> means(n_components);
  if (restart == 0) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < n_components; ++k) {
      const double q = (k + 0.5) / n_components;
      means[k] = sorted[static_cast<std::size_t>(q * (n - 1) + 0.5)];
    }
    return means;
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  means[0] = samples[pick(rng)];
  std::vector<double> d2(n);
  for (int k = 1; k < n_components; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = samples[i] - means[j];
        best = std::min(best, d * d);
      }
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      means[k] = samples[pick(rng)];
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0.0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) { chosen = i; break; }
    }
    means[k] = samples[chosen];
  }
  return means;
}

// One EM run from one initialization. Throws DegenerateComponent when a
// component collapses (sd under the floor with vanishing weight).
inline GmFitResult em_single_run(std::span<const double> samples, int n_components,
                                 const EmConfig& cfg, int restart, std::mt19937_64& rng) {
  const std::size_t n = samples.size();

  double mean0 = 0.0;
  for (double t : samples) mean0 += t;
  mean0 /= static_cast<double>(n);
  double var0 = 0.0;
  for (double t : samples) var0 += (t - mean0) * (t - mean0);
  var0 /= static_cast<double>(n);
  const double sd0 = std::max(std::sqrt(var0), cfg.sd_floor);

  GaussianMixture gm;
  gm.components.resize(n_components);
  const auto means = init_means(samples, n_components, restart, rng);
  for (int k = 0; k < n_components; ++k)
    gm.components[k] = {1.0 / n_components, means[k], sd0};

  std::vector<double> resp(n * static_cast<std::size_t>(n_components));
  std::vector<double> lp(n_components);
  GmFitResult result;
  double ll_prev = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // E-step: responsibilities by log-sum-exp; accumulates the data
    // log-likelihood at the current parameters.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < n_components; ++k) {
        const auto& c = gm.components[k];
        const double z = (samples[i] - c.mean) / c.sd;
        lp[k] = std::log(c.weight) - std::log(c.sd) + norm_log_pdf(z);
        m = std::max(m, lp[k]);
      }
      double denom = 0.0;
      for (int k = 0; k < n_components; ++k) denom += std::exp(lp[k] - m);
      ll += m + std::log(denom);
      for (int k = 0; k < n_components; ++k)
        resp[i * n_components + k] = std::exp(lp[k] - m) / denom;
    }

    result.ll_history.push_back(ll);
    if (ll < ll_prev - 1e-7 * (std::abs(ll_prev) + 1.0))
      throw std::logic_error("fit_gm_em: log-likelihood decreased during EM");
    if (iter > 0 && ll - ll_prev < cfg.tol * (std::abs(ll) + 1.0)) break;
    ll_prev = ll;

    // M-step
    for (int k = 0; k < n_components; ++k) {
      double wsum = 0.0, xsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        wsum += resp[i * n_components + k];
        xsum += resp[i * n_components + k] * samples[i];
      }
      const double w = wsum / static_cast<double>(n);
      const double mu = xsum / wsum;
      double vsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = samples[i] - mu;
        vsum += resp[i * n_components + k] * d * d;
      }
      const double sd_hat = std::sqrt(vsum / wsum);
      if (sd_hat < cfg.sd_floor && w < 1e-6) throw DegenerateComponent{};
      gm.components[k].weight = w;
      gm.components[k].mean = mu;
      gm.components[k].sd = std::max(sd_hat, cfg.sd_floor);
    }
    // renormalize against accumulated rounding
    double wtot = 0.0;
    for (const auto& c : gm.components) wtot += c.weight;
    for (auto& c : gm.components) c.weight /= wtot;
  }

  gm.canonicalize();
  result.mixture = std::move(gm);
  result.log_likelihood = gm_sample_log_likelihood(result.mixture, samples);
  return result;
}

}  // namespace detail

// EM with restarts; deterministic given cfg.rng_seed. A collapsing
// component triggers a refit of that restart with one component fewer.
inline GmFitResult fit_gm_em(std::span<const double> samples, int n_components,
                             const EmConfig& cfg = {}) {
  if (n_components < 1)
    throw std::invalid_argument("fit_gm_em: need at least one component");
  if (samples.size() < static_cast<std::size_t>(3 * n_components))
    throw std::invalid_argument("fit_gm_em: need at least 3 samples per component");
  for (double t : samples)
    if (!std::isfinite(t)) throw std::invalid_argument("fit_gm_em: non-finite sample");

  GmFitResult best;
  bool have_best = false;
  const int restarts = std::max(1, cfg.restarts);
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(r)));
    int nc = n_components;
    while (true) {
      try {
        GmFitResult run = detail::em_single_run(samples, nc, cfg, r, rng);
        if (!have_best || run.log_likelihood > best.log_likelihood) {
          best = std::move(run);
          have_best = true;
        }
        break;
      } catch (const detail::DegenerateComponent&) {
        if (--nc < 1) throw std::runtime_error("fit_gm_em: all components degenerate");
      }
    }
  }
  best.mixture.validate(cfg.sd_floor);
  return best;
}

inline double aic_value(double log_likelihood, int n_params) {
  return 2.0 * n_params - 2.0 * log_likelihood;
}

inline int gm_param_count(const GaussianMixture& gm) {
  return 3 * gm.component_count() - 1;
}

// Fits N = 1..max_components (capped by the 3-samples-per-component rule)
// and returns the AIC-minimal fit; ties break toward fewer components.
inline GmFitResult select_gm_by_aic(std::span<const double> samples, int max_components,
                                    const EmConfig& cfg = {}) {
  if (max_components < 1)
    throw std::invalid_argument("select_gm_by_aic: max_components must be >= 1");
  GmFitResult best;
  double best_aic = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (int nc = 1; nc <= max_components; ++nc) {
    if (samples.size() < static_cast<std::size_t>(3 * nc)) break;
    EmConfig sub = cfg;
    sub.rng_seed = mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(nc));
    GmFitResult fit = fit_gm_em(samples, nc, sub);
    const double a = aic_value(fit.log_likelihood, gm_param_count(fit.mixture));
    if (!have_best || a < best_aic) {
      best = std::move(fit);
      best_aic = a;
      have_best = true;
    }
  }
  if (!have_best)
    throw std::invalid_argument("select_gm_by_aic: too few samples");
  return best;
}

// --- Extreme-value MLE ---------------------------------------------------------

namespace detail {

// Safeguarded Newton on a monotone increasing score function with a
// sign-changing bracket. Returns the root.
template <typename F, typename DF>
double newton_monotone(double x0, F f, DF df, double lo_init, double hi_init,
                       double f_tol, const char* what) {
  double lo = lo_init, hi = hi_init;
  double flo = f(lo);
  int guard = 0;
  while (flo > 0.0) {
    hi = lo;
    lo *= 0.5;
    flo = f(lo);
    if (++guard > 200) throw std::runtime_error(std::string(what) + ": bracketing failed");
  }
  double fhi = f(hi);
  guard = 0;
  while (fhi < 0.0) {
    lo = hi;
    hi *= 2.0;
    fhi = f(hi);
    if (++guard > 200) throw std::runtime_error(std::string(what) + ": bracketing failed");
  }

  double x = std::min(std::max(x0, lo), hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double fx = f(x);
    if (std::abs(fx) < f_tol) return x;
    if (fx > 0.0) hi = x; else lo = x;
    const double d = df(x);
    double next = (d > 0.0) ? x - fx / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15 * std::max(1.0, std::abs(x))) return 0.5 * (lo + hi);
    x = next;
  }
  throw std::runtime_error(std::string(what) + ": no convergence after 200 iterations");
}

inline void check_mle_input(std::span<const double> samples, const char* what) {
  if (samples.empty()) throw std::invalid_argument(std::string(what) + ": no samples");
  for (double t : samples)
    if (!std::isfinite(t)) throw std::invalid_argument(std::string(what) + ": non-finite sample");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mx - *mn < 1e-12 * (1.0 + std::abs(*mx)))
    throw std::runtime_error(std::string(what) + ": degenerate sample (scale -> 0)");
}

}  // namespace detail

// Maximum-likelihood Gumbel fit via the profile score for the scale.
inline GumbelDist fit_gumbel_mle(
    std::span<const double> samples,
    GumbelDist::Orientation orientation = GumbelDist::Orientation::Max) {
  detail::check_mle_input(samples, "fit_gumbel_mle");
  std::vector<double> t(samples.begin(), samples.end());
  if (orientation == GumbelDist::Orientation::Min)
    for (auto& v : t) v = -v;

  const std::size_t n = t.size();
  const double t_min = *std::min_element(t.begin(), t.end());
  double mean = 0.0;
  for (double v : t) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);

  // weighted stats with weights exp(-(t - t_min)/beta); the shift cancels
  auto weighted = [&](double beta) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double v : t) {
      const double w = std::exp(-(v - t_min) / beta);
      s0 += w;
      s1 += w * v;
      s2 += w * v * v;
    }
    return std::array<double, 3>{s0, s1, s2};
  };
  auto score = [&](double beta) {
    const auto s = weighted(beta);
    return beta - mean + s[1] / s[0];
  };
  auto dscore = [&](double beta) {
    const auto s = weighted(beta);
    const double m1 = s[1] / s[0];
    const double w_var = s[2] / s[0] - m1 * m1;
    return 1.0 + w_var / (beta * beta);
  };

  const double beta0 = std::sqrt(6.0 * var) / std::numbers::pi;
  const double beta =
      detail::newton_monotone(beta0, score, dscore, 0.5 * beta0, 2.0 * beta0,
                              1e-12 * (1.0 + std::abs(mean)), "fit_gumbel_mle");
  const double s0 = weighted(beta)[0];
  double loc = t_min + beta * (std::log(static_cast<double>(n)) - std::log(s0));

  GumbelDist g;
  g.scale = beta;
  g.orientation = orientation;
  g.location = (orientation == GumbelDist::Orientation::Max) ? loc : -loc;
  g.validate();
  return g;
}

// Maximum-likelihood Weibull fit via the profile score for the shape.
inline WeibullDist fit_weibull_mle(std::span<const double> samples) {
  detail::check_mle_input(samples, "fit_weibull_mle");
  for (double v : samples)
    if (v <= 0.0)
      throw std::invalid_argument("fit_weibull_mle: samples must be positive");

  const std::size_t n = samples.size();
  const double t_max = *std::max_element(samples.begin(), samples.end());
  std::vector<double> log_s(n);
  double mean_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    log_s[i] = std::log(samples[i] / t_max);  // <= 0
    mean_log += log_s[i];
  }
  mean_log /= static_cast<double>(n);

  auto weighted = [&](double k) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double ls : log_s) {
      const double w = std::exp(k * ls);  // (t/t_max)^k in (0, 1]
      s0 += w;
      s1 += w * ls;
      s2 += w * ls * ls;
    }
    return std::array<double, 3>{s0, s1, s2};
  };
  auto score = [&](double k) {
    const auto s = weighted(k);
    return s[1] / s[0] - 1.0 / k - mean_log;
  };
  auto dscore = [&](double k) {
    const auto s = weighted(k);
    const double m1 = s[1] / s[0];
    return (s[2] / s[0] - m1 * m1) + 1.0 / (k * k);
  };

  double sd_log = 0.0;
  for (double ls : log_s) sd_log += (ls - mean_log) * (ls - mean_log);
  sd_log = std::sqrt(sd_log / static_cast<double>(n));
  const double k0 = std::numbers::pi / (std::sqrt(6.0) * sd_log);
  const double shape = detail::newton_monotone(k0, score, dscore, 0.5 * k0, 2.0 * k0,
                                               1e-12, "fit_weibull_mle");
  const double s0 = weighted(shape)[0];
  const double scale = t_max * std::pow(s0 / static_cast<double>(n), 1.0 / shape);

  WeibullDist w;
  w.scale = scale;
  w.shape = shape;
  w.validate();
  return w;
}

// --- Fit to a MarginalModel -----------------------------------------------------

struct MarginalFitConfig {
  int max_gm_components = 8;
  EmConfig em{};
};

inline MarginalModel fit_marginal(std::span<const double> samples, Family family,
                                  const MarginalFitConfig& cfg = {}) {
  FitDiagnostics diag;
  diag.sample_size = static_cast<int>(samples.size());
  switch (family) {
    case Family::Gm: {
      GmFitResult fit = select_gm_by_aic(samples, cfg.max_gm_components, cfg.em);
      diag.log_likelihood = fit.log_likelihood;
      diag.n_params = gm_param_count(fit.mixture);
      return MarginalModel(std::move(fit.mixture), diag);
    }
    case Family::Gumbel: {
      GumbelDist g = fit_gumbel_mle(samples);
      diag.n_params = 2;
      for (double t : samples) diag.log_likelihood += g.log_pdf(t);
      return MarginalModel(g, diag);
    }
    case Family::Weibull: {
      WeibullDist w = fit_weibull_mle(samples);
      diag.n_params = 2;
      for (double t : samples) diag.log_likelihood += w.log_pdf(t);
      return MarginalModel(w, diag);
    }
  }
  throw std::logic_error("fit_marginal: bad family");
}

// --- JSON ------------------------------------------------------------------------

inline nlohmann::json MarginalModel::to_json() const {
  nlohmann::json params;
  switch (family()) {
    case Family::Gm: {
      nlohmann::json comps = nlohmann::json::array();
      for (const auto& c : gm().components)
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"sd", c.sd}});
      params = {{"components", comps}};
      break;
    }
    case Family::Gumbel:
      params = {{"location", gumbel().location},
                {"scale", gumbel().scale},
                {"orientation",
                 gumbel().orientation == GumbelDist::Orientation::Max ? "max" : "min"}};
      break;
    case Family::Weibull:
      params = {{"scale", weibull().scale}, {"shape", weibull().shape}};
      break;
  }
  return {{"family", family_name(family())},
          {"params", params},
          {"diagnostics",
           {{"log_likelihood", diag_.log_likelihood},
            {"n_params", diag_.n_params},
            {"sample_size", diag_.sample_size}}}};
}

inline MarginalModel MarginalModel::from_json(const nlohmann::json& j) {
  FitDiagnostics diag;
  const auto& d = j.at("diagnostics");
  d.at("log_likelihood").get_to(diag.log_likelihood);
  d.at("n_params").get_to(diag.n_params);
  d.at("sample_size").get_to(diag.sample_size);

  const Family fam = family_from_name(j.at("family").get<std::string>());
  const auto& p = j.at("params");
  switch (fam) {
    case Family::Gm: {
      GaussianMixture gm;
      for (const auto& c : p.at("components"))
        gm.components.push_back({c.at("weight").get<double>(), c.at("mean").get<double>(),
                                 c.at("sd").get<double>()});
      gm.validate();
      return MarginalModel(std::move(gm), diag);
    }
    case Family::Gumbel: {
      GumbelDist g;
      p.at("location").get_to(g.location);
      p.at("scale").get_to(g.scale);
      g.orientation = p.value("orientation", std::string("max")) == "min"
                          ? GumbelDist::Orientation::Min
                          : GumbelDist::Orientation::Max;
      g.validate();
      return MarginalModel(g, diag);
    }
    case Family::Weibull: {
      WeibullDist w;
      p.at("scale").get_to(w.scale);
      p.at("shape").get_to(w.shape);
      w.validate();
      return MarginalModel(w, diag);
    }
  }
  throw std::logic_error("MarginalModel::from_json: bad family");
}

}  // namespace pipemap
