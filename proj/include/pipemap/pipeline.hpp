#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipemap/gof.hpp"
#include "pipemap/gp.hpp"
#include "pipemap/grid.hpp"
#include "pipemap/marginals.hpp"
#include "pipemap/normal.hpp"

// End-to-end orchestration: fit a marginal on the scanned readings,
// Gaussianize, train the GP, predict the blanks, back-transform through
// the inverse CDF, and score against ground truth.

namespace pipemap {

inline constexpr double kCdfClampEps = 1e-12;

// Copula-style transform pair induced by a fitted marginal:
// forward(t) = probit(F(t)), inverse(z) = quantile(Phi(z)).
class TransformPair {
 public:
  explicit TransformPair(MarginalModel marginal) : marginal_(std::move(marginal)) {}

  double forward(double t) const {
    const double u = std::clamp(marginal_.cdf(t), kCdfClampEps, 1.0 - kCdfClampEps);
    return norm_ppf(u);
  }

  double inverse(double z) const {
    const double u = std::clamp(norm_cdf(z), kCdfClampEps, 1.0 - kCdfClampEps);
    return marginal_.quantile(u);
  }

  const MarginalModel& marginal() const { return marginal_; }

 private:
  MarginalModel marginal_;
};

inline std::vector<double> gaussianize(const MarginalModel& marginal,
                                       std::span<const double> samples) {
  TransformPair tp(marginal);
  std::vector<double> z;
  z.reserve(samples.size());
  for (double t : samples) z.push_back(tp.forward(t));
  return z;
}

inline std::vector<double> degaussianize(const MarginalModel& marginal,
                                         std::span<const double> z_values) {
  TransformPair tp(marginal);
  std::vector<double> t;
  t.reserve(z_values.size());
  for (double z : z_values) t.push_back(tp.inverse(z));
  return t;
}

// Thickness-domain credible interval obtained by quantile-mapping the
// endpoints of the Gaussian-domain interval. Extension beyond the
// mean-only back-transform; the Gaussian-domain variance itself is not
// translated.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval credible_interval(const MarginalModel& marginal, double z_mean,
                                  double z_variance, double level = 0.95) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("credible_interval: level must lie in (0, 1)");
  const double q = norm_ppf(0.5 + 0.5 * level);
  const double sd = std::sqrt(std::max(0.0, z_variance));
  TransformPair tp(marginal);
  return {tp.inverse(z_mean - q * sd), tp.inverse(z_mean + q * sd)};
}

struct PipelineConfig {
  Family family = Family::Gm;
  int max_gm_components = 8;
  EmConfig em{};
  GpFitConfig gp{};
  std::uint64_t rng_seed = 0;
};

struct PredictionResult {
  PipeGrid predicted;
  MarginalModel marginal;
  GpModel gp;
};

namespace detail {

inline bool constant_sample(std::span<const double> values) {
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return (*mx - *mn) <= 1e-9 * (1.0 + std::abs(*mx));
}

// Point-like marginal used when every scanned reading is identical; the
// MLE fitters reject such samples, but prediction is still well posed
// (quantile(cdf(c)) = c for any marginal centred on c).
inline MarginalModel constant_marginal(Family family, double c, int sample_size) {
  FitDiagnostics diag;
  diag.sample_size = sample_size;
  switch (family) {
    case Family::Gm: {
      GaussianMixture gm;
      gm.components = {{1.0, c, kDefaultSdFloorMm}};
      diag.n_params = 2;
      for (int i = 0; i < sample_size; ++i) diag.log_likelihood += gm.log_pdf(c);
      return MarginalModel(std::move(gm), diag);
    }
    case Family::Gumbel: {
      GumbelDist g;
      g.location = c;
      g.scale = kDefaultSdFloorMm;
      diag.n_params = 2;
      for (int i = 0; i < sample_size; ++i) diag.log_likelihood += g.log_pdf(c);
      return MarginalModel(g, diag);
    }
    case Family::Weibull: {
      if (!(c > 0.0))
        throw std::invalid_argument("constant Weibull fallback requires positive data");
      WeibullDist w;
      w.shape = 200.0;
      w.scale = c / std::pow(std::numbers::ln2, 1.0 / w.shape);  // median at c
      diag.n_params = 2;
      for (int i = 0; i < sample_size; ++i) diag.log_likelihood += w.log_pdf(c);
      return MarginalModel(w, diag);
    }
  }
  throw std::logic_error("constant_marginal: bad family");
}

}  // namespace detail

// Fits the chosen marginal on the observed cells, Gaussianizes, trains a
// GP on the observed cell centroids and fills every unobserved cell with
// the back-transformed posterior mean. Observed cells pass through
// unchanged.
inline PredictionResult predict_unscanned(const PipeGrid& partial,
                                          const PipelineConfig& cfg = {}) {
  const auto cells = partial.observed_cells();
  if (cells.size() < 4)
    throw std::invalid_argument("predict_unscanned: need at least 4 observed cells");
  std::vector<double> values;
  values.reserve(cells.size());
  std::set<int> rows;
  for (const auto& [r, c] : cells) {
    values.push_back(partial.at(r, c));
    rows.insert(r);
  }

  const bool degenerate = detail::constant_sample(values);
  if (rows.size() < 2 && !degenerate)
    throw std::invalid_argument(
        "predict_unscanned: observations span fewer than 2 distinct rows");

  MarginalModel marginal = [&] {
    if (degenerate)
      return detail::constant_marginal(cfg.family, values.front(),
                                       static_cast<int>(values.size()));
    MarginalFitConfig fc;
    fc.max_gm_components = cfg.max_gm_components;
    fc.em = cfg.em;
    fc.em.rng_seed = mix_seed(cfg.rng_seed, 1);
    return fit_marginal(values, cfg.family, fc);
  }();

  const std::vector<double> z = gaussianize(marginal, values);

  std::vector<Location2> locations;
  locations.reserve(cells.size());
  const auto& geom = partial.geometry();
  for (const auto& [r, c] : cells) {
    const auto [x, y] = geom.cell_center(r, c);
    locations.push_back({x, y});
  }

  GpFitConfig gp_cfg = cfg.gp;
  gp_cfg.rng_seed = mix_seed(cfg.rng_seed, 2);
  GpModel gp = GpModel::train(locations, z, WarpConfig::for_geometry(geom), gp_cfg);

  std::vector<Location2> queries;
  std::vector<std::pair<int, int>> blanks;
  for (int r = 0; r < partial.rows(); ++r)
    for (int c = 0; c < partial.cols(); ++c)
      if (!partial.is_observed(r, c)) {
        const auto [x, y] = geom.cell_center(r, c);
        queries.push_back({x, y});
        blanks.emplace_back(r, c);
      }

  PipeGrid predicted = partial;
  if (!queries.empty()) {
    TransformPair tp(marginal);
    const auto preds = gp.predict(queries);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double t = std::max(0.0, tp.inverse(preds[i].mean));
      predicted.set(blanks[i].first, blanks[i].second, t);
    }
  }
  return {std::move(predicted), std::move(marginal), std::move(gp)};
}

// --- Shifted single-run experiment -------------------------------------------

struct ExperimentSpec {
  PipeGrid truth;
  std::vector<Family> families{Family::Gm, Family::Gumbel, Family::Weibull};
  std::vector<int> scan_shifts{0, 1, 2};
  int sensor_lines = 6;
  PipelineConfig pipeline{};
  std::uint64_t rng_seed = 0;
};

struct EvalEntry {
  int shift = 0;
  Family family = Family::Gm;
  double rmse_mm = std::numeric_limits<double>::quiet_NaN();
  int marginal_n_params = 0;
  double marginal_log_likelihood = 0.0;
  Hyperparams gp_hyper{};
  std::string error;  // empty on success
};

struct EvalReport {
  std::vector<EvalEntry> entries;

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : entries) {
      nlohmann::json j{{"shift", e.shift}, {"family", family_name(e.family)}};
      if (e.error.empty()) {
        j["rmse_mm"] = e.rmse_mm;
        j["marginal"] = {{"n_params", e.marginal_n_params},
                         {"log_likelihood", e.marginal_log_likelihood}};
        j["gp"] = {{"signal_sd", e.gp_hyper.signal_sd},
                   {"length_scales", {e.gp_hyper.length_scales[0], e.gp_hyper.length_scales[1]}},
                   {"noise_sd", e.gp_hyper.noise_sd}};
      } else {
        j["error"] = e.error;
      }
      out.push_back(std::move(j));
    }
    return {{"entries", out}};
  }

  // Flat `shift,family,rmse_mm` lines; failed entries are skipped.
  std::string to_csv() const {
    std::ostringstream os;
    os << "shift,family,rmse_mm\n";
    for (const auto& e : entries)
      if (e.error.empty())
        os << e.shift << ',' << family_name(e.family) << ',' << format_double(e.rmse_mm)
           << '\n';
    return os.str();
  }
};

// Runs every (shift x family) cell: scan the truth, predict the blanks,
// score RMSE over the unscanned cells. Failures are recorded per entry
// and do not abort the experiment.
inline EvalReport run_experiment(const ExperimentSpec& spec) {
  if (!spec.truth.fully_observed())
    throw std::invalid_argument("run_experiment: truth grid must be fully observed");
  EvalReport report;
  for (int shift : spec.scan_shifts) {
    const auto pattern =
        ScanPattern::evenly_spaced(spec.sensor_lines, spec.truth.rows(), shift);
    const PipeGrid scanned = apply_scan(spec.truth, pattern);
    const auto mask = unscanned_mask(scanned);
    for (Family family : spec.families) {
      EvalEntry entry;
      entry.shift = shift;
      entry.family = family;
      try {
        PipelineConfig cfg = spec.pipeline;
        cfg.family = family;
        cfg.rng_seed = mix_seed(spec.rng_seed, static_cast<std::uint64_t>(shift),
                                static_cast<std::uint64_t>(family));
        const PredictionResult res = predict_unscanned(scanned, cfg);
        entry.rmse_mm = rmse(res.predicted, spec.truth, mask);
        entry.marginal_n_params = res.marginal.diagnostics().n_params;
        entry.marginal_log_likelihood = res.marginal.diagnostics().log_likelihood;
        entry.gp_hyper = res.gp.hyper();
      } catch (const std::exception& e) {
        entry.error = e.what();
      }
      report.entries.push_back(std::move(entry));
    }
  }
  return report;
}

}  // namespace pipemap
