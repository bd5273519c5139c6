#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "pipemap/normal.hpp"
#include "pipemap/optim.hpp"
#include "pipemap/util.hpp"

// Gaussian-process regression over the pipe surface: periodic sin/cos
// embedding of cylinder coordinates, anisotropic Matern-3/2 covariance,
// marginal-likelihood hyperparameter fitting, exact posterior prediction.

namespace pipemap {

using Location2 = std::array<double, 2>;  // (circumferential mm, longitudinal mm)
using Warped4 = std::array<double, 4>;    // (sin, cos) pair per axis

// Periods of the embedding. The circumferential period is the physical
// circumference; the longitudinal period defaults to 4x the section length,
// which keeps the axis effectively aperiodic over the data.
struct WarpConfig {
  std::array<double, 2> periods_mm{1.0, 1.0};

  void validate() const {
    if (!(periods_mm[0] > 0.0 && periods_mm[1] > 0.0))
      throw std::invalid_argument("WarpConfig: periods must be positive");
  }

  template <typename Geometry>
  static WarpConfig for_geometry(const Geometry& g) {
    WarpConfig w;
    w.periods_mm = {std::numbers::pi * g.diameter_mm, 4.0 * g.length_mm};
    return w;
  }
};

// Embed a cylinder location into R^4. Coordinates are reduced mod the
// period first, so inputs differing by an exact multiple of the period
// produce bit-identical embeddings.
inline Warped4 warp_location(const Location2& loc, const WarpConfig& warp) {
  Warped4 p;
  for (int k = 0; k < 2; ++k) {
    const double period = warp.periods_mm[k];
    const double x = std::fmod(loc[k], period);
    const double angle = 2.0 * std::numbers::pi * x / period;
    p[2 * k] = std::sin(angle);
    p[2 * k + 1] = std::cos(angle);
  }
  return p;
}

struct Hyperparams {
  double signal_sd = 1.0;
  std::array<double, 2> length_scales{1.0, 1.0};  // per warped axis pair
  double noise_sd = 0.1;

  void validate() const {
    if (!(signal_sd > 0.0) || !(length_scales[0] > 0.0) || !(length_scales[1] > 0.0))
      throw std::invalid_argument("Hyperparams: signal sd and length scales must be positive");
    if (!(noise_sd >= 0.0))
      throw std::invalid_argument("Hyperparams: noise sd must be nonnegative");
  }
};

// Scaled distance: d^2 = sum_k |dp_k|^2 / eta_k^2 over the two sin/cos pairs.
inline double warped_distance(const Warped4& a, const Warped4& b, const Hyperparams& h) {
  double d2 = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double ds = a[2 * k] - b[2 * k];
    const double dc = a[2 * k + 1] - b[2 * k + 1];
    d2 += (ds * ds + dc * dc) / (h.length_scales[k] * h.length_scales[k]);
  }
  return std::sqrt(d2);
}

// Matern-3/2: sigma^2 (1 + sqrt(3) d) exp(-sqrt(3) d).
inline double kernel(const Warped4& a, const Warped4& b, const Hyperparams& h) {
  const double d = warped_distance(a, b, h);
  const double sq3d = std::numbers::sqrt3 * d;
  return h.signal_sd * h.signal_sd * (1.0 + sq3d) * std::exp(-sq3d);
}

namespace detail {

inline Eigen::MatrixXd kernel_matrix(std::span<const Warped4> pts, const Hyperparams& h) {
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = h.signal_sd * h.signal_sd;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = kernel(pts[i], pts[j], h);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

// Cholesky of K + noise^2 I, escalating a signal-scaled jitter
// geometrically until the factorization succeeds.
inline Eigen::MatrixXd factor_noisy_kernel(const Eigen::MatrixXd& K, const Hyperparams& h) {
  const double var = h.signal_sd * h.signal_sd;
  Eigen::MatrixXd A =
      K + h.noise_sd * h.noise_sd * Eigen::MatrixXd::Identity(K.rows(), K.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  double jitter = kJitterStart;
  while (llt.info() != Eigen::Success) {
    if (jitter > kJitterMax)
      throw std::runtime_error("gp: kernel matrix not positive definite after max jitter");
    llt.compute(A + jitter * var * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
    jitter *= 10.0;
  }
  return llt.matrixL();
}

}  // namespace detail

// Negative log marginal likelihood of the targets under the GP prior,
// 0.5 y' K^-1 y + 0.5 log|K| + n/2 log 2pi with K = Sigma + noise^2 I.
inline double gp_nll(const Hyperparams& hyper, std::span<const Warped4> pts,
                     std::span<const double> targets, double mean_const) {
  if (pts.empty() || pts.size() != targets.size())
    throw std::invalid_argument("gp_nll: need matching, nonempty points and targets");
  hyper.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = targets[i] - mean_const;

  const Eigen::MatrixXd K = detail::kernel_matrix(pts, hyper);
  const Eigen::MatrixXd L = detail::factor_noisy_kernel(K, hyper);
  const Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(y);
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(L(i, i));
  return 0.5 * v.squaredNorm() + log_det_half + 0.5 * n * kLog2Pi;
}

struct GpNllGrad {
  double value = 0.0;
  // gradient w.r.t. log(signal_sd), log(eta_1), log(eta_2), log(noise_sd)
  std::array<double, 4> grad_log{};
};

// Value and analytic gradient in log-parameter space:
// dNLL/dtheta = 0.5 tr((K^-1 - alpha alpha') dK/dtheta).
inline GpNllGrad gp_nll_with_grad(const Hyperparams& hyper, std::span<const Warped4> pts,
                                  std::span<const double> targets, double mean_const) {
  if (pts.empty() || pts.size() != targets.size())
    throw std::invalid_argument("gp_nll_with_grad: need matching, nonempty points and targets");
  hyper.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = targets[i] - mean_const;

  const Eigen::MatrixXd K = detail::kernel_matrix(pts, hyper);
  const Eigen::MatrixXd L = detail::factor_noisy_kernel(K, hyper);
  const auto lower = L.triangularView<Eigen::Lower>();

  const Eigen::VectorXd v = lower.solve(y);
  Eigen::VectorXd alpha = lower.transpose().solve(v);

  GpNllGrad out;
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(L(i, i));
  out.value = 0.5 * v.squaredNorm() + log_det_half + 0.5 * n * kLog2Pi;

  // W = K^-1 - alpha alpha'
  Eigen::MatrixXd Kinv = Eigen::MatrixXd::Identity(n, n);
  lower.solveInPlace(Kinv);
  lower.transpose().solveInPlace(Kinv);
  const Eigen::MatrixXd W = Kinv - alpha * alpha.transpose();

  const double sig2 = hyper.signal_sd * hyper.signal_sd;
  const double sq3 = std::numbers::sqrt3;
  double g_sig = 0.0, g_eta1 = 0.0, g_eta2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // diagonal: dK/dlog sigma = 2 sigma^2, dK/dlog eta = 0
    g_sig += 0.5 * W(i, i) * 2.0 * sig2;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = pts[static_cast<std::size_t>(i)];
      const auto& b = pts[static_cast<std::size_t>(j)];
      double a1 = 0.0, a2 = 0.0;
      {
        const double ds = a[0] - b[0], dc = a[1] - b[1];
        a1 = ds * ds + dc * dc;
      }
      {
        const double ds = a[2] - b[2], dc = a[3] - b[3];
        a2 = ds * ds + dc * dc;
      }
      const double e1 = hyper.length_scales[0], e2 = hyper.length_scales[1];
      const double d = std::sqrt(a1 / (e1 * e1) + a2 / (e2 * e2));
      const double expo = std::exp(-sq3 * d);
      const double w2 = 2.0 * W(i, j);  // symmetric pair
      g_sig += 0.5 * w2 * 2.0 * K(i, j);
      // dK/dlog eta_k = 3 sigma^2 exp(-sqrt3 d) a_k / eta_k^2
      g_eta1 += 0.5 * w2 * 3.0 * sig2 * expo * a1 / (e1 * e1);
      g_eta2 += 0.5 * w2 * 3.0 * sig2 * expo * a2 / (e2 * e2);
    }
  }
  const double g_noise = hyper.noise_sd * hyper.noise_sd * W.trace();

  out.grad_log = {g_sig, g_eta1, g_eta2, g_noise};
  return out;
}

struct GpFitConfig {
  int restarts = 4;
  int max_evals = 200;
  std::uint64_t rng_seed = 0;
  // Box constraints, applied in log-space. The length-scale floor keeps
  // correlations observable at the sensor pitch: warped axes live on unit
  // circles, so eta below ~0.03 means correlation dies inside a single
  // cell and the fit degenerates into per-point memorization.
  Hyperparams lower{1e-3, {0.03, 0.03}, 1e-6};
  Hyperparams upper{1e3, {30.0, 30.0}, 1e2};
};

struct HyperFitResult {
  Hyperparams hyper;
  double nll = 0.0;
  bool improved = false;  // false: no restart beat the initial point
};

namespace detail {

inline Eigen::Vector4d to_log(const Hyperparams& h) {
  return {std::log(h.signal_sd), std::log(h.length_scales[0]),
          std::log(h.length_scales[1]), std::log(h.noise_sd)};
}

inline Hyperparams from_log(const Eigen::VectorXd& x) {
  Hyperparams h;
  h.signal_sd = std::exp(x[0]);
  h.length_scales = {std::exp(x[1]), std::exp(x[2])};
  h.noise_sd = std::exp(x[3]);
  return h;
}

}  // namespace detail

// Quasi-Newton maximum-likelihood fit in log-parameter space, best of
// `restarts` perturbed initializations (restart 0 is unperturbed).
inline HyperFitResult fit_hyperparams(std::span<const Warped4> pts,
                                      std::span<const double> targets,
                                      const Hyperparams& init, const GpFitConfig& cfg = {}) {
  if (pts.empty() || pts.size() != targets.size())
    throw std::invalid_argument("fit_hyperparams: need matching, nonempty points and targets");
  init.validate();

  const Eigen::Vector4d lo = detail::to_log(cfg.lower);
  const Eigen::Vector4d hi = detail::to_log(cfg.upper);
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const Hyperparams h = detail::from_log(x);
    const GpNllGrad r = gp_nll_with_grad(h, pts, targets, 0.0);
    grad = Eigen::Map<const Eigen::Vector4d>(r.grad_log.data());
    return r.value;
  };

  // targets are expected pre-centred by the caller (train() passes y - mean)
  const double init_nll = gp_nll(init, pts, targets, 0.0);

  HyperFitResult best;
  best.hyper = init;
  best.nll = init_nll;

  BfgsOptions opts;
  opts.max_iters = cfg.max_evals;
  const Eigen::Vector4d x_init = detail::to_log(init);
  for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
    Eigen::Vector4d x0 = x_init;
    if (r > 0) {
      std::mt19937_64 rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(r)));
      std::normal_distribution<double> jolt(0.0, 0.5);
      for (int i = 0; i < 4; ++i) x0[i] += jolt(rng);
    }
    try {
      BfgsResult run = minimize_bfgs_box(objective, x0, lo, hi, opts);
      if (run.value < best.nll) {
        best.hyper = detail::from_log(run.x);
        best.nll = run.value;
        best.improved = true;
      }
    } catch (const std::runtime_error&) {
      // factorization blew up at this start; try the next restart
    }
  }
  return best;
}

class GpModel {
 public:
  struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
  };

  // Warps the locations, centres the targets on their mean, fits
  // hyperparameters by maximum likelihood and caches the factorization.
  static GpModel train(const std::vector<Location2>& locations,
                       const std::vector<double>& targets, const WarpConfig& warp,
                       const GpFitConfig& cfg = {}) {
    if (locations.size() != targets.size() || locations.empty())
      throw std::invalid_argument("GpModel::train: need matching, nonempty inputs");
    warp.validate();
    for (double t : targets)
      if (!std::isfinite(t))
        throw std::invalid_argument("GpModel::train: non-finite target");

    GpModel m;
    m.warp_ = warp;
    m.locations_ = locations;
    m.targets_ = targets;
    m.mean_const_ = 0.0;
    for (double t : targets) m.mean_const_ += t;
    m.mean_const_ /= static_cast<double>(targets.size());

    m.points_.reserve(locations.size());
    for (const auto& l : locations) m.points_.push_back(warp_location(l, warp));

    std::vector<double> centered(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) centered[i] = targets[i] - m.mean_const_;

    const Hyperparams init = initial_guess(m.points_, centered, cfg);
    m.hyper_ = fit_hyperparams(m.points_, centered, init, cfg).hyper;
    m.factorize();
    return m;
  }

  // Rebuild a model from previously fitted parameters; the factorization
  // is recomputed, not persisted.
  static GpModel from_parts(const std::vector<Location2>& locations,
                            const std::vector<double>& targets, const WarpConfig& warp,
                            const Hyperparams& hyper, double mean_const) {
    if (locations.size() != targets.size() || locations.empty())
      throw std::invalid_argument("GpModel: need matching, nonempty inputs");
    warp.validate();
    hyper.validate();
    GpModel m;
    m.warp_ = warp;
    m.locations_ = locations;
    m.targets_ = targets;
    m.mean_const_ = mean_const;
    m.hyper_ = hyper;
    m.points_.reserve(locations.size());
    for (const auto& l : locations) m.points_.push_back(warp_location(l, warp));
    m.factorize();
    return m;
  }

  std::vector<Prediction> predict(const std::vector<Location2>& queries) const {
    std::vector<Prediction> out;
    out.reserve(queries.size());
    const Eigen::Index n = static_cast<Eigen::Index>(points_.size());
    Eigen::VectorXd ks(n);
    const double prior_var = hyper_.signal_sd * hyper_.signal_sd;
    for (const auto& q : queries) {
      const Warped4 p = warp_location(q, warp_);
      for (Eigen::Index i = 0; i < n; ++i)
        ks[i] = kernel(points_[static_cast<std::size_t>(i)], p, hyper_);
      Prediction pred;
      pred.mean = mean_const_ + ks.dot(alpha_);
      const Eigen::VectorXd v = chol_L_.triangularView<Eigen::Lower>().solve(ks);
      double var = prior_var - v.squaredNorm();
      if (var < 0.0) var = 0.0;
      pred.variance = var;
      out.push_back(pred);
    }
    return out;
  }

  const WarpConfig& warp() const { return warp_; }
  const Hyperparams& hyper() const { return hyper_; }
  double mean_const() const { return mean_const_; }
  const std::vector<Location2>& train_locations() const { return locations_; }
  const std::vector<Warped4>& train_points() const { return points_; }
  const std::vector<double>& train_targets() const { return targets_; }
  const Eigen::MatrixXd& cholesky_factor() const { return chol_L_; }

  nlohmann::json to_json() const {
    nlohmann::json locs = nlohmann::json::array();
    for (const auto& l : locations_) locs.push_back({l[0], l[1]});
    return {{"warp", {{"periods_mm", {warp_.periods_mm[0], warp_.periods_mm[1]}}}},
            {"hyperparams",
             {{"signal_sd", hyper_.signal_sd},
              {"length_scales", {hyper_.length_scales[0], hyper_.length_scales[1]}},
              {"noise_sd", hyper_.noise_sd}}},
            {"mean_const", mean_const_},
            {"train", {{"locations_mm", locs}, {"targets", targets_}}}};
  }

  static GpModel from_json(const nlohmann::json& j) {
    WarpConfig warp;
    warp.periods_mm = {j.at("warp").at("periods_mm").at(0).get<double>(),
                       j.at("warp").at("periods_mm").at(1).get<double>()};
    Hyperparams h;
    const auto& hp = j.at("hyperparams");
    hp.at("signal_sd").get_to(h.signal_sd);
    h.length_scales = {hp.at("length_scales").at(0).get<double>(),
                       hp.at("length_scales").at(1).get<double>()};
    hp.at("noise_sd").get_to(h.noise_sd);

    std::vector<Location2> locs;
    for (const auto& l : j.at("train").at("locations_mm"))
      locs.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
    std::vector<double> targets = j.at("train").at("targets").get<std::vector<double>>();
    return from_parts(locs, targets, warp, h, j.at("mean_const").get<double>());
  }

 private:
  GpModel() = default;

  void factorize() {
    const Eigen::MatrixXd K = detail::kernel_matrix(points_, hyper_);
    chol_L_ = detail::factor_noisy_kernel(K, hyper_);
    const Eigen::Index n = static_cast<Eigen::Index>(points_.size());
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i)
      y[i] = targets_[static_cast<std::size_t>(i)] - mean_const_;
    const Eigen::VectorXd v = chol_L_.triangularView<Eigen::Lower>().solve(y);
    alpha_ = chol_L_.triangularView<Eigen::Lower>().transpose().solve(v);
  }

  // Data-driven starting point: target sd for the signal, median warped
  // distance per axis for the length scales.
  static Hyperparams initial_guess(const std::vector<Warped4>& pts,
                                   const std::vector<double>& centered,
                                   const GpFitConfig& cfg) {
    double var = 0.0;
    for (double t : centered) var += t * t;
    var /= static_cast<double>(centered.size());

    Hyperparams h;
    h.signal_sd = std::max(std::sqrt(var), 1e-2);
    h.noise_sd = std::max(0.1 * h.signal_sd, 1e-4);

    const std::size_t stride = std::max<std::size_t>(1, pts.size() / 200);
    for (int k = 0; k < 2; ++k) {
      std::vector<double> dists;
      for (std::size_t i = 0; i < pts.size(); i += stride)
        for (std::size_t j = i + stride; j < pts.size(); j += stride) {
          const double ds = pts[i][2 * k] - pts[j][2 * k];
          const double dc = pts[i][2 * k + 1] - pts[j][2 * k + 1];
          const double d = std::sqrt(ds * ds + dc * dc);
          if (d > 0.0) dists.push_back(d);
        }
      double eta = 1.0;
      if (!dists.empty()) {
        auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
        std::nth_element(dists.begin(), mid, dists.end());
        eta = *mid;
      }
      h.length_scales[k] = std::clamp(eta, cfg.lower.length_scales[k] * 10.0,
                                      cfg.upper.length_scales[k] / 10.0);
    }
    h.signal_sd = std::clamp(h.signal_sd, cfg.lower.signal_sd, cfg.upper.signal_sd);
    h.noise_sd = std::clamp(h.noise_sd, cfg.lower.noise_sd, cfg.upper.noise_sd);
    return h;
  }

  WarpConfig warp_;
  Hyperparams hyper_;
  double mean_const_ = 0.0;
  std::vector<Location2> locations_;
  std::vector<Warped4> points_;
  std::vector<double> targets_;
  Eigen::MatrixXd chol_L_;
  Eigen::VectorXd alpha_;
};

}  // namespace pipemap
