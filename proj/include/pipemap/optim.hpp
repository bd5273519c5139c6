#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>

// Small box-constrained quasi-Newton minimizer (BFGS inverse-Hessian
// updates, Armijo backtracking, iterates projected onto the box).
// Intended for low-dimensional smooth objectives with analytic gradients.

namespace pipemap {

struct BfgsOptions {
  int max_iters = 200;
  double grad_tol = 1e-7;  // on the projected gradient, relative to 1+|f|
  double f_tol = 1e-12;    // relative objective decrease
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int iters = 0;
  int evals = 0;
  bool converged = false;
};

// fn(x, grad_out) -> f(x), writing the gradient into grad_out.
inline BfgsResult minimize_bfgs_box(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fn,
    Eigen::VectorXd x0, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
    const BfgsOptions& opts = {}) {
  const auto n = x0.size();
  auto project = [&](Eigen::VectorXd v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    return v;
  };

  BfgsResult res;
  Eigen::VectorXd x = project(std::move(x0));
  Eigen::VectorXd g(n), gn(n);
  double f = fn(x, g);
  ++res.evals;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    res.iters = iter;

    // projected gradient: zero the components pushing outside an active bound
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] <= lo[i] && g[i] > 0.0) pg[i] = 0.0;
      if (x[i] >= hi[i] && g[i] < 0.0) pg[i] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() < opts.grad_tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = -H * g;
    if (d.dot(g) > -1e-12 * d.norm() * g.norm()) {
      H.setIdentity();
      d = -g;
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn;
    double fnew = f;
    for (int ls = 0; ls < 60; ++ls) {
      xn = project(x + t * d);
      const Eigen::VectorXd step = xn - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) { t *= 0.5; continue; }
      fnew = fn(xn, gn);
      ++res.evals;
      if (std::isfinite(fnew) && fnew <= f + 1e-4 * g.dot(step)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no descent step found; report current point

    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    } else {
      H.setIdentity();
    }

    const double decrease = f - fnew;
    x = std::move(xn);
    f = fnew;
    g = gn;
    if (decrease < opts.f_tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }
  }

  res.x = std::move(x);
  res.value = f;
  return res;
}

}  // namespace pipemap
