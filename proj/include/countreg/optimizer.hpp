#pragma once

// BFGS maximizer with a strong-Wolfe line search.
//
// The objective is a callable `std::optional<double>(const VectorXd& x,
// VectorXd* grad)`; std::nullopt marks an infeasible point (overflowing
// linear predictor, tau out of range) and makes the line search back off.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace countreg {

struct OptimizerOptions {
  double gradient_tol = 1e-6;   // on the infinity norm of the gradient
  double relative_tol = 1e-10;  // on |f_k - f_{k-1}| / max(|f_k|, 1)
  int max_iterations = 500;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  /// Objective value at every accepted iterate, starting point first.
  std::vector<double> trace;
  std::string message;
};

namespace detail {

struct LinePoint {
  double alpha = 0.0;
  double phi = std::numeric_limits<double>::infinity();  // minimized: -f
  double dphi = 0.0;
  Eigen::VectorXd grad;  // gradient of -f
  bool ok = false;
};

}  // namespace detail

template <class Objective>
OptimizerResult maximize_bfgs(Objective&& objective, Eigen::VectorXd x0,
                              const OptimizerOptions& options = {}) {
  using detail::LinePoint;
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  constexpr int kMaxLineEvals = 60;

  const auto n = x0.size();
  OptimizerResult res;
  res.x = std::move(x0);

  // Minimize phi = -f internally.
  Eigen::VectorXd g;
  {
    Eigen::VectorXd fg;
    const auto f = objective(res.x, &fg);
    if (!f) {
      res.message = "objective is not finite at the starting point";
      return res;
    }
    res.value = *f;
    g = -fg;
  }
  res.trace.push_back(res.value);

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  double last_change = std::numeric_limits<double>::infinity();

  auto grad_norm = [&] { return g.lpNorm<Eigen::Infinity>(); };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (grad_norm() < options.gradient_tol &&
        (iter == 0 || last_change <= options.relative_tol * std::max(std::abs(res.value), 1.0))) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd dir = -(h_inv * g);
    double dphi0 = g.dot(dir);
    if (!(dphi0 < 0.0)) {
      h_inv.setIdentity();
      scaled = false;
      dir = -g;
      dphi0 = g.dot(dir);
    }
    const double phi0 = -res.value;

    auto eval = [&](double alpha) {
      LinePoint pt;
      pt.alpha = alpha;
      Eigen::VectorXd fg;
      const auto f = objective(res.x + alpha * dir, &fg);
      if (f && std::isfinite(*f)) {
        pt.ok = true;
        pt.phi = -*f;
        pt.grad = -fg;
        pt.dphi = pt.grad.dot(dir);
      }
      return pt;
    };
    // Armijo, or its derivative form phi'(a) <= (2 c1 - 1) phi'(0) once the
    // predicted decrease drowns in round-off. Both forms forbid any increase
    // of phi, so accepted iterates never lower the objective.
    auto sufficient = [&](const LinePoint& pt) {
      if (!pt.ok) return false;
      if (pt.phi <= phi0 + c1 * pt.alpha * dphi0) return true;
      return pt.phi <= phi0 && pt.dphi <= (2.0 * c1 - 1.0) * dphi0;
    };
    auto curvature = [&](const LinePoint& pt) { return std::abs(pt.dphi) <= -c2 * dphi0; };

    int evals = 0;
    std::optional<LinePoint> accepted;

    auto zoom = [&](LinePoint lo, LinePoint hi) -> std::optional<LinePoint> {
      // lo satisfies sufficient decrease (or is alpha = 0); hi brackets.
      while (evals < kMaxLineEvals) {
        double a;
        const double width = hi.alpha - lo.alpha;
        if (hi.ok) {
          // Minimizer of the quadratic through phi(lo), phi'(lo), phi(hi).
          const double denom = 2.0 * (hi.phi - lo.phi - lo.dphi * width);
          a = denom > 0.0 ? lo.alpha - lo.dphi * width * width / denom : lo.alpha + 0.5 * width;
        } else {
          a = lo.alpha + 0.5 * width;
        }
        const double lo_b = std::min(lo.alpha, hi.alpha), hi_b = std::max(lo.alpha, hi.alpha);
        const double margin = 0.1 * (hi_b - lo_b);
        a = std::clamp(a, lo_b + margin, hi_b - margin);
        if (!(hi_b - lo_b > 1e-16 * std::max(1.0, hi_b))) break;

        const LinePoint pt = eval(a);
        ++evals;
        // Ties are common near the optimum, where the ascent is below one ulp
        // of the objective; `sufficient` then decides from the derivative.
        if (!sufficient(pt) || pt.phi > lo.phi) {
          hi = pt;
        } else {
          if (curvature(pt)) return pt;
          if (pt.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = pt;
        }
      }
      if (lo.alpha > 0.0 && lo.phi <= phi0) return lo;
      return std::nullopt;
    };

    LinePoint prev;
    prev.alpha = 0.0;
    prev.phi = phi0;
    prev.dphi = dphi0;
    prev.ok = true;
    double alpha = scaled ? 1.0 : std::min(1.0, 1.0 / std::max(grad_norm(), 1e-300));
    while (evals < kMaxLineEvals) {
      const LinePoint pt = eval(alpha);
      ++evals;
      if (!sufficient(pt) || (prev.alpha > 0.0 && pt.phi > prev.phi)) {
        accepted = zoom(prev, pt);
        break;
      }
      if (curvature(pt)) {
        accepted = pt;
        break;
      }
      if (pt.dphi >= 0.0) {
        accepted = zoom(pt, prev);
        break;
      }
      prev = pt;
      alpha *= 2.0;
    }

    if (!accepted) {
      if (grad_norm() < options.gradient_tol) {
        res.converged = true;
        break;
      }
      if (scaled) {
        // Retry once from steepest ascent before giving up.
        h_inv.setIdentity();
        scaled = false;
        continue;
      }
      res.message = "line search failed to find an ascent step";
      break;
    }

    const Eigen::VectorXd s = accepted->alpha * dir;
    const Eigen::VectorXd yv = accepted->grad - g;
    const double new_value = -accepted->phi;
    last_change = std::abs(new_value - res.value);
    res.x += s;
    res.value = new_value;
    g = accepted->grad;
    res.trace.push_back(res.value);
    res.iterations = iter + 1;

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        h_inv = Eigen::MatrixXd::Identity(n, n) * (sy / yv.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * yv.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
  }

  if (!res.converged && res.message.empty()) {
    if (grad_norm() < options.gradient_tol &&
        last_change <= options.relative_tol * std::max(std::abs(res.value), 1.0))
      res.converged = true;
    else
      res.message = "iteration cap reached";
  }
  res.gradient = -g;
  return res;
}

}  // namespace countreg
