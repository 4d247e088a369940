#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countreg/dataset.hpp"
#include "countreg/design.hpp"
#include "countreg/likelihood.hpp"
#include "countreg/optimizer.hpp"

namespace countreg {

struct FitOptions {
  OptimizerOptions optimizer;
  /// Hold tau fixed at exp(fixed_log_tau) instead of estimating it.
  std::optional<double> fixed_log_tau;
  /// Hold the ZINB zero-part coefficients fixed.
  std::optional<Eigen::VectorXd> fixed_gamma;
  /// Relative (and absolute floor) step of the central-difference Hessian.
  double hessian_step = 1e-5;
};

struct Term {
  std::string label;
  std::string variable;
  std::string level;
};

struct FitResult {
  Family family = Family::Poisson;
  ParamLayout layout;
  ParamVector estimates;
  std::vector<Term> count_terms;
  std::vector<Term> zero_terms;

  /// Flat-layout indices of the estimated parameters, in covariance order.
  std::vector<Eigen::Index> free_parameters;
  Eigen::MatrixXd covariance;
  bool covariance_available = false;
  std::string covariance_message;

  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::size_t n_obs = 0;
  int n_iterations = 0;
  bool converged = false;
  double gradient_norm = std::numeric_limits<double>::infinity();
  std::string message;
  std::vector<double> trace;

  std::size_t n_free() const { return free_parameters.size(); }
  double aic() const { return 2.0 * static_cast<double>(n_free()) - 2.0 * log_likelihood; }

  Eigen::VectorXd theta() const { return layout.flatten(estimates); }

  /// Standard error of a flat-layout parameter; NaN if fixed or unavailable.
  double std_error(Eigen::Index flat_index) const {
    if (!covariance_available) return std::numeric_limits<double>::quiet_NaN();
    const auto it = std::find(free_parameters.begin(), free_parameters.end(), flat_index);
    if (it == free_parameters.end()) return std::numeric_limits<double>::quiet_NaN();
    const auto k = it - free_parameters.begin();
    return std::sqrt(covariance(k, k));
  }
};

namespace detail {

/// Observed information with smallest/largest eigenvalue below this ratio is
/// treated as singular.
inline constexpr double kSingularHessianRatio = 1e-9;

inline std::vector<Term> terms_of(const DesignMatrix& dm) {
  std::vector<Term> out;
  for (std::size_t j = 0; j < dm.labels.size(); ++j)
    out.push_back({dm.labels[j], dm.variables[j], dm.levels[j]});
  return out;
}

inline FitResult optimize(const CountModel& model, const Eigen::VectorXd& start,
                          const std::vector<Eigen::Index>& free, const FitOptions& options) {
  const auto& layout = model.layout();
  FitResult fr;
  fr.family = model.family();
  fr.layout = layout;
  fr.n_obs = model.n_obs();
  fr.count_terms = terms_of(model.count_design());
  if (model.zero_design() && layout.has_gamma()) fr.zero_terms = terms_of(*model.zero_design());
  fr.free_parameters = free;

  const auto k = static_cast<Eigen::Index>(free.size());
  auto expand = [&](const Eigen::VectorXd& sub) {
    Eigen::VectorXd full = start;
    for (Eigen::Index j = 0; j < k; ++j) full(free[static_cast<std::size_t>(j)]) = sub(j);
    return full;
  };
  auto objective = [&](const Eigen::VectorXd& sub, Eigen::VectorXd* grad) -> std::optional<double> {
    Eigen::VectorXd full_grad;
    const auto ev = model.evaluate(expand(sub), grad ? &full_grad : nullptr);
    if (!ev.ok) return std::nullopt;
    if (grad) {
      grad->resize(k);
      for (Eigen::Index j = 0; j < k; ++j) (*grad)(j) = full_grad(free[static_cast<std::size_t>(j)]);
    }
    return ev.value;
  };

  Eigen::VectorXd sub0(k);
  for (Eigen::Index j = 0; j < k; ++j) sub0(j) = start(free[static_cast<std::size_t>(j)]);
  const auto opt = maximize_bfgs(objective, sub0, options.optimizer);

  const Eigen::VectorXd theta = expand(opt.x);
  fr.estimates = layout.unflatten(theta);
  fr.log_likelihood = opt.value;
  fr.n_iterations = opt.iterations;
  fr.converged = opt.converged;
  fr.gradient_norm = opt.gradient.size() ? opt.gradient.lpNorm<Eigen::Infinity>() : 0.0;
  fr.message = opt.message;
  fr.trace = opt.trace;
  if (!std::isfinite(fr.log_likelihood)) {
    fr.covariance_message = "log-likelihood not finite at the starting point";
    return fr;
  }

  // Central differences of the analytic gradient.
  Eigen::MatrixXd hess(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double h = std::max(options.hessian_step, options.hessian_step * std::abs(opt.x(j)));
    Eigen::VectorXd up = opt.x, down = opt.x;
    up(j) += h;
    down(j) -= h;
    Eigen::VectorXd g_up, g_down;
    if (!objective(up, &g_up) || !objective(down, &g_down)) {
      fr.covariance_message = "gradient not finite near the optimum";
      return fr;
    }
    hess.col(j) = (g_up - g_down) / (2.0 * h);
  }
  const Eigen::MatrixXd info = -0.5 * (hess + hess.transpose());
  if (!info.allFinite()) {
    fr.covariance_message = "Hessian is not finite at the optimum";
    return fr;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
  const auto& ev = eig.eigenvalues();
  if (eig.info() != Eigen::Success || ev.minCoeff() <= kSingularHessianRatio * ev.cwiseAbs().maxCoeff()) {
    fr.covariance_message = "Hessian is singular or not negative definite at the optimum";
    return fr;
  }
  Eigen::MatrixXd cov = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose());
  if (!cov.allFinite() || (cov.diagonal().array() <= 0.0).any()) {
    fr.covariance_message = "covariance is not positive definite";
    return fr;
  }
  fr.covariance = std::move(cov);
  fr.covariance_available = true;
  return fr;
}

}  // namespace detail

/// Maximum-likelihood fit on prebuilt designs. `z` is required for ZINB and
/// ignored otherwise.
///
/// Starting values are staged: a Poisson fit from beta = (log(mean + 0.1), 0,
/// ...) seeds beta; log_tau starts at 0; the ZINB zero-part intercept starts at
/// logit(max(z0, 0.01)) where z0 is the observed zero fraction in excess of the
/// NB zero mass implied by the start.
inline FitResult fit_design(Family family, const DesignMatrix& x, const DesignMatrix* z,
                            std::span<const Count> y, const FitOptions& options = {}) {
  if (y.empty()) throw InsufficientDataError("no observations");
  const CountModel model(family, x, family == Family::ZINB ? z : nullptr, y);
  const auto& layout = model.layout();

  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < layout.d; ++j) free.push_back(j);
  if (layout.has_gamma() && !options.fixed_gamma)
    for (Eigen::Index j = 0; j < layout.q; ++j) free.push_back(layout.gamma_offset() + j);
  if (layout.has_tau() && !options.fixed_log_tau) free.push_back(layout.tau_index());
  if (y.size() <= free.size())
    throw InsufficientDataError("number of observations must exceed the number of free parameters");

  double mean = 0.0;
  for (auto v : y) mean += static_cast<double>(v);
  mean /= static_cast<double>(y.size());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(layout.d);
  beta(0) = std::log(mean + 0.1);
  if (family != Family::Poisson) {
    const CountModel poisson(Family::Poisson, x, nullptr, y);
    std::vector<Eigen::Index> pfree(static_cast<std::size_t>(layout.d));
    for (Eigen::Index j = 0; j < layout.d; ++j) pfree[static_cast<std::size_t>(j)] = j;
    FitOptions popts = options;
    popts.fixed_log_tau.reset();
    popts.fixed_gamma.reset();
    const auto stage = detail::optimize(poisson, beta, pfree, popts);
    if (stage.estimates.beta.allFinite()) beta = stage.estimates.beta;
  } else {
    return detail::optimize(model, beta, free, options);
  }

  ParamVector start;
  start.beta = beta;
  start.log_tau = options.fixed_log_tau.value_or(0.0);
  if (layout.has_gamma()) {
    if (options.fixed_gamma) {
      if (options.fixed_gamma->size() != layout.q) throw DomainError("fixed_gamma has the wrong length");
      start.gamma = *options.fixed_gamma;
    } else {
      const double tau = std::exp(*start.log_tau);
      const Eigen::VectorXd eta = x.values * beta;
      double implied = 0.0, observed = 0.0;
      for (Eigen::Index i = 0; i < eta.size(); ++i) {
        implied += std::exp(nb_log_zero_prob(NbParams(std::exp(eta(i)), tau)));
        if (y[static_cast<std::size_t>(i)] == 0) observed += 1.0;
      }
      const double nobs = static_cast<double>(y.size());
      const double excess = std::max(0.0, observed / nobs - implied / nobs);
      start.gamma = Eigen::VectorXd::Zero(layout.q);
      start.gamma(0) = detail::logit(std::clamp(excess, 0.01, 0.99));
    }
  }
  return detail::optimize(model, layout.flatten(start), free, options);
}

/// Builds the designs named by `spec` and fits. ZINB with no zero-part
/// covariates gets an intercept-only zero part.
inline FitResult fit(const ModelSpec& spec, const Dataset& ds, const FitOptions& options = {}) {
  validate(spec, ds);
  const auto x = build_design(ds, spec.count_covariates, spec.reference_levels);
  std::optional<DesignMatrix> z;
  if (spec.family == Family::ZINB) z = build_design(ds, spec.zero_covariates, spec.reference_levels);
  return fit_design(spec.family, x, z ? &*z : nullptr, ds.counts(spec.response), options);
}

inline std::string significance_stars(double p) {
  if (!(p >= 0.0)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

/// Two-sided normal-approximation p-value.
inline double two_sided_p(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

enum class Part { Count, Zero, Shape };

inline std::string_view to_string(Part p) {
  switch (p) {
    case Part::Count: return "count";
    case Part::Zero: return "zero";
    case Part::Shape: return "shape";
  }
  return "?";
}

struct IrrRow {
  std::string label;
  std::string variable;
  std::string level;
  Part part = Part::Count;
  double coefficient = 0.0;
  double irr = 1.0;        // exp(coefficient); an odds ratio for the zero part
  double std_error = 0.0;  // of the coefficient; NaN when unavailable
  double z_value = 0.0;
  double p_value = 1.0;
  std::string stars;
};

inline IrrRow make_irr_row(Term term, Part part, double coefficient, double std_error) {
  IrrRow r;
  r.label = std::move(term.label);
  r.variable = std::move(term.variable);
  r.level = std::move(term.level);
  r.part = part;
  r.coefficient = coefficient;
  r.irr = std::exp(coefficient);
  r.std_error = std_error;
  r.z_value = std_error > 0.0 ? coefficient / std_error : std::numeric_limits<double>::quiet_NaN();
  r.p_value = two_sided_p(r.z_value);
  r.stars = significance_stars(r.p_value);
  return r;
}

/// Count-part rows followed by zero-part rows, exponentiated. Intercepts are
/// skipped unless `include_intercepts`.
inline std::vector<IrrRow> irr_table(const FitResult& fit, bool include_intercepts = false) {
  std::vector<IrrRow> rows;
  for (std::size_t j = 0; j < fit.count_terms.size(); ++j) {
    if (j == 0 && !include_intercepts) continue;
    const auto idx = static_cast<Eigen::Index>(j);
    rows.push_back(make_irr_row(fit.count_terms[j], Part::Count, fit.estimates.beta(idx), fit.std_error(idx)));
  }
  for (std::size_t j = 0; j < fit.zero_terms.size(); ++j) {
    if (j == 0 && !include_intercepts) continue;
    const auto idx = static_cast<Eigen::Index>(j);
    rows.push_back(make_irr_row(fit.zero_terms[j], Part::Zero, fit.estimates.gamma(idx),
                                fit.std_error(fit.layout.gamma_offset() + idx)));
  }
  return rows;
}

struct ComparisonRow {
  std::size_t index = 0;  // position in the input list
  Family family = Family::Poisson;
  double log_likelihood = 0.0;
  std::size_t n_params = 0;
  double aic = 0.0;
  bool converged = false;
};

/// Ranks fits by ascending AIC; ties keep input order.
inline std::vector<ComparisonRow> compare_models(std::span<const FitResult> fits) {
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (fits[i].n_obs != fits.front().n_obs)
      throw ComparisonError("fits were estimated on different numbers of observations");
    rows.push_back({i, fits[i].family, fits[i].log_likelihood, fits[i].n_free(), fits[i].aic(),
                    fits[i].converged});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.aic < b.aic; });
  return rows;
}

}  // namespace countreg
