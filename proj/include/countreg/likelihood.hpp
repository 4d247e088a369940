#pragma once

// Log-likelihood and analytic gradient of Poisson, NB and ZINB regression.
//
//   log(lambda_i) = x_i' beta        (count part)
//   logit(p_i)    = z_i' gamma       (zero part, ZINB only)
//   tau           = exp(log_tau)     (NB and ZINB)
//
// The likelihood is the sum of per-observation log-pmfs from
// distributions.hpp, so it agrees with the pmf by construction.

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "countreg/design.hpp"
#include "countreg/distributions.hpp"
#include "countreg/errors.hpp"

namespace countreg {

/// Model parameters. `gamma` is empty unless ZINB; `log_tau` is absent for
/// Poisson.
struct ParamVector {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  std::optional<double> log_tau;

  double tau() const { return log_tau ? std::exp(*log_tau) : std::numeric_limits<double>::infinity(); }
};

/// Position of beta, gamma and log_tau inside a flat parameter vector
/// [beta, gamma, log_tau].
struct ParamLayout {
  Family family = Family::Poisson;
  Eigen::Index d = 0;  // count-part columns
  Eigen::Index q = 0;  // zero-part columns

  bool has_tau() const { return family != Family::Poisson; }
  bool has_gamma() const { return family == Family::ZINB; }
  Eigen::Index gamma_offset() const { return d; }
  Eigen::Index tau_index() const { return d + q; }
  Eigen::Index size() const { return d + q + (has_tau() ? 1 : 0); }

  Eigen::VectorXd flatten(const ParamVector& p) const {
    check(p);
    Eigen::VectorXd theta(size());
    theta.head(d) = p.beta;
    if (has_gamma()) theta.segment(d, q) = p.gamma;
    if (has_tau()) theta(tau_index()) = *p.log_tau;
    return theta;
  }

  ParamVector unflatten(const Eigen::VectorXd& theta) const {
    if (theta.size() != size()) throw DomainError("parameter vector has the wrong length");
    ParamVector p;
    p.beta = theta.head(d);
    p.gamma = has_gamma() ? Eigen::VectorXd(theta.segment(d, q)) : Eigen::VectorXd();
    if (has_tau()) p.log_tau = theta(tau_index());
    return p;
  }

  void check(const ParamVector& p) const {
    if (p.beta.size() != d) throw DomainError("beta has the wrong length");
    if (has_gamma() ? p.gamma.size() != q : p.gamma.size() != 0)
      throw DomainError("gamma has the wrong length for this family");
    if (has_tau() != p.log_tau.has_value())
      throw DomainError(has_tau() ? "log_tau is required for this family"
                                  : "log_tau is not a Poisson parameter");
  }
};

/// Binds a family, its design matrices and the response. Holds references:
/// the designs and counts must outlive the model.
class CountModel {
 public:
  CountModel(Family family, const DesignMatrix& x, const DesignMatrix* z, std::span<const Count> y)
      : family_(family), x_(x), z_(z), y_(y) {
    if (x.rows() != static_cast<Eigen::Index>(y.size()))
      throw DomainError("count design rows do not match the response length");
    if (family == Family::ZINB) {
      if (!z) throw DomainError("ZINB requires a zero-part design");
      if (z->rows() != x.rows()) throw DomainError("zero design rows do not match the response length");
    }
    layout_ = {family, x.cols(), family == Family::ZINB ? z->cols() : 0};
    log_fact_.reserve(y.size());
    for (auto v : y) log_fact_.push_back(v > 0 ? detail::log_factorial<long double>(v) : 0.0L);
  }

  const ParamLayout& layout() const noexcept { return layout_; }
  Family family() const noexcept { return family_; }
  std::size_t n_obs() const noexcept { return y_.size(); }
  std::span<const Count> response() const noexcept { return y_; }
  const DesignMatrix& count_design() const noexcept { return x_; }
  const DesignMatrix* zero_design() const noexcept { return z_; }

  struct Evaluation {
    bool ok = false;
    double value = -std::numeric_limits<double>::infinity();
    std::size_t bad_row = 0;
    std::string message;
  };

  /// Non-throwing evaluation; fills `grad` (if non-null) on success.
  Evaluation evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    Evaluation ev;
    if (theta.size() != layout_.size()) {
      ev.message = "parameter vector has the wrong length";
      return ev;
    }
    if (!theta.allFinite()) {
      ev.message = "non-finite parameter";
      return ev;
    }
    const auto d = layout_.d;
    const auto eta = linear_predictor(x_.values, theta.head(d));
    LongVector zeta;
    if (layout_.has_gamma()) zeta = linear_predictor(z_->values, theta.segment(d, layout_.q));

    double tau = 0.0;
    if (layout_.has_tau()) {
      tau = std::exp(theta(layout_.tau_index()));
      if (!std::isfinite(tau) || tau <= kMinTau) {
        ev.message = "tau = exp(log_tau) outside (1e-10, inf)";
        return ev;
      }
    }

    const auto n = static_cast<Eigen::Index>(y_.size());
    Eigen::VectorXd d_eta, d_zeta;
    double d_log_tau = 0.0;
    if (grad) {
      d_eta.resize(n);
      if (layout_.has_gamma()) d_zeta.resize(n);
    }

    // The value is accumulated in extended precision with Neumaier
    // compensation, in row order. Near the optimum the ascent per step falls
    // far below one ulp of the total; the extra bits keep the rounded double
    // monotone in the true value so the line search can still make progress.
    const long double ltau = tau;
    long double total = 0.0L, carry = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Count y = y_[static_cast<std::size_t>(i)];
      const long double llambda = std::exp(eta(i));
      const double lambda = static_cast<double>(llambda);
      if (!std::isfinite(eta(i)) || !std::isfinite(lambda) || lambda <= 0.0) {
        ev.bad_row = static_cast<std::size_t>(i);
        ev.message = "linear predictor " + std::to_string(static_cast<double>(eta(i))) + " overflows the log link";
        return ev;
      }
      if (y < 0) {
        ev.bad_row = static_cast<std::size_t>(i);
        ev.message = "negative count";
        return ev;
      }
      const double yd = static_cast<double>(y);
      const long double log_y_fact = log_fact_[static_cast<std::size_t>(i)];
      long double li = 0.0L;
      switch (family_) {
        case Family::Poisson:
          li = detail::poisson_log_pmf(y, llambda, log_y_fact);
          if (grad) d_eta(i) = yd - lambda;
          break;
        case Family::NB: {
          li = detail::nb_log_pmf(y, llambda, ltau, log_y_fact);
          if (grad) {
            d_eta(i) = tau * (yd - lambda) / (lambda + tau);
            d_log_tau += tau * nb_dtau(y, lambda, tau);
          }
          break;
        }
        case Family::ZINB: {
          li = detail::zinb_log_pmf_logit(y, llambda, ltau, zeta(i), log_y_fact);
          if (grad) {
            const double z = static_cast<double>(zeta(i));
            const double p = detail::logistic(z);
            if (y == 0) {
              // Posterior weight of the NB-zero component.
              const double w = static_cast<double>(
                  std::exp(-detail::softplus(zeta(i)) + detail::nb_log_zero_prob(llambda, ltau) - li));
              d_eta(i) = -w * tau * lambda / (lambda + tau);
              d_log_tau += tau * w * (-std::log1p(lambda / tau) + lambda / (lambda + tau));
              d_zeta(i) = (1.0 - w) - p;
            } else {
              d_eta(i) = tau * (yd - lambda) / (lambda + tau);
              d_log_tau += tau * nb_dtau(y, lambda, tau);
              d_zeta(i) = -p;
            }
          }
          break;
        }
      }
      if (!std::isfinite(li)) {
        ev.bad_row = static_cast<std::size_t>(i);
        ev.message = "non-finite log-probability";
        return ev;
      }
      const long double t = total + li;
      carry += std::abs(total) >= std::abs(li) ? (total - t) + li : (li - t) + total;
      total = t;
    }
    total += carry;

    if (grad) {
      grad->resize(layout_.size());
      grad->head(d) = x_.values.transpose() * d_eta;
      if (layout_.has_gamma()) grad->segment(d, layout_.q) = z_->values.transpose() * d_zeta;
      if (layout_.has_tau()) (*grad)(layout_.tau_index()) = d_log_tau;
      if (!grad->allFinite()) {
        ev.message = "non-finite gradient";
        return ev;
      }
    }
    ev.ok = true;
    ev.value = static_cast<double>(total);
    return ev;
  }

  double log_likelihood(const Eigen::VectorXd& theta) const {
    return unwrap(evaluate(theta, nullptr));
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd g;
    unwrap(evaluate(theta, &g));
    return g;
  }

  /// P(Y_i = 0 | x_i, z_i, theta) per observation.
  Eigen::VectorXd zero_probabilities(const Eigen::VectorXd& theta) const {
    const auto d = layout_.d;
    const Eigen::VectorXd eta = x_.values * theta.head(d);
    Eigen::VectorXd out(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double lambda = std::exp(eta(i));
      switch (family_) {
        case Family::Poisson: out(i) = std::exp(-lambda); break;
        case Family::NB:
          out(i) = std::exp(nb_log_zero_prob(NbParams(lambda, std::exp(theta(layout_.tau_index())))));
          break;
        case Family::ZINB: {
          const double zeta = z_->values.row(i).dot(theta.segment(d, layout_.q));
          const NbParams nb(lambda, std::exp(theta(layout_.tau_index())));
          out(i) = std::exp(detail::zinb_log_pmf_logit(0, nb, zeta));
          break;
        }
      }
    }
    return out;
  }

 private:
  using LongVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

  /// X b with extended-precision accumulation.
  static LongVector linear_predictor(const Eigen::MatrixXd& x, const Eigen::VectorXd& b) {
    LongVector out = LongVector::Zero(x.rows());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out += x.col(j).cast<long double>() * static_cast<long double>(b(j));
    return out;
  }

  /// d/dtau of the NB log-pmf.
  static double nb_dtau(Count y, double lambda, double tau) {
    double psi_diff = 0.0;  // digamma(y + tau) - digamma(tau)
    if (y <= detail::kSmallCount) {
      for (Count k = 0; k < y; ++k) psi_diff += 1.0 / (tau + static_cast<double>(k));
    } else {
      psi_diff = boost::math::digamma(static_cast<double>(y) + tau) - boost::math::digamma(tau);
    }
    return psi_diff - std::log1p(lambda / tau) + (lambda - static_cast<double>(y)) / (lambda + tau);
  }

  static double unwrap(const Evaluation& ev) {
    if (!ev.ok) throw EvaluationError(ev.bad_row, ev.message);
    return ev.value;
  }

  Family family_;
  const DesignMatrix& x_;
  const DesignMatrix* z_;
  std::span<const Count> y_;
  ParamLayout layout_;
  std::vector<long double> log_fact_;  // log(y_i!)
};

inline double log_likelihood(Family family, const DesignMatrix& x, const DesignMatrix* z,
                             std::span<const Count> y, const ParamVector& params) {
  const CountModel model(family, x, z, y);
  return model.log_likelihood(model.layout().flatten(params));
}

/// Gradient over the flat layout [beta, gamma, log_tau].
inline Eigen::VectorXd gradient(Family family, const DesignMatrix& x, const DesignMatrix* z,
                                std::span<const Count> y, const ParamVector& params) {
  const CountModel model(family, x, z, y);
  return model.gradient(model.layout().flatten(params));
}

}  // namespace countreg
