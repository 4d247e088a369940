#pragma once

// Poisson, negative binomial and zero-inflated negative binomial
// distributions: log-pmf, closed-form moments and seeded samplers.
//
// The NB parameterization is by mean lambda and shape tau, with
// variance lambda + lambda^2 / tau. Poisson is the tau -> infinity limit.

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "countreg/errors.hpp"

namespace countreg {

using Count = std::int64_t;

/// Smallest admissible shape. Anything at or below is rejected, never clamped.
inline constexpr double kMinTau = 1e-10;

namespace detail {

// The kernels below are templated on the floating type so the likelihood can
// evaluate them in extended precision; the public API uses double.

template <class Real>
Real lgamma_safe(Real x) {
  return boost::math::lgamma(x);
}

/// log(exp(a) + exp(b)) for a, b possibly -inf.
template <class Real>
Real log_add_exp(Real a, Real b) {
  if (a == -std::numeric_limits<Real>::infinity()) return b;
  if (b == -std::numeric_limits<Real>::infinity()) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

/// log(1 + exp(x)) without overflow.
template <class Real>
Real softplus(Real x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline void check_count(Count y) {
  if (y < 0) throw DomainError("count must be nonnegative, got " + std::to_string(y));
}

/// Below this count the gamma ratio Gamma(y+tau)/Gamma(tau) is expanded as a
/// finite product, which stays exact when tau is huge.
inline constexpr Count kSmallCount = 64;

}  // namespace detail

/// Mean/shape pair of a negative binomial distribution.
class NbParams {
 public:
  NbParams(double lambda, double tau) : lambda_(lambda), tau_(tau) {
    if (!std::isfinite(lambda) || lambda <= 0.0)
      throw DomainError("NB mean lambda must be finite and positive, got " +
                        std::to_string(lambda));
    if (!std::isfinite(tau) || tau <= kMinTau)
      throw DomainError("NB shape tau must be finite and > 1e-10, got " +
                        std::to_string(tau));
  }

  double lambda() const noexcept { return lambda_; }
  double tau() const noexcept { return tau_; }

 private:
  double lambda_;
  double tau_;
};

/// NB count component plus structural-zero probability p in [0, 1).
class ZinbParams {
 public:
  ZinbParams(NbParams nb, double p) : nb_(nb), p_(p) {
    if (!(p >= 0.0 && p < 1.0))
      throw DomainError("zero-inflation probability must lie in [0, 1), got " +
                        std::to_string(p));
  }

  const NbParams& nb() const noexcept { return nb_; }
  double p() const noexcept { return p_; }

 private:
  NbParams nb_;
  double p_;
};

struct Moments {
  double mean;
  double variance;
};

namespace detail {

// Unchecked kernels: y >= 0, lambda > 0 and tau > 0 are the caller's job.
// `log_y_fact` is log(y!), passed in so repeated evaluations can cache it.

template <class Real>
Real log_factorial(Count y) {
  return lgamma_safe(static_cast<Real>(y) + 1);
}

template <class Real>
Real poisson_log_pmf(Count y, Real lambda, Real log_y_fact) {
  return static_cast<Real>(y) * std::log(lambda) - lambda - log_y_fact;
}

template <class Real>
Real nb_log_zero_prob(Real lambda, Real tau) {
  return -tau * std::log1p(lambda / tau);
}

template <class Real>
Real nb_log_pmf(Count y, Real lambda, Real tau, Real log_y_fact) {
  const Real log_p0 = nb_log_zero_prob(lambda, tau);
  if (y == 0) return log_p0;

  const Real yd = static_cast<Real>(y);
  if (y <= kSmallCount) {
    // sum_k log((tau + k) / (lambda + tau)) = log Gamma(y+tau) - log Gamma(tau) - y log(lambda+tau)
    Real ratio = 0;
    const Real denom = lambda + tau;
    for (Count k = 0; k < y; ++k) ratio += std::log1p((static_cast<Real>(k) - lambda) / denom);
    return ratio + yd * std::log(lambda) - log_y_fact + log_p0;
  }
  return lgamma_safe(yd + tau) - lgamma_safe(tau) - log_y_fact + log_p0 +
         yd * (std::log(lambda) - std::log(lambda + tau));
}

/// ZINB log-pmf with the zero part given on the logit scale, so that p near
/// 0 or 1 keeps full precision in log p and log(1 - p).
template <class Real>
Real zinb_log_pmf_logit(Count y, Real lambda, Real tau, Real zero_logit, Real log_y_fact) {
  const Real log_p = -softplus(-zero_logit);
  const Real log_1mp = -softplus(zero_logit);
  if (y == 0) return log_add_exp(log_p, log_1mp + nb_log_zero_prob(lambda, tau));
  return log_1mp + nb_log_pmf(y, lambda, tau, log_y_fact);
}

inline double zinb_log_pmf_logit(Count y, const NbParams& nb, double zero_logit) {
  return zinb_log_pmf_logit(y, nb.lambda(), nb.tau(), zero_logit, y == 0 ? 0.0 : log_factorial<double>(y));
}

}  // namespace detail

inline double poisson_log_pmf(Count y, double lambda) {
  detail::check_count(y);
  if (!std::isfinite(lambda) || lambda <= 0.0)
    throw DomainError("Poisson mean must be finite and positive");
  return detail::poisson_log_pmf(y, lambda, detail::log_factorial<double>(y));
}

/// log P(Y = 0) under NB: tau * log(tau / (lambda + tau)).
inline double nb_log_zero_prob(const NbParams& nb) { return detail::nb_log_zero_prob(nb.lambda(), nb.tau()); }

inline double nb_log_pmf(Count y, const NbParams& nb) {
  detail::check_count(y);
  return detail::nb_log_pmf(y, nb.lambda(), nb.tau(), detail::log_factorial<double>(y));
}

inline double zinb_log_pmf(Count y, const ZinbParams& params) {
  detail::check_count(y);
  const double p = params.p();
  const double log_1mp = std::log1p(-p);
  if (y == 0) {
    const double log_p = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
    return detail::log_add_exp(log_p, log_1mp + nb_log_zero_prob(params.nb()));
  }
  return log_1mp + nb_log_pmf(y, params.nb());
}

inline Moments nb_moments(const NbParams& nb) {
  const double lambda = nb.lambda();
  return {lambda, lambda + lambda * lambda / nb.tau()};
}

inline Moments zinb_moments(const ZinbParams& params) {
  const double p = params.p();
  const double lambda = params.nb().lambda();
  const double tau = params.nb().tau();
  return {(1.0 - p) * lambda, (1.0 - p) * lambda * (1.0 + p * lambda + lambda / tau)};
}

// Single draws. The NB draw is a gamma-Poisson mixture: a rate from
// Gamma(shape tau, scale lambda/tau), then a Poisson count at that rate.

/// Largest rate a count can be drawn at; keeps draws exact in double and
/// far inside the Count range.
inline constexpr double kMaxDrawRate = 1e15;

template <class Urbg>
Count draw_poisson(double rate, Urbg& rng) {
  if (!(rate > 0.0)) return 0;
  if (!(rate <= kMaxDrawRate)) throw DomainError("Poisson rate too large to draw a count");
  return std::poisson_distribution<Count>(rate)(rng);
}

template <class Urbg>
Count draw_nb(const NbParams& nb, Urbg& rng) {
  const double rate =
      std::gamma_distribution<double>(nb.tau(), nb.lambda() / nb.tau())(rng);
  return draw_poisson(rate, rng);
}

template <class Urbg>
Count draw_zinb(const ZinbParams& params, Urbg& rng) {
  // The gate is skipped at p = 0 so the stream matches sample_nb exactly.
  const bool structural =
      params.p() > 0.0 && std::bernoulli_distribution(params.p())(rng);
  const Count y = draw_nb(params.nb(), rng);
  return structural ? 0 : y;
}

inline std::vector<Count> sample_nb(const NbParams& nb, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample size must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<Count> out(n);
  for (auto& y : out) y = draw_nb(nb, rng);
  return out;
}

inline std::vector<Count> sample_zinb(const ZinbParams& params, std::size_t n,
                                      std::uint64_t seed) {
  if (n == 0) throw DomainError("sample size must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<Count> out(n);
  for (auto& y : out) y = draw_zinb(params, rng);
  return out;
}

}  // namespace countreg
