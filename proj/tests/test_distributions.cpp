#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "countreg/distributions.hpp"

using namespace countreg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Direct closed form with tgamma/pow; only valid for small y and moderate tau.
double nb_pmf_closed_form(int y, double lambda, double tau) {
  return std::tgamma(y + tau) / (std::tgamma(y + 1.0) * std::tgamma(tau)) * std::pow(tau / (lambda + tau), tau) *
         std::pow(lambda / (lambda + tau), y);
}

double poisson_pmf(int y, double lambda) { return std::exp(-lambda) * std::pow(lambda, y) / std::tgamma(y + 1.0); }

struct SampleMoments {
  double mean, variance, se_mean, se_variance;
};

SampleMoments sample_moments(const std::vector<Count>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0;
  for (auto x : xs) mean += static_cast<double>(x);
  mean /= n;
  double m2 = 0, m4 = 0;
  for (auto x : xs) {
    const double d = static_cast<double>(x) - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m4 /= n;
  const double var = m2 / (n - 1);
  return {mean, var, std::sqrt(var / n), std::sqrt(std::max(m4 - var * var, 0.0) / n)};
}

// Sums exp(log_pmf) up to a Y* where the remaining tail is provably < 1e-12:
// beyond the mode the pmf ratio P(y+1)/P(y) is bounded by rho < 1.
template <class LogPmf>
double truncated_mass(LogPmf log_pmf, double lambda, double tau) {
  double total = 0.0;
  for (Count y = 0;; ++y) {
    const double p = std::exp(log_pmf(y));
    total += p;
    const double yd = static_cast<double>(y);
    const double ratio = (yd + tau) / (yd + 1.0) * lambda / (lambda + tau);
    const double rho = std::max(ratio, lambda / (lambda + tau));
    if (yd > lambda && ratio < 1.0 && p * rho / (1.0 - rho) < 1e-12) break;
    REQUIRE(y < 1000000);
  }
  return total;
}

}  // namespace

TEST_CASE("nb_log_pmf matches hand and high-precision values", "[distributions]") {
  CHECK_THAT(nb_log_pmf(0, NbParams(1.0, 1.0)), WithinAbs(std::log(0.5), 1e-15));
  for (double lambda : {0.3, 2.0, 17.0})
    for (double tau : {0.5, 3.0, 100.0})
      CHECK_THAT(nb_log_pmf(0, NbParams(lambda, tau)), WithinAbs(tau * std::log(tau / (lambda + tau)), 1e-12));

  // mpmath, 40 digits.
  CHECK_THAT(nb_log_pmf(3, NbParams(2.0, 5.0)), WithinAbs(-1.885302027102754959881, 1e-13));
  CHECK_THAT(nb_log_pmf(2, NbParams(2.0, 5.0)), WithinAbs(-1.479836918994590577904, 1e-13));
}

TEST_CASE("nb_log_pmf agrees with the raw closed form", "[distributions]") {
  for (int y : {0, 1, 4, 9, 20})
    for (double lambda : {0.1, 1.0, 6.5})
      for (double tau : {0.5, 2.0, 30.0})
        CHECK_THAT(nb_log_pmf(y, NbParams(lambda, tau)),
                   WithinAbs(std::log(nb_pmf_closed_form(y, lambda, tau)), 1e-10));
}

TEST_CASE("large counts take the log-gamma path consistently", "[distributions]") {
  // y = 64 and 65 straddle the product/log-gamma switch.
  const NbParams nb(50.0, 3.0);
  const double at64 = nb_log_pmf(64, nb);
  const double at65 = nb_log_pmf(65, nb);
  const double ratio = (64.0 + 3.0) / 65.0 * 50.0 / 53.0;
  CHECK_THAT(at65 - at64, WithinAbs(std::log(ratio), 1e-11));
}

TEST_CASE("parameter domain is enforced", "[distributions]") {
  CHECK_THROWS_AS(NbParams(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(NbParams(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(NbParams(NAN, 1.0), DomainError);
  CHECK_THROWS_AS(NbParams(1.0, 1e-10), DomainError);
  CHECK_THROWS_AS(NbParams(1.0, INFINITY), DomainError);
  CHECK_NOTHROW(NbParams(1.0, 2e-10));
  CHECK_THROWS_AS(ZinbParams(NbParams(1.0, 1.0), 1.0), DomainError);
  CHECK_THROWS_AS(ZinbParams(NbParams(1.0, 1.0), -0.1), DomainError);
  CHECK_THROWS_AS(nb_log_pmf(-1, NbParams(1.0, 1.0)), DomainError);
  CHECK_THROWS_AS(poisson_log_pmf(2, 0.0), DomainError);
}

TEST_CASE("zinb_log_pmf branches", "[distributions]") {
  const NbParams one(1.0, 1.0);
  CHECK_THAT(zinb_log_pmf(0, ZinbParams(one, 0.5)), WithinAbs(std::log(0.75), 1e-15));

  const NbParams nb(2.0, 5.0);
  CHECK_THAT(zinb_log_pmf(2, ZinbParams(nb, 0.3)), WithinAbs(std::log(0.7) + nb_log_pmf(2, nb), 1e-15));
  CHECK_THAT(zinb_log_pmf(2, ZinbParams(nb, 0.3)), WithinAbs(-1.836511862933322956815, 1e-13));

  // p = 0 reduces to NB.
  for (Count y = 0; y < 30; ++y)
    for (double lambda : {0.1, 1.0, 10.0})
      for (double tau : {0.5, 2.0, 50.0}) {
        const NbParams p(lambda, tau);
        CHECK_THAT(zinb_log_pmf(y, ZinbParams(p, 0.0)), WithinAbs(nb_log_pmf(y, p), 1e-12));
      }
}

TEST_CASE("zero branch stays accurate with p near 0 and 1", "[distributions]") {
  const NbParams nb(3.0, 2.0);
  const double log_f0 = nb_log_zero_prob(nb);
  const double tiny = 1e-300;
  CHECK_THAT(zinb_log_pmf(0, ZinbParams(nb, tiny)), WithinAbs(log_f0, 1e-14));
  const double near_one = 1.0 - 1e-15;
  CHECK(zinb_log_pmf(0, ZinbParams(nb, near_one)) <= 0.0);
  CHECK_THAT(zinb_log_pmf(0, ZinbParams(nb, near_one)), WithinAbs(0.0, 1e-14));
}

TEST_CASE("pmfs normalize over the 27-point grid", "[distributions][invariant]") {
  for (double lambda : {0.1, 1.0, 10.0})
    for (double tau : {0.5, 2.0, 50.0})
      for (double p : {0.0, 0.3, 0.8}) {
        const ZinbParams zp(NbParams(lambda, tau), p);
        const double mass = truncated_mass([&](Count y) { return zinb_log_pmf(y, zp); }, lambda, tau);
        INFO("lambda=" << lambda << " tau=" << tau << " p=" << p);
        CHECK(mass >= 1.0 - 1e-10);
        CHECK(mass <= 1.0 + 1e-12);
      }
}

TEST_CASE("NB tends to Poisson as tau grows", "[distributions][invariant]") {
  for (double lambda : {0.5, 1.0, 5.0})
    for (int y = 0; y <= 20; ++y)
      CHECK_THAT(std::exp(nb_log_pmf(y, NbParams(lambda, 1e8))), WithinAbs(poisson_pmf(y, lambda), 1e-6));
}

TEST_CASE("closed-form moments", "[distributions]") {
  auto m = nb_moments(NbParams(1.0, 1.0));
  CHECK(m.mean == 1.0);
  CHECK(m.variance == 2.0);
  m = nb_moments(NbParams(2.0, 4.0));
  CHECK(m.mean == 2.0);
  CHECK(m.variance == 3.0);
  CHECK_THAT(nb_moments(NbParams(0.701, 1e12)).variance, WithinAbs(0.701, 1e-9));

  auto z = zinb_moments(ZinbParams(NbParams(2.0, 2.0), 0.5));
  CHECK(z.mean == 1.0);
  CHECK(z.variance == 3.0);
  const NbParams nb(1.7, 0.9);
  z = zinb_moments(ZinbParams(nb, 0.0));
  CHECK(z.mean == nb_moments(nb).mean);
  CHECK_THAT(z.variance, WithinRel(nb_moments(nb).variance, 1e-15));
  z = zinb_moments(ZinbParams(nb, 1.0 - 1e-12));
  CHECK(z.mean < 1e-11);
  CHECK(z.variance < 1e-10);
}

TEST_CASE("samplers are deterministic and match moments", "[distributions][sampling]") {
  const NbParams nb(1.0, 1.0);
  const auto a = sample_nb(nb, 100000, 7);
  CHECK(a == sample_nb(nb, 100000, 7));
  CHECK(a != sample_nb(nb, 100000, 8));
  const auto s = sample_moments(a);
  CHECK(std::abs(s.mean - 1.0) < 4.0 * s.se_mean);

  const auto pois = sample_moments(sample_nb(NbParams(3.0, 1e6), 100000, 11));
  const double ratio_se = std::sqrt(2.0 / 100000.0);  // var/mean of a Poisson sample
  CHECK(std::abs(pois.variance / pois.mean - 1.0) < 5.0 * ratio_se);

  CHECK_THROWS_AS(sample_nb(nb, 0, 1), DomainError);
}

TEST_CASE("zinb sampler", "[distributions][sampling]") {
  const NbParams nb(2.0, 2.0);
  const auto near_one = sample_zinb(ZinbParams(nb, 1.0 - 1e-9), 10000, 3);
  CHECK(std::count(near_one.begin(), near_one.end(), 0) >= 9999);

  CHECK(sample_zinb(ZinbParams(nb, 0.0), 5000, 21) == sample_nb(nb, 5000, 21));

  const ZinbParams zp(nb, 0.3);
  const auto s = sample_moments(sample_zinb(zp, 100000, 5));
  CHECK(std::abs(s.mean - zinb_moments(zp).mean) < 4.0 * s.se_mean);
}

TEST_CASE("sampled moments agree with closed forms", "[distributions][invariant]") {
  std::uint64_t seed = 100;
  for (double lambda : {0.5, 4.0})
    for (double tau : {0.7, 5.0})
      for (double p : {0.0, 0.4}) {
        const ZinbParams zp(NbParams(lambda, tau), p);
        const auto s = sample_moments(sample_zinb(zp, 100000, seed++));
        const auto m = zinb_moments(zp);
        INFO("lambda=" << lambda << " tau=" << tau << " p=" << p);
        CHECK(std::abs(s.mean - m.mean) < 5.0 * s.se_mean);
        CHECK(std::abs(s.variance - m.variance) < 5.0 * s.se_variance);
      }
}

TEST_CASE("draws at rates beyond the count range are refused", "[distributions][sampling]") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(draw_poisson(std::exp(45.0), rng), DomainError);
  CHECK_THROWS_AS(sample_nb(NbParams(std::exp(45.0), 1e6), 3, 1), DomainError);
  CHECK(draw_poisson(1e12, rng) > 0);
}
