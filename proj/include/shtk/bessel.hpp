#pragma once

#include "shtk/common.hpp"

namespace shtk {

// Modified Bessel function of the first kind, order nu > -1.
//
// Below the crossover the positive-term power series
//   I_nu(z) = sum_m (z/2)^{2m+nu} / (m! Gamma(m+nu+1))
// is exact to machine precision (no cancellation). Above it the large-z
// expansion
//   I_nu(z) = e^z/sqrt(2 pi z) * sum_k (-1)^k [nu,k] (2z)^{-k}
// truncated at its smallest term is used; the exponentially small second
// component is below 1e-13 relative for z >= 15.
class BesselEval {
 public:
  explicit BesselEval(double nu, double crossover = 20.0) : nu_(nu), z_star_(crossover) {
    require(nu > -1.0, "Bessel order must exceed -1");
  }

  double nu() const { return nu_; }
  double crossover() const { return z_star_; }

  // e^{-z} I_nu(z); safe for arbitrarily large z.
  double scaled(double z) const {
    require(z > 0.0, "Bessel argument must be positive");
    return z < z_star_ ? series_sum(z) * std::exp(-z) : asymptotic_scaled(z);
  }

  double value(double z) const {
    require(z > 0.0, "Bessel argument must be positive");
    return z < z_star_ ? series_sum(z) : asymptotic_scaled(z) * std::exp(z);
  }

  // Both branches evaluated at one point (band-agreement diagnostics).
  std::pair<double, double> branches(double z) const {
    return {series_sum(z), asymptotic_scaled(z) * std::exp(z)};
  }

  // [nu,k] coefficients of the large-z expansion; [nu,0] = 1.
  static double bracket(double nu, int k) {
    double num = 1.0;
    for (int j = 1; j <= k; ++j) {
      double odd = 2.0 * j - 1.0;
      num *= 4.0 * nu * nu - odd * odd;
    }
    return num / (std::pow(4.0, k) * std::tgamma(double(k) + 1.0));
  }

 private:
  double series_sum(double z) const {
    double half = 0.5 * z;
    // leading term (z/2)^nu / Gamma(nu+1) via logs to stay stable near nu ~ -1
    double term = std::exp(nu_ * std::log(half) - std::lgamma(nu_ + 1.0));
    double sum = term;
    for (int m = 1; m < 400; ++m) {
      term *= half * half / (double(m) * (double(m) + nu_));
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return sum;
  }

  double asymptotic_scaled(double z) const {
    double pref = 1.0 / std::sqrt(2.0 * M_PI * z);
    double sum = 1.0;
    double term = 1.0;
    double prev = std::abs(term);
    for (int k = 1; k < 60; ++k) {
      double odd = 2.0 * k - 1.0;
      term *= -(4.0 * nu_ * nu_ - odd * odd) / (8.0 * z * double(k));
      if (std::abs(term) > prev) break;  // divergent tail: stop at smallest term
      sum += term;
      prev = std::abs(term);
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return pref * sum;
  }

  double nu_;
  double z_star_;
};

inline double bessel_i(double nu, double z) { return BesselEval(nu).value(z); }
inline double bessel_i_scaled(double nu, double z) { return BesselEval(nu).scaled(z); }

}  // namespace shtk
