#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "numeric.hpp"
#include "perm.hpp"

namespace usp {

//! Fourier coefficients of one marginal density: cos_coeffs[m-1] and
//! sin_coeffs[m-1] hold a_{(0,m).} and a_{(1,m).}. Missing entries are zero.
struct MarginalSpectrum
{
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;

  double cos_at(std::size_t m) const
  {
    return m - 1 < cos_coeffs.size() ? cos_coeffs[m - 1] : 0.0;
  }
  double sin_at(std::size_t m) const
  {
    return m - 1 < sin_coeffs.size() ? sin_coeffs[m - 1] : 0.0;
  }
};

//! 2M + 1 + sum_{m=1}^{2M} (2M + 1 - m)(a_{(0,m).}^2 + a_{(1,m).}^2).
inline double
sigma_squared(const MarginalSpectrum& spectrum, int M)
{
  if (M < 1)
    throw DomainError("sigma_squared: M must be >= 1");
  const auto top = static_cast<std::size_t>(2 * M);
  double s = 0.0;
  for (std::size_t m = 1; m <= top; ++m) {
    const double c = spectrum.cos_at(m);
    const double d = spectrum.sin_at(m);
    s += static_cast<double>(top + 1 - m) * (c * c + d * d);
  }
  return static_cast<double>(top + 1) + s;
}

//! 1 + sum_{m=1}^{2M} (|a_{(0,m).}| + |a_{(1,m).}|). Diagnostic only.
inline double
spectrum_a_constant(const MarginalSpectrum& spectrum, int M)
{
  if (M < 1)
    throw DomainError("spectrum_a_constant: M must be >= 1");
  double s = 1.0;
  for (std::size_t m = 1; m <= static_cast<std::size_t>(2 * M); ++m)
    s += std::abs(spectrum.cos_at(m)) + std::abs(spectrum.sin_at(m));
  return s;
}

//! sqrt(C(n,2)) * gap_energy / (sigma_x sigma_y), where gap_energy is the
//! sum over the truncation set of (a_jk - a_j. a_.k)^2.
inline double
delta_f(double gap_energy, std::size_t n, double sigma_x, double sigma_y)
{
  if (n < 2)
    throw DomainError("delta_f: n must be >= 2");
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0))
    throw DomainError("delta_f: sigmas must be positive");
  if (gap_energy < 0.0)
    throw DomainError("delta_f: gap energy must be nonnegative");
  const double nd = static_cast<double>(n);
  return std::sqrt(0.5 * nd * (nd - 1.0)) * gap_energy / (sigma_x * sigma_y);
}

inline double
delta_f(std::span<const double> gaps, std::size_t n, double sigma_x,
        double sigma_y)
{
  const double energy = numeric::pairwise_sum(
    0, gaps.size(), [&](std::size_t i) { return gaps[i] * gaps[i]; });
  return delta_f(energy, n, sigma_x, sigma_y);
}

//! Noncentrality of the density 1 + 2 rho sin(2 pi x) sin(2 pi y) under the
//! rectangle truncation of level M. Its only nonzero coefficient gap is rho
//! and both marginals are uniform.
inline double
frho_delta(double rho, std::size_t n, int M)
{
  const double sigma = std::sqrt(sigma_squared({}, M));
  return delta_f(rho * rho, n, sigma, sigma);
}

struct PowerInputs
{
  std::size_t n = 0;
  int M = 0;
  std::size_t B = 99;
  double alpha = 0.05;
  double delta = 0.0;
};

//! s with P(p-value <= alpha) = (s + 1)/(B + 1) under the null, i.e.
//! ceil(alpha (B + 1)) - 1 evaluated with the test's own comparison.
inline long long
power_shape_s(std::size_t B, double alpha)
{
  return max_rejecting_count(B, alpha, false);
}

//! E Phibar(Phi^{-1}(U) - delta) with U ~ Beta(B - s, s + 1), by 256-node
//! Gauss-Legendre quadrature over the central (1 - 2e-15) mass of U.
inline double
approx_power(double delta, std::size_t B, double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("approx_power: alpha must lie in (0, 1)");
  if (B < 1)
    throw DomainError("approx_power: B must be >= 1");
  if (delta < 0.0)
    throw DomainError("approx_power: delta must be nonnegative");
  const long long s = power_shape_s(B, alpha);
  if (s < 0 || s >= static_cast<long long>(B))
    throw DomainError(
      "approx_power: need 1 <= alpha (B + 1) and s + 1 <= B for the Beta law");
  const double a = static_cast<double>(static_cast<long long>(B) - s);
  const double b = static_cast<double>(s + 1);
  const double lo = std::max(1e-12, boost::math::ibeta_inv(a, b, 1e-15));
  const double hi =
    std::min(1.0 - 1e-12, boost::math::ibetac_inv(a, b, 1e-15));
  static const auto rule = numeric::gauss_legendre(256);
  const double value = numeric::integrate(rule, lo, hi, [&](double u) {
    return boost::math::ibeta_derivative(a, b, u) *
           numeric::normal_sf(numeric::normal_quantile(u) - delta);
  });
  return std::clamp(value, 0.0, 1.0);
}

inline double
approx_power(const PowerInputs& in)
{
  return approx_power(in.delta, in.B, in.alpha);
}

//! Phibar(Phi^{-1}(1 - alpha) - delta).
inline double
oracle_power(double delta, double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("oracle_power: alpha must lie in (0, 1)");
  return numeric::normal_sf(numeric::normal_quantile(1.0 - alpha) - delta);
}

} // namespace usp
