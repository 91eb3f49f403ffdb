#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace usp {

//! Raised when an argument lies outside the domain of an operation.
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

namespace numeric {

//! Standard normal cumulative distribution function.
inline double
normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

//! Upper tail 1 - Phi(x), accurate in the far right tail.
inline double
normal_sf(double x)
{
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

//! Standard normal quantile. Returns +-infinity at the endpoints.
inline double
normal_quantile(double p)
{
  if (!(p >= 0.0 && p <= 1.0))
    throw DomainError("normal_quantile: probability outside [0,1]");
  if (p == 0.0)
    return -std::numeric_limits<double>::infinity();
  if (p == 1.0)
    return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

//! Upper tail probability of the chi-squared distribution.
inline double
chi_squared_sf(double x, double df)
{
  if (df <= 0.0)
    throw DomainError("chi_squared_sf: degrees of freedom must be positive");
  if (x <= 0.0)
    return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

//! Pairwise (tree) summation of term(0), ..., term(count - 1).
template<class Term>
double
pairwise_sum(std::size_t first, std::size_t count, const Term& term)
{
  constexpr std::size_t leaf = 16;
  if (count <= leaf) {
    double s = 0.0;
    for (std::size_t i = first; i < first + count; ++i)
      s += term(i);
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(first, half, term) +
         pairwise_sum(first + half, count - half, term);
}

inline double
pairwise_sum(std::span<const double> values)
{
  return pairwise_sum(0, values.size(),
                      [&](std::size_t i) { return values[i]; });
}

//! Streaming pairwise summation: terms are summed sequentially in blocks of
//! 256 and block sums are merged like a binary counter, so the rounding error
//! grows with log(count) rather than count.
class PairwiseAccumulator
{
public:
  void add(double v)
  {
    block_ += v;
    if (++in_block_ == block_size)
      flush();
  }

  double total() const
  {
    double s = block_;
    for (std::size_t level = 0; level < stack_.size(); ++level)
      if (occupied_[level])
        s += stack_[level];
    return s;
  }

private:
  static constexpr std::size_t block_size = 256;

  void flush()
  {
    double carry = block_;
    block_ = 0.0;
    in_block_ = 0;
    std::size_t level = 0;
    while (level < stack_.size() && occupied_[level]) {
      carry += stack_[level];
      occupied_[level] = false;
      ++level;
    }
    if (level == stack_.size()) {
      stack_.push_back(0.0);
      occupied_.push_back(false);
    }
    stack_[level] = carry;
    occupied_[level] = true;
  }

  double block_ = 0.0;
  std::size_t in_block_ = 0;
  std::vector<double> stack_;
  std::vector<bool> occupied_;
};

//! Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
//! on the Legendre recurrence.
struct GaussLegendreRule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLegendreRule
gauss_legendre(std::size_t order)
{
  if (order == 0)
    throw DomainError("gauss_legendre: order must be positive");
  GaussLegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const auto n = static_cast<double>(order);
  for (std::size_t i = 0; i < (order + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (n + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (std::size_t k = 1; k <= order; ++k) {
        const double p2 = p1;
        p1 = p0;
        const auto kd = static_cast<double>(k);
        p0 = ((2.0 * kd - 1.0) * z * p1 - (kd - 1.0) * p2) / kd;
      }
      derivative = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / derivative;
      z -= step;
      if (std::abs(step) < 1e-16)
        break;
    }
    const double w = 2.0 / ((1.0 - z * z) * derivative * derivative);
    rule.nodes[i] = -z;
    rule.nodes[order - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  return rule;
}

//! Integral of f over [a, b] with a fixed Gauss-Legendre rule.
template<class F>
double
integrate(const GaussLegendreRule& rule, double a, double b, const F& f)
{
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  return half * pairwise_sum(0, rule.nodes.size(), [&](std::size_t i) {
           return rule.weights[i] * f(mid + half * rule.nodes[i]);
         });
}

//! Composite trapezoid rule for samples on a uniform grid of [0, 1].
inline double
trapezoid_unit(std::span<const double> values)
{
  if (values.size() < 2)
    throw DomainError("trapezoid_unit: need at least two grid points");
  const std::size_t last = values.size() - 1;
  const double interior = pairwise_sum(
    1, last - 1, [&](std::size_t i) { return values[i]; });
  return (0.5 * (values[0] + values[last]) + interior) /
         static_cast<double>(last);
}

} // namespace numeric
} // namespace usp
