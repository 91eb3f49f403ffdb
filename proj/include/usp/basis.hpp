#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "numeric.hpp"
#include "sample.hpp"

namespace usp {

// ---------------------------------------------------------------------------
// Index types
// ---------------------------------------------------------------------------

//! Fourier basis index (a, m): parity a in {0,1}, frequency vector m.
//! (1, 0) is not a valid index; (0, 0) is the constant function.
struct FourierIndex
{
  int parity = 0;
  std::vector<int> freq;

  FourierIndex() = default;
  FourierIndex(int a, std::vector<int> m)
    : parity(a)
    , freq(std::move(m))
  {
    if (parity != 0 && parity != 1)
      throw DomainError("FourierIndex: parity must be 0 or 1");
    if (freq.empty())
      throw DomainError("FourierIndex: empty frequency vector");
    for (int v : freq)
      if (v < 0)
        throw DomainError("FourierIndex: negative frequency");
    if (parity == 1 && norm() == 0)
      throw DomainError("FourierIndex: (1, 0) is not a basis index");
  }

  int norm() const { return std::accumulate(freq.begin(), freq.end(), 0); }
  std::size_t dimension() const { return freq.size(); }

  friend bool operator==(const FourierIndex&, const FourierIndex&) = default;

  //! Ordered by (|m|_1, a, m lexicographically).
  friend std::strong_ordering operator<=>(const FourierIndex& lhs,
                                          const FourierIndex& rhs)
  {
    if (auto c = lhs.norm() <=> rhs.norm(); c != 0)
      return c;
    if (auto c = lhs.parity <=> rhs.parity; c != 0)
      return c;
    return lhs.freq <=> rhs.freq;
  }
};

inline bool
is_constant(const FourierIndex& idx)
{
  return idx.norm() == 0;
}

inline std::string
to_string(const FourierIndex& idx)
{
  std::string s = "(" + std::to_string(idx.parity) + ",[";
  for (std::size_t i = 0; i < idx.freq.size(); ++i)
    s += (i ? "," : "") + std::to_string(idx.freq[i]);
  return s + "])";
}

//! Category j of a discrete variable taking values in {1, ..., J}.
struct CategoryIndex
{
  int category = 1;
  friend auto operator<=>(const CategoryIndex&, const CategoryIndex&) =
    default;
};

inline bool
is_constant(const CategoryIndex&)
{
  return false;
}

inline std::string
to_string(const CategoryIndex& idx)
{
  return std::to_string(idx.category);
}

//! Index (level l, frequency m) of the functional basis built from the
//! transformed Wiener-series coefficients.
struct BrownianIndex
{
  int level = 1;
  int freq = 1;
  friend auto operator<=>(const BrownianIndex&, const BrownianIndex&) =
    default;
};

inline bool
is_constant(const BrownianIndex&)
{
  return false;
}

inline std::string
to_string(const BrownianIndex& idx)
{
  return "(" + std::to_string(idx.level) + "," + std::to_string(idx.freq) +
         ")";
}

// ---------------------------------------------------------------------------
// Pointwise evaluation
// ---------------------------------------------------------------------------

inline void
check_unit_cube(std::span<const double> x)
{
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError("Fourier basis: coordinate outside [0,1]");
}

//! sqrt(2) cos(a pi/2 + 2 pi <m, x>), or 1 for the constant index.
inline double
fourier_eval(const FourierIndex& idx, std::span<const double> x)
{
  if (idx.freq.size() != x.size())
    throw DomainError("fourier_eval: index and point dimensions differ");
  check_unit_cube(x);
  if (is_constant(idx))
    return 1.0;
  double phase = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l)
    phase += static_cast<double>(idx.freq[l]) * x[l];
  phase -= std::floor(phase);
  const double angle = 2.0 * std::numbers::pi * phase;
  return idx.parity == 0 ? std::numbers::sqrt2 * std::cos(angle)
                         : -std::numbers::sqrt2 * std::sin(angle);
}

inline double
indicator_eval(int category, int x)
{
  return category == x ? 1.0 : 0.0;
}

//! Phi(sqrt(2) (l - 1/2) pi * int_0^1 W_t sin((l - 1/2) pi t) dt), with the
//! integral taken by the trapezoid rule on the uniform grid of the path.
inline double
bm_coefficient(std::span<const double> path, int level)
{
  if (path.empty())
    throw DomainError("bm_coefficient: empty path");
  if (path.size() < 2)
    throw DomainError("bm_coefficient: need at least two grid points");
  if (level < 1)
    throw DomainError("bm_coefficient: level must be >= 1");
  const double w = (static_cast<double>(level) - 0.5) * std::numbers::pi;
  const double step = 1.0 / static_cast<double>(path.size() - 1);
  std::vector<double> integrand(path.size());
  for (std::size_t g = 0; g < path.size(); ++g)
    integrand[g] = path[g] * std::sin(w * static_cast<double>(g) * step);
  const double integral = numeric::trapezoid_unit(integrand);
  return numeric::normal_cdf(std::numbers::sqrt2 * w * integral);
}

inline double
bm_basis_eval(std::span<const double> path, int level, int freq)
{
  if (freq < 1)
    throw DomainError("bm_basis_eval: frequency must be >= 1");
  const double u = bm_coefficient(path, level);
  return std::numbers::sqrt2 *
         std::cos(2.0 * std::numbers::pi * static_cast<double>(freq) * u);
}

// ---------------------------------------------------------------------------
// Basis families. Each exposes evaluate() for a single observation and
// features() for an n x p matrix with column j holding p_j(x_i).
// ---------------------------------------------------------------------------

class FourierBasis
{
public:
  using index_type = FourierIndex;

  explicit FourierBasis(std::size_t dim = 1)
    : dim_(dim)
  {
    if (dim == 0)
      throw DomainError("FourierBasis: dimension must be positive");
  }

  std::size_t dimension() const { return dim_; }

  double evaluate(const FourierIndex& idx, std::span<const double> x) const
  {
    return fourier_eval(idx, x);
  }

  Eigen::MatrixXd features(const Points& obs,
                           std::span<const FourierIndex> indices) const
  {
    check_points(obs);
    Eigen::MatrixXd f(obs.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j].dimension() != dim_)
        throw DomainError("FourierBasis: index dimension mismatch");
      for (Eigen::Index i = 0; i < obs.rows(); ++i)
        f(i, static_cast<Eigen::Index>(j)) =
          fourier_eval(indices[j], row_span(obs, i));
    }
    return f;
  }

  void check_points(const Points& obs) const
  {
    if (static_cast<std::size_t>(obs.cols()) != dim_)
      throw DomainError("FourierBasis: point dimension mismatch");
    for (Eigen::Index i = 0; i < obs.rows(); ++i)
      check_unit_cube(row_span(obs, i));
  }

private:
  std::size_t dim_;
};

class IndicatorBasis
{
public:
  using index_type = CategoryIndex;

  explicit IndicatorBasis(int levels)
    : levels_(levels)
  {
    if (levels < 1)
      throw DomainError("IndicatorBasis: need at least one category");
  }

  int levels() const { return levels_; }

  double evaluate(const CategoryIndex& idx, std::span<const double> x) const
  {
    return indicator_eval(idx.category, label(x));
  }

  Eigen::MatrixXd features(const Points& obs,
                           std::span<const CategoryIndex> indices) const
  {
    Eigen::MatrixXd f(obs.rows(), static_cast<Eigen::Index>(indices.size()));
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      const int x = label(row_span(obs, i));
      for (std::size_t j = 0; j < indices.size(); ++j)
        f(i, static_cast<Eigen::Index>(j)) =
          indicator_eval(indices[j].category, x);
    }
    return f;
  }

private:
  int label(std::span<const double> x) const
  {
    if (x.size() != 1)
      throw DomainError("IndicatorBasis: observation must be a single label");
    const double v = x[0];
    if (!(v >= 1.0 && v <= levels_) || v != std::floor(v))
      throw DomainError("IndicatorBasis: label outside {1, ..., J}");
    return static_cast<int>(v);
  }

  int levels_;
};

//! Resolution of the functional basis: number of coefficient levels L and
//! grid resolution of the sampled paths.
struct BmCoefficientConfig
{
  int levels = 2;
  std::size_t grid_points = 1000;

  void validate() const
  {
    if (levels < 1)
      throw DomainError("BmCoefficientConfig: L must be >= 1");
    if (grid_points < 2)
      throw DomainError("BmCoefficientConfig: grid_points must be >= 2");
  }
};

class BrownianBasis
{
public:
  using index_type = BrownianIndex;

  double evaluate(const BrownianIndex& idx, std::span<const double> path) const
  {
    return bm_basis_eval(path, idx.level, idx.freq);
  }

  Eigen::MatrixXd features(const Points& paths,
                           std::span<const BrownianIndex> indices) const
  {
    int max_level = 0;
    for (const auto& idx : indices) {
      if (idx.level < 1 || idx.freq < 1)
        throw DomainError("BrownianBasis: level and frequency must be >= 1");
      max_level = std::max(max_level, idx.level);
    }
    Eigen::MatrixXd u(paths.rows(), max_level);
    for (Eigen::Index i = 0; i < paths.rows(); ++i)
      for (int l = 1; l <= max_level; ++l)
        u(i, l - 1) = bm_coefficient(row_span(paths, i), l);
    Eigen::MatrixXd f(paths.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j)
      for (Eigen::Index i = 0; i < paths.rows(); ++i)
        f(i, static_cast<Eigen::Index>(j)) =
          std::numbers::sqrt2 *
          std::cos(2.0 * std::numbers::pi *
                   static_cast<double>(indices[j].freq) *
                   u(i, indices[j].level - 1));
    return f;
  }
};

// ---------------------------------------------------------------------------
// Truncation sets
// ---------------------------------------------------------------------------

//! Finite, duplicate-free list of (left, right) basis-index pairs. Pairs keep
//! their insertion order; duplicates are dropped on construction and any
//! pair touching a constant basis function is rejected.
template<class Left, class Right>
class TruncationSet
{
public:
  using left_type = Left;
  using right_type = Right;
  using pair_type = std::pair<Left, Right>;

  TruncationSet() = default;

  explicit TruncationSet(std::vector<pair_type> pairs)
  {
    std::set<pair_type> seen;
    pairs_.reserve(pairs.size());
    for (auto& p : pairs) {
      if (is_constant(p.first) || is_constant(p.second))
        throw DomainError(
          "TruncationSet: pairs may not involve the constant basis function");
      if (seen.insert(p).second)
        pairs_.push_back(std::move(p));
    }
  }

  static TruncationSet product(const std::vector<Left>& left,
                               const std::vector<Right>& right)
  {
    std::vector<pair_type> pairs;
    pairs.reserve(left.size() * right.size());
    for (const auto& l : left)
      for (const auto& r : right)
        pairs.emplace_back(l, r);
    return TruncationSet(std::move(pairs));
  }

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<pair_type>& pairs() const { return pairs_; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  //! Distinct left indices in order of first appearance.
  std::vector<Left> left_indices() const
  {
    return distinct([](const pair_type& p) -> const Left& { return p.first; });
  }

  std::vector<Right> right_indices() const
  {
    return distinct(
      [](const pair_type& p) -> const Right& { return p.second; });
  }

  //! True when the set equals left_indices() x right_indices().
  bool is_product() const
  {
    return pairs_.size() == left_indices().size() * right_indices().size();
  }

  //! The first `count` pairs.
  TruncationSet prefix(std::size_t count) const
  {
    TruncationSet t;
    t.pairs_.assign(pairs_.begin(),
                    pairs_.begin() +
                      static_cast<std::ptrdiff_t>(std::min(count, size())));
    return t;
  }

  friend bool operator==(const TruncationSet&, const TruncationSet&) = default;

private:
  template<class Get>
  auto distinct(Get get) const
  {
    using T = std::decay_t<decltype(get(pairs_.front()))>;
    std::vector<T> out;
    std::set<T> seen;
    for (const auto& p : pairs_)
      if (seen.insert(get(p)).second)
        out.push_back(get(p));
    return out;
  }

  std::vector<pair_type> pairs_;
};

using FourierTruncation = TruncationSet<FourierIndex, FourierIndex>;

//! All m in N_0^d with |m|_1 = total, in lexicographic order.
inline std::vector<std::vector<int>>
compositions(int total, std::size_t dim)
{
  std::vector<std::vector<int>> out;
  std::vector<int> current(dim, 0);
  auto recurse = [&](auto& self, std::size_t pos, int remaining) -> void {
    if (pos + 1 == dim) {
      current[pos] = remaining;
      out.push_back(current);
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      current[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  recurse(recurse, 0, total);
  return out;
}

//! Fourier indices with min_norm <= |m|_1 <= max_norm, both parities, in
//! (|m|_1, a, m) order.
inline std::vector<FourierIndex>
fourier_indices(std::size_t dim, int max_norm, int min_norm = 1)
{
  std::vector<FourierIndex> out;
  for (int s = std::max(min_norm, 0); s <= max_norm; ++s)
    for (int a = 0; a <= 1; ++a) {
      if (s == 0 && a == 1)
        continue;
      for (auto& m : compositions(s, dim))
        out.emplace_back(a, std::move(m));
    }
  return out;
}

//! ({0,1} x [M]) x ({0,1} x [M]) for one-dimensional data; 4M^2 pairs.
inline FourierTruncation
rectangle_truncation(int M)
{
  if (M < 1)
    throw DomainError("rectangle_truncation: M must be >= 1");
  const auto side = fourier_indices(1, M);
  return FourierTruncation::product(side, side);
}

//! {(j,k) : 1 <= |j|_1 <= mX, 1 <= |k|_1 <= mY}, both parities per side.
inline FourierTruncation
sobolev_truncation(int mX, int mY, std::size_t dX, std::size_t dY)
{
  if (mX < 1 || mY < 1)
    throw DomainError("sobolev_truncation: thresholds must be >= 1");
  if (dX < 1 || dY < 1)
    throw DomainError("sobolev_truncation: dimensions must be >= 1");
  return FourierTruncation::product(fourier_indices(dX, mX),
                                    fourier_indices(dY, mY));
}

//! First `count` pairs of the default adaptive ordering: nondecreasing
//! max(|j|_1, |k|_1), ties broken lexicographically on (j, k).
inline FourierTruncation
fourier_max_norm_ordering(std::size_t dX, std::size_t dY, std::size_t count)
{
  std::vector<FourierTruncation::pair_type> pairs;
  pairs.reserve(count);
  for (int t = 1; pairs.size() < count; ++t) {
    const auto left = fourier_indices(dX, t);
    const auto right_all = fourier_indices(dY, t);
    const auto right_shell = fourier_indices(dY, t, t);
    for (const auto& j : left) {
      const auto& rights = j.norm() < t ? right_shell : right_all;
      for (const auto& k : rights) {
        if (pairs.size() == count)
          break;
        pairs.emplace_back(j, k);
      }
    }
  }
  return FourierTruncation(std::move(pairs));
}

//! Full [J] x [K] indicator truncation; no truncation in the discrete case.
inline TruncationSet<CategoryIndex, CategoryIndex>
indicator_truncation(int J, int K)
{
  if (J < 1 || K < 1)
    throw DomainError("indicator_truncation: need at least one category");
  std::vector<CategoryIndex> left;
  std::vector<CategoryIndex> right;
  for (int j = 1; j <= J; ++j)
    left.push_back({ j });
  for (int k = 1; k <= K; ++k)
    right.push_back({ k });
  return TruncationSet<CategoryIndex, CategoryIndex>::product(left, right);
}

//! All (l, m) with l in [L], m in [M] on each side.
inline TruncationSet<BrownianIndex, BrownianIndex>
brownian_truncation(int L, int M)
{
  if (L < 1 || M < 1)
    throw DomainError("brownian_truncation: L and M must be >= 1");
  std::vector<BrownianIndex> side;
  for (int l = 1; l <= L; ++l)
    for (int m = 1; m <= M; ++m)
      side.push_back({ l, m });
  return TruncationSet<BrownianIndex, BrownianIndex>::product(side, side);
}

// ---------------------------------------------------------------------------
// Closed-form Gram matrices for Sobolev index sets
// ---------------------------------------------------------------------------

//! G(i, l) = sum over 1 <= |m|_1 <= T and both parities of
//! p_{a,m}(x_i) p_{a,m}(x_l) = sum_m 2 cos(2 pi <m, x_i - x_l>).
//! One dimension uses the Dirichlet kernel; higher dimensions accumulate
//! sum_{|m|_1 = s} exp(2 pi i <m, delta>) by a recurrence over coordinates.
inline Eigen::MatrixXd
fourier_sobolev_gram(const Points& x, int max_norm)
{
  if (max_norm < 1)
    throw DomainError("fourier_sobolev_gram: threshold must be >= 1");
  FourierBasis(static_cast<std::size_t>(x.cols())).check_points(x);
  const Eigen::Index n = x.rows();
  const auto dim = static_cast<std::size_t>(x.cols());
  const double T = max_norm;
  Eigen::MatrixXd g(n, n);

  auto one_dim = [&](double delta) {
    delta -= std::round(delta);
    const double phi = 2.0 * std::numbers::pi * delta;
    const double half_sin = std::sin(0.5 * phi);
    if (std::abs(half_sin) < 1e-5) {
      double s = 0.0;
      for (int m = max_norm; m >= 1; --m)
        s += 2.0 * std::cos(static_cast<double>(m) * phi);
      return s;
    }
    return std::sin((T + 0.5) * phi) / half_sin - 1.0;
  };

  std::vector<std::complex<double>> coeff(static_cast<std::size_t>(max_norm) +
                                          1);
  auto multi_dim = [&](std::span<const double> a, std::span<const double> b) {
    std::fill(coeff.begin(), coeff.end(), std::complex<double>(0.0, 0.0));
    coeff[0] = 1.0;
    for (std::size_t l = 0; l < dim; ++l) {
      const std::complex<double> w =
        std::polar(1.0, 2.0 * std::numbers::pi * (a[l] - b[l]));
      for (std::size_t s = 1; s < coeff.size(); ++s)
        coeff[s] += w * coeff[s - 1];
    }
    double total = 0.0;
    for (std::size_t s = 1; s < coeff.size(); ++s)
      total += coeff[s].real();
    return 2.0 * total;
  };

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = i; l < n; ++l) {
      const double v = dim == 1 ? one_dim(x(i, 0) - x(l, 0))
                                : multi_dim(row_span(x, i), row_span(x, l));
      g(i, l) = v;
      g(l, i) = v;
    }
  return g;
}

} // namespace usp
