#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "basis.hpp"
#include "parallel.hpp"
#include "perm.hpp"
#include "rng.hpp"
#include "sample.hpp"
#include "testing.hpp"

namespace usp {

// ---------------------------------------------------------------------------
// Continuous samplers
// ---------------------------------------------------------------------------

//! n draws from the density 1 + c sin(2 pi wx x) sin(2 pi wy y) on [0,1]^2
//! by rejection from the uniform proposal with envelope 1 + |c|.
inline PairedSample
sample_product_sine(std::size_t n, double c, int wx, int wy,
                    rng::Stream& stream)
{
  if (!(std::abs(c) <= 1.0))
    throw DomainError("sample_product_sine: amplitude must lie in [-1, 1]");
  if (wx < 1 || wy < 1)
    throw DomainError("sample_product_sine: frequencies must be >= 1");
  Points x(static_cast<Eigen::Index>(n), 1);
  Points y(static_cast<Eigen::Index>(n), 1);
  const double envelope = 1.0 + std::abs(c);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n);) {
    const double u = rng::uniform01(stream);
    const double v = rng::uniform01(stream);
    const double w = rng::uniform01(stream) * envelope;
    if (w <= 1.0 + c * std::sin(two_pi * wx * u) * std::sin(two_pi * wy * v)) {
      x(i, 0) = u;
      y(i, 0) = v;
      ++i;
    }
  }
  return { std::move(x), std::move(y) };
}

//! f_rho(x, y) = 1 + 2 rho sin(2 pi x) sin(2 pi y), rho in [0, 1/2].
inline PairedSample
sample_frho(std::size_t n, double rho, rng::Stream& stream)
{
  if (!(rho >= 0.0 && rho <= 0.5))
    throw DomainError("sample_frho: rho must lie in [0, 1/2]");
  return sample_product_sine(n, 2.0 * rho, 1, 1, stream);
}

//! f_omega(x, y) = 1 + sin(2 pi omega x) sin(2 pi omega y). Integer omega
//! keeps both marginals uniform.
inline PairedSample
sample_fomega(std::size_t n, int omega, rng::Stream& stream)
{
  if (omega < 1)
    throw DomainError("sample_fomega: omega must be >= 1");
  return sample_product_sine(n, 1.0, omega, omega, stream);
}

// ---------------------------------------------------------------------------
// Discrete families
// ---------------------------------------------------------------------------

enum class DiscreteFamily
{
  sparse,
  dense,
};

//! Row-major cell probabilities. Sparse: 6 x 6 geometric product with
//! +-eps on the top-left 2 x 2 block. Dense: uniform 8 x 8 with a
//! checkerboard perturbation (-1)^{j+k-1} eps.
inline std::vector<double>
discrete_probabilities(DiscreteFamily family, double eps,
                       std::size_t& rows, std::size_t& cols)
{
  std::vector<double> p;
  if (family == DiscreteFamily::sparse) {
    rows = cols = 6;
    const double norm = (1.0 - std::ldexp(1.0, -6)) * (1.0 - std::ldexp(1.0, -6));
    for (int j = 1; j <= 6; ++j)
      for (int k = 1; k <= 6; ++k) {
        double v = std::ldexp(1.0, -(j + k)) / norm;
        if ((j == 1 && k == 1) || (j == 2 && k == 2))
          v += eps;
        if ((j == 1 && k == 2) || (j == 2 && k == 1))
          v -= eps;
        p.push_back(v);
      }
  } else {
    rows = cols = 8;
    for (int j = 1; j <= 8; ++j)
      for (int k = 1; k <= 8; ++k)
        p.push_back(1.0 / 64.0 + ((j + k - 1) % 2 == 0 ? 1.0 : -1.0) * eps);
  }
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError("discrete family: eps leaves a cell probability "
                        "outside [0, 1]");
  return p;
}

//! D(f) of the family: 4 eps^2 (sparse) or J K eps^2 (dense).
inline double
discrete_dependence(DiscreteFamily family, double eps)
{
  return (family == DiscreteFamily::sparse ? 4.0 : 64.0) * eps * eps;
}

//! Multinomial(n, p) table, drawn by successive conditional binomials.
inline ContingencyTable
sample_discrete(std::size_t n, DiscreteFamily family, double eps,
                rng::Stream& stream)
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  const auto p = discrete_probabilities(family, eps, rows, cols);
  std::vector<std::int64_t> counts(p.size(), 0);
  auto left = static_cast<std::int64_t>(n);
  double mass = 1.0;
  for (std::size_t c = 0; c + 1 < p.size() && left > 0; ++c) {
    const double q = mass > 0.0 ? std::clamp(p[c] / mass, 0.0, 1.0) : 0.0;
    const std::int64_t draw =
      std::binomial_distribution<std::int64_t>(left, q)(stream);
    counts[c] = draw;
    left -= draw;
    mass -= p[c];
  }
  counts.back() += left;
  return { rows, cols, std::move(counts) };
}

// ---------------------------------------------------------------------------
// Correlated Brownian motions
// ---------------------------------------------------------------------------

//! S(l, t) = sqrt(2) sin((l - 1/2) pi t) / ((l - 1/2) pi) on a uniform grid.
inline Eigen::MatrixXd
wiener_series_table(std::size_t terms, std::size_t grid_points)
{
  Eigen::MatrixXd s(static_cast<Eigen::Index>(terms),
                    static_cast<Eigen::Index>(grid_points));
  for (std::size_t l = 0; l < terms; ++l) {
    const double f = (static_cast<double>(l) + 0.5) * std::numbers::pi;
    for (std::size_t t = 0; t < grid_points; ++t) {
      const double time =
        static_cast<double>(t) / static_cast<double>(grid_points - 1);
      s(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) =
        std::numbers::sqrt2 * std::sin(f * time) / f;
    }
  }
  return s;
}

//! n pairs of paths X = sum eta_l S_l, Y = r X + sqrt(1 - r^2) Z with Z an
//! independent series. X and Z use separate substreams seeded from `stream`.
inline PairedSample
sample_correlated_bm(std::size_t n, double r, std::size_t terms,
                     std::size_t grid_points, rng::Stream& stream)
{
  if (!(r >= 0.0 && r <= 1.0))
    throw DomainError("sample_correlated_bm: r must lie in [0, 1]");
  if (terms < 1)
    throw DomainError("sample_correlated_bm: need at least one series term");
  if (grid_points < 2)
    throw DomainError("sample_correlated_bm: need at least two grid points");
  const std::uint64_t seed = stream();
  auto sx = rng::make_stream(seed, { rng::key(rng::Tag::data) });
  auto sz = rng::make_stream(seed, { rng::key(rng::Tag::data_y) });
  const auto table = wiener_series_table(terms, grid_points);
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(terms);
  Eigen::MatrixXd eta(rows, cols);
  Eigen::MatrixXd zeta(rows, cols);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index l = 0; l < cols; ++l)
      eta(i, l) = normal(sx);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index l = 0; l < cols; ++l)
      zeta(i, l) = normal(sz);
  Points x = eta * table;
  Points y = r == 1.0 ? Points(x)
                      : Points(r * x + std::sqrt(1.0 - r * r) * (zeta * table));
  return { std::move(x), std::move(y) };
}

// ---------------------------------------------------------------------------
// Pearson chi-squared baseline
// ---------------------------------------------------------------------------

enum class PearsonMode
{
  asymptotic,
  permutation,
};

struct PearsonStatistic
{
  double value = 0.0;
  std::size_t skipped_cells = 0;
  std::size_t nonzero_rows = 0;
  std::size_t nonzero_cols = 0;
};

//! sum (N_jk - E_jk)^2 / E_jk over cells with positive expected count.
inline PearsonStatistic
pearson_statistic(const ContingencyTable& table)
{
  PearsonStatistic s;
  const double n = static_cast<double>(table.total());
  for (auto r : table.row_margins())
    s.nonzero_rows += r > 0 ? 1 : 0;
  for (auto c : table.col_margins())
    s.nonzero_cols += c > 0 ? 1 : 0;
  for (std::size_t j = 0; j < table.rows(); ++j)
    for (std::size_t k = 0; k < table.cols(); ++k) {
      const double e = static_cast<double>(table.row_margins()[j]) *
                       static_cast<double>(table.col_margins()[k]) / n;
      if (e <= 0.0) {
        ++s.skipped_cells;
        continue;
      }
      const double d = static_cast<double>(table(j, k)) - e;
      s.value += d * d / e;
    }
  return s;
}

namespace detail {

inline bool
pearson_at_least(double null, double observed)
{
  return null >= observed * (1.0 - 64.0 * std::numeric_limits<double>::epsilon());
}

} // namespace detail

//! Pearson's test of independence calibrated by the chi-squared law with
//! (J' - 1)(K' - 1) degrees of freedom over nonempty rows and columns, or by
//! resampling tables with the observed margins. The permutation mode uses
//! the same table streams as usp_test_discrete.
inline TestResult
pearson_chisq_test(const ContingencyTable& table, PearsonMode mode,
                   const TestConfig& config)
{
  config.validate();
  if (table.total() < 1)
    throw InsufficientSample(0, 1);
  const auto observed = pearson_statistic(table);
  TestResult r;
  r.alpha = config.alpha;
  r.threshold = config.alpha;
  r.seed = config.seed;
  r.statistic = observed.value;
  if (mode == PearsonMode::asymptotic) {
    r.method = "pearson-asymptotic";
    if (observed.skipped_cells > 0)
      r.warnings.push_back(std::to_string(observed.skipped_cells) +
                           " cells with zero expected count skipped");
    const double df = static_cast<double>(
      (std::max<std::size_t>(observed.nonzero_rows, 1) - 1) *
      (std::max<std::size_t>(observed.nonzero_cols, 1) - 1));
    r.p_asymptotic = df > 0.0 ? numeric::chi_squared_sf(observed.value, df) : 1.0;
    r.degrees_of_freedom = df;
    r.reject = *r.p_asymptotic <= config.alpha;
    return r;
  }
  r.method = "pearson-permutation";
  r.B = r.B_requested = config.B;
  auto run = detail::run_replicates(
    config.B, 1, config.threads, config.keep_nulls, nullptr,
    [&](std::size_t b, std::span<const char>, std::span<double> v,
        std::span<char> e) {
      auto s = table_stream(config.seed, b);
      v[0] = pearson_statistic(permute_table(table, s)).value;
      e[0] = detail::pearson_at_least(v[0], observed.value);
    });
  if (!run.nulls.empty())
    r.null_statistics = std::move(run.nulls.front());
  r.p_value = pvalue_from_count(run.counts.front(), config.B);
  r.reject = r.p_value.at_most(config.alpha);
  return r;
}

inline bool
pearson_reject(const ContingencyTable& table, PearsonMode mode,
               const TestConfig& config)
{
  if (mode == PearsonMode::asymptotic)
    return pearson_chisq_test(table, mode, config).reject;
  config.validate();
  const double observed = pearson_statistic(table).value;
  std::vector<long long> max_count{ max_rejecting_count(config.B, config.alpha,
                                                        false) };
  auto run = detail::run_replicates(
    config.B, 1, config.threads, false, &max_count,
    [&](std::size_t b, std::span<const char>, std::span<double> v,
        std::span<char> e) {
      auto s = table_stream(config.seed, b);
      v[0] = pearson_statistic(permute_table(table, s)).value;
      e[0] = detail::pearson_at_least(v[0], observed);
    });
  return run.evaluated == config.B &&
         static_cast<long long>(run.counts.front()) <= max_count.front();
}

// ---------------------------------------------------------------------------
// Power studies
// ---------------------------------------------------------------------------

enum class FamilyKind
{
  frho,
  fomega,
  product_sine,
  discrete_sparse,
  discrete_dense,
  brownian,
};

//! A data-generating family; the grid parameter is rho, omega, the sine
//! amplitude, eps or r depending on the kind.
struct FamilySpec
{
  FamilyKind kind = FamilyKind::frho;
  //! product_sine frequencies.
  int omega_x = 1;
  int omega_y = 1;
  //! brownian simulation resolution.
  std::size_t series_terms = 100;
  std::size_t grid_points = 1000;
};

enum class TestKind
{
  usp,
  usp_adaptive,
  usp_adaptive_sobolev,
  usp_discrete,
  pearson_asymptotic,
  pearson_permutation,
};

struct PowerStudy
{
  TestKind test = TestKind::usp;
  std::size_t n = 100;
  //! Rectangle level (Fourier) or frequency count per level (Brownian).
  int M = 1;
  //! Coefficient levels of the Brownian basis.
  int L = 2;
  TestConfig config;
  AdaptiveConfig adaptive;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool keep_decisions = false;
};

struct PowerPoint
{
  double parameter = 0.0;
  std::size_t rejections = 0;
  std::size_t reps = 0;
  double power = 0.0;
  double se = 0.0;
  std::vector<char> decisions;
};

struct PowerCurve
{
  FamilySpec family;
  PowerStudy study;
  std::vector<PowerPoint> points;
};

inline bool
is_discrete(FamilyKind k)
{
  return k == FamilyKind::discrete_sparse || k == FamilyKind::discrete_dense;
}

namespace detail {

inline bool
is_discrete_test(TestKind t)
{
  return t == TestKind::usp_discrete || t == TestKind::pearson_asymptotic ||
         t == TestKind::pearson_permutation;
}

inline void
check_study(const FamilySpec& family, const PowerStudy& study)
{
  if (study.reps < 1)
    throw DomainError("estimate_power: reps must be >= 1");
  study.config.validate();
  if (is_discrete(family.kind) != is_discrete_test(study.test))
    throw DomainError("estimate_power: test does not match the family");
  if (family.kind == FamilyKind::brownian && study.test != TestKind::usp)
    throw DomainError("estimate_power: Brownian family supports the fixed "
                      "USP test only");
}

inline PairedSample
draw_continuous(const FamilySpec& family, double parameter, std::size_t n,
                rng::Stream& stream)
{
  switch (family.kind) {
    case FamilyKind::frho:
      return sample_frho(n, parameter, stream);
    case FamilyKind::fomega: {
      const auto omega = static_cast<int>(std::lround(parameter));
      if (static_cast<double>(omega) != parameter)
        throw DomainError("fomega: omega must be an integer");
      return sample_fomega(n, omega, stream);
    }
    case FamilyKind::product_sine:
      return sample_product_sine(n, parameter, family.omega_x, family.omega_y,
                                 stream);
    case FamilyKind::brownian:
      return sample_correlated_bm(n, parameter, family.series_terms,
                                  family.grid_points, stream);
    default:
      throw DomainError("draw_continuous: discrete family");
  }
}

//! One replicate's decision; the test streams come from `test_seed`.
inline bool
replicate_decision(const FamilySpec& family, const PowerStudy& study,
                   double parameter, rng::Stream& data_stream,
                   std::uint64_t test_seed)
{
  TestConfig cfg = study.config;
  cfg.seed = test_seed;
  cfg.threads = 1;
  cfg.keep_nulls = false;
  if (is_discrete(family.kind)) {
    const auto table = sample_discrete(
      study.n,
      family.kind == FamilyKind::discrete_sparse ? DiscreteFamily::sparse
                                                 : DiscreteFamily::dense,
      parameter, data_stream);
    switch (study.test) {
      case TestKind::usp_discrete:
        return usp_discrete_reject(table, cfg);
      case TestKind::pearson_asymptotic:
        return pearson_reject(table, PearsonMode::asymptotic, cfg);
      default:
        return pearson_reject(table, PearsonMode::permutation, cfg);
    }
  }
  const auto sample = draw_continuous(family, parameter, study.n, data_stream);
  if (family.kind == FamilyKind::brownian)
    return usp_reject(sample, brownian_truncation(study.L, study.M),
                      BrownianBasis{}, BrownianBasis{}, cfg);
  switch (study.test) {
    case TestKind::usp:
      return usp_reject(sample, rectangle_truncation(study.M), FourierBasis(1),
                        FourierBasis(1), cfg);
    case TestKind::usp_adaptive:
      return adaptive_reject_fourier(sample, cfg, study.adaptive);
    case TestKind::usp_adaptive_sobolev:
      return adaptive_sobolev_reject(sample, cfg, study.adaptive);
    default:
      throw DomainError("estimate_power: test does not match the family");
  }
}

} // namespace detail

//! Rejection frequency of the configured test at each grid value. Replicate
//! r of grid point g draws its data from substream (seed, data, g, r) and its
//! permutations from (seed, replicate, g, r), so any two studies with the same
//! seed see the same data sets.
inline PowerCurve
estimate_power(const FamilySpec& family, const std::vector<double>& grid,
               const PowerStudy& study)
{
  detail::check_study(family, study);
  PowerCurve curve;
  curve.family = family;
  curve.study = study;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<char> decisions(study.reps, 0);
    parallel_for(study.reps, study.threads, [&](std::size_t r) {
      auto data = rng::make_stream(study.seed,
                                   { rng::key(rng::Tag::data), g, r });
      const auto test_seed = rng::derive_seed(
        study.seed, { rng::key(rng::Tag::replicate), g, r });
      decisions[r] =
        detail::replicate_decision(family, study, grid[g], data, test_seed);
    });
    PowerPoint p;
    p.parameter = grid[g];
    p.reps = study.reps;
    for (char d : decisions)
      p.rejections += d ? 1 : 0;
    p.power = static_cast<double>(p.rejections) / static_cast<double>(p.reps);
    p.se = std::sqrt(p.power * (1.0 - p.power) / static_cast<double>(p.reps));
    if (study.keep_decisions)
      p.decisions = std::move(decisions);
    curve.points.push_back(std::move(p));
  }
  return curve;
}

//! SE of the difference of two rejection frequencies measured on the same
//! replicates.
inline double
paired_difference_se(const std::vector<char>& a, const std::vector<char>& b)
{
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("paired_difference_se: size mismatch");
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    mean += static_cast<double>(a[i] - b[i]);
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i] - b[i]) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / (n - 1.0 > 0.0 ? n - 1.0 : 1.0) / n);
}

} // namespace usp
