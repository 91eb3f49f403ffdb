#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "basis.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "perm.hpp"
#include "rng.hpp"
#include "sample.hpp"

namespace usp {

//! Settings shared by every permutation test.
struct TestConfig
{
  double alpha = 0.05;
  std::size_t B = 99;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  //! Evaluate every statistic with the O(n^4) defining average.
  bool reference = false;
  Route route = Route::automatic;
  //! Store all B null statistics in the result.
  bool keep_nulls = true;

  void validate() const
  {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw DomainError("TestConfig: alpha must lie in (0, 1)");
    if (B < 1)
      throw DomainError("TestConfig: B must be >= 1");
  }
};

//! One truncation level of an adaptive run.
struct LevelResult
{
  std::string label;
  std::size_t truncation_size = 0;
  double statistic = 0.0;
  PValue p_value;
};

struct TestResult
{
  std::string method;
  double statistic = 0.0;
  std::vector<double> null_statistics;
  PValue p_value;
  bool reject = false;
  double alpha = 0.0;
  //! Rejection threshold on the p-value and whether the comparison is strict.
  double threshold = 0.0;
  bool strict = false;
  std::size_t B_requested = 0;
  std::size_t B = 0;
  bool B_raised = false;
  std::uint64_t seed = 0;
  //! Adaptive runs only: every level, the Bonferroni factor and the index
  //! of the level reported in statistic/p_value (smallest p, first on ties).
  std::vector<LevelResult> levels;
  std::size_t gamma = 0;
  std::size_t selected_level = 0;
  //! Set by calibrations that return a continuous p-value.
  std::optional<double> p_asymptotic;
  double degrees_of_freedom = 0.0;
  std::vector<std::string> warnings;
};

enum class AdaptiveMode
{
  single_axis,
  sobolev,
};

struct AdaptiveConfig
{
  double beta = 0.2;
  AdaptiveMode mode = AdaptiveMode::single_axis;
  std::size_t dX = 1;
  std::size_t dY = 1;
  //! Replaces the dyadic level list (single-axis mode) when set.
  std::optional<std::vector<std::size_t>> levels;

  void validate(double alpha) const
  {
    if (!(beta > 0.0 && beta < 1.0 - alpha))
      throw DomainError("AdaptiveConfig: beta must lie in (0, 1 - alpha)");
    if (dX == 0 || dY == 0)
      throw DomainError("AdaptiveConfig: dimensions must be positive");
    if (levels) {
      if (levels->empty())
        throw DomainError("AdaptiveConfig: empty level list");
      for (auto m : *levels)
        if (m == 0)
          throw DomainError("AdaptiveConfig: levels must be positive");
    }
  }
};

//! Smallest g >= 0 with 2^(g d) >= n^2, i.e. ceil((2/d) log2 n) in exact
//! integer arithmetic.
inline std::size_t
dyadic_gamma(std::size_t n, std::size_t d = 1)
{
  if (d == 0)
    throw DomainError("dyadic_gamma: dimension must be positive");
  if (n >= (std::size_t{ 1 } << 31))
    throw DomainError("dyadic_gamma: sample too large");
  const std::uint64_t n2 = static_cast<std::uint64_t>(n) * n;
  std::size_t g = 0;
  while (g * d < 63 && (std::uint64_t{ 1 } << (g * d)) < n2)
    ++g;
  return g;
}

//! {2^1, ..., 2^gamma}.
inline std::vector<std::size_t>
dyadic_levels(std::size_t gamma)
{
  std::vector<std::size_t> out;
  for (std::size_t j = 1; j <= gamma; ++j)
    out.push_back(std::size_t{ 1 } << j);
  return out;
}

//! Smallest integer B with B >= 2(tests/(alpha beta) - 1).
inline std::size_t
minimum_adaptive_B(std::size_t tests, double alpha, double beta)
{
  const double bound =
    2.0 * (static_cast<double>(tests) / (alpha * beta) - 1.0);
  return bound <= 1.0 ? 1 : static_cast<std::size_t>(std::ceil(bound - 1e-9));
}

namespace detail {

struct CountRun
{
  std::vector<std::size_t> counts;
  std::vector<std::vector<double>> nulls;
  std::size_t evaluated = 0;
};

//! Evaluates replicate b = 0..B-1 of `levels` statistics. body(b, active,
//! values, exceeds) fills the null statistic and the "null >= observed" flag
//! of every active level. With early stopping, replicates are processed in
//! chunks and a level is dropped once its count exceeds max_count; the run
//! ends when no level can still reject. Counts of levels that stay active
//! are exact, so decisions match a full run.
template<class Body>
CountRun
run_replicates(std::size_t B, std::size_t levels, unsigned threads,
               bool keep_nulls, const std::vector<long long>* max_count,
               const Body& body)
{
  CountRun run;
  run.counts.assign(levels, 0);
  if (keep_nulls)
    run.nulls.assign(levels, std::vector<double>(B, 0.0));
  std::vector<char> active(levels, 1);
  if (max_count)
    for (std::size_t l = 0; l < levels; ++l)
      active[l] = (*max_count)[l] >= 0;
  const unsigned workers = threads == 0 ? default_threads() : threads;
  const std::size_t chunk =
    max_count ? std::max<std::size_t>(16, 4 * std::size_t{ workers }) : B;
  std::vector<double> values;
  std::vector<char> exceeds;
  for (std::size_t start = 0; start < B; start += chunk) {
    if (std::find(active.begin(), active.end(), 1) == active.end())
      break;
    const std::size_t len = std::min(chunk, B - start);
    values.assign(len * levels, 0.0);
    exceeds.assign(len * levels, 0);
    parallel_for(len, threads, [&](std::size_t i) {
      body(start + i, std::span<const char>(active),
           std::span<double>(values.data() + i * levels, levels),
           std::span<char>(exceeds.data() + i * levels, levels));
    });
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t l = 0; l < levels; ++l) {
        if (!active[l])
          continue;
        run.counts[l] += exceeds[i * levels + l] ? 1 : 0;
        if (keep_nulls)
          run.nulls[l][start + i] = values[i * levels + l];
      }
    run.evaluated = start + len;
    if (max_count)
      for (std::size_t l = 0; l < levels; ++l)
        if (active[l] &&
            static_cast<long long>(run.counts[l]) > (*max_count)[l])
          active[l] = 0;
  }
  return run;
}

inline TestResult
single_result(std::string method, const TestConfig& config, double observed,
              std::size_t count, std::vector<double> nulls)
{
  TestResult r;
  r.method = std::move(method);
  r.statistic = observed;
  r.null_statistics = std::move(nulls);
  r.p_value = pvalue_from_count(count, config.B);
  r.alpha = config.alpha;
  r.threshold = config.alpha;
  r.reject = r.p_value.at_most(config.alpha);
  r.B_requested = config.B;
  r.B = config.B;
  r.seed = config.seed;
  return r;
}

//! Engine-backed single test; `early` enables decision-only stopping.
template<class XB, class YB>
std::pair<double, CountRun>
engine_single(const PairedSample& sample,
              const TruncationSet<typename XB::index_type,
                                  typename YB::index_type>& truncation,
              const XB& xb, const YB& yb, const TestConfig& config,
              bool early)
{
  config.validate();
  require_sample_size(sample.size());
  std::vector<long long> max_count{ max_rejecting_count(config.B,
                                                        config.alpha, false) };
  const bool keep = config.keep_nulls && !early;
  if (config.reference) {
    const double observed = dhat_naive(sample, truncation, xb, yb);
    auto run = run_replicates(
      config.B, 1, config.threads, keep, early ? &max_count : nullptr,
      [&](std::size_t b, std::span<const char>, std::span<double> v,
          std::span<char> e) {
        const auto perm =
          permutation_at(sample.size(), config.seed, b);
        v[0] = dhat_naive(sample.permuted_y(perm), truncation, xb, yb);
        e[0] = v[0] >= observed;
      });
    return { observed, std::move(run) };
  }
  const auto engine = make_engine<XB, YB>(sample, std::span(&truncation, 1),
                                          xb, yb, config.route);
  const double observed = engine.evaluate().front();
  auto run = run_replicates(
    config.B, 1, config.threads, keep, early ? &max_count : nullptr,
    [&](std::size_t b, std::span<const char>, std::span<double> v,
        std::span<char> e) {
      const auto perm =
        permutation_at(sample.size(), config.seed, b);
      engine.evaluate(perm, v);
      e[0] = v[0] >= observed;
    });
  return { observed, std::move(run) };
}

} // namespace detail

//! USP test of independence for a fixed truncation set.
template<class XB, class YB>
TestResult
usp_test(const PairedSample& sample,
         const TruncationSet<typename XB::index_type, typename YB::index_type>&
           truncation,
         const XB& xb, const YB& yb, const TestConfig& config)
{
  auto [observed, run] =
    detail::engine_single(sample, truncation, xb, yb, config, false);
  std::vector<double> nulls =
    run.nulls.empty() ? std::vector<double>{} : std::move(run.nulls.front());
  return detail::single_result(config.reference ? "usp-reference" : "usp",
                               config, observed, run.counts.front(),
                               std::move(nulls));
}

//! Decision of usp_test with the same streams, stopping as soon as the
//! outcome is settled.
template<class XB, class YB>
bool
usp_reject(const PairedSample& sample,
           const TruncationSet<typename XB::index_type,
                               typename YB::index_type>& truncation,
           const XB& xb, const YB& yb, const TestConfig& config)
{
  auto [observed, run] =
    detail::engine_single(sample, truncation, xb, yb, config, true);
  (void)observed;
  return run.evaluated == config.B &&
         static_cast<long long>(run.counts.front()) <=
           max_rejecting_count(config.B, config.alpha, false);
}

// ---------------------------------------------------------------------------
// Discrete data
// ---------------------------------------------------------------------------

namespace detail {

template<class NextTable>
std::pair<double, CountRun>
discrete_run(const ContingencyTable& table, const TestConfig& config,
             bool early, const NextTable& next)
{
  config.validate();
  require_sample_size(static_cast<std::size_t>(table.total()));
  const int128 observed = discrete_stat_numerator(table);
  const double denom = discrete_stat_denominator(table);
  std::vector<long long> max_count{ max_rejecting_count(config.B,
                                                        config.alpha, false) };
  auto run = run_replicates(
    config.B, 1, config.threads, config.keep_nulls && !early,
    early ? &max_count : nullptr,
    [&](std::size_t b, std::span<const char>, std::span<double> v,
        std::span<char> e) {
      const int128 num = discrete_stat_numerator(next(b));
      v[0] = static_cast<double>(num) / denom;
      e[0] = num >= observed;
    });
  return { static_cast<double>(observed) / denom, std::move(run) };
}

} // namespace detail

inline rng::Stream
table_stream(std::uint64_t seed, std::size_t b)
{
  return rng::make_stream(seed, { rng::key(rng::Tag::table), b });
}

//! USP test on a contingency table; null tables are drawn with the
//! table's margins.
inline TestResult
usp_test_discrete(const ContingencyTable& table, const TestConfig& config)
{
  auto [observed, run] =
    detail::discrete_run(table, config, false, [&](std::size_t b) {
      auto s = table_stream(config.seed, b);
      return permute_table(table, s);
    });
  std::vector<double> nulls =
    run.nulls.empty() ? std::vector<double>{} : std::move(run.nulls.front());
  return detail::single_result("usp-discrete", config, observed,
                               run.counts.front(), std::move(nulls));
}

inline bool
usp_discrete_reject(const ContingencyTable& table, const TestConfig& config)
{
  auto [observed, run] =
    detail::discrete_run(table, config, true, [&](std::size_t b) {
      auto s = table_stream(config.seed, b);
      return permute_table(table, s);
    });
  (void)observed;
  return run.evaluated == config.B &&
         static_cast<long long>(run.counts.front()) <=
           max_rejecting_count(config.B, config.alpha, false);
}

//! Discrete statistic with nulls from permuting the raw Y labels, using the
//! same permutation streams as usp_test.
inline TestResult
usp_test_labels(std::span<const int> x, std::span<const int> y,
                std::size_t rows, std::size_t cols, const TestConfig& config)
{
  const auto table = tabulate(x, y, rows, cols);
  std::vector<int> ys(y.begin(), y.end());
  auto [observed, run] =
    detail::discrete_run(table, config, false, [&](std::size_t b) {
      const auto perm =
        permutation_at(ys.size(), config.seed, b);
      std::vector<int> py(ys.size());
      for (std::size_t i = 0; i < ys.size(); ++i)
        py[i] = ys[perm[i]];
      return tabulate(x, py, rows, cols);
    });
  std::vector<double> nulls =
    run.nulls.empty() ? std::vector<double>{} : std::move(run.nulls.front());
  return detail::single_result("usp-labels", config, observed,
                               run.counts.front(), std::move(nulls));
}

// ---------------------------------------------------------------------------
// Adaptive procedures
// ---------------------------------------------------------------------------

namespace detail {

struct AdaptivePlan
{
  std::size_t tests = 0;
  std::size_t B = 0;
  bool raised = false;
  double threshold = 0.0;
  std::vector<long long> max_count;
};

inline AdaptivePlan
adaptive_plan(std::size_t tests, const TestConfig& config,
              const AdaptiveConfig& adaptive)
{
  AdaptivePlan p;
  p.tests = tests;
  const std::size_t needed =
    minimum_adaptive_B(tests, config.alpha, adaptive.beta);
  p.B = std::max(config.B, needed);
  p.raised = p.B != config.B;
  p.threshold = config.alpha / static_cast<double>(tests);
  p.max_count.assign(tests, max_rejecting_count(p.B, p.threshold, true));
  return p;
}

inline TestResult
adaptive_result(std::string method, const TestConfig& config,
                const AdaptivePlan& plan, std::vector<LevelResult> levels,
                std::vector<std::vector<double>> nulls)
{
  TestResult r;
  r.method = std::move(method);
  r.alpha = config.alpha;
  r.threshold = plan.threshold;
  r.strict = true;
  r.B_requested = config.B;
  r.B = plan.B;
  r.B_raised = plan.raised;
  r.seed = config.seed;
  r.gamma = plan.tests;
  std::size_t best = 0;
  for (std::size_t l = 1; l < levels.size(); ++l)
    if (levels[l].p_value.value() < levels[best].p_value.value())
      best = l;
  r.selected_level = best;
  r.statistic = levels[best].statistic;
  r.p_value = levels[best].p_value;
  r.reject = r.p_value.below(plan.threshold);
  if (!nulls.empty())
    r.null_statistics = std::move(nulls[best]);
  r.levels = std::move(levels);
  if (plan.raised)
    r.warnings.push_back("B raised from " + std::to_string(config.B) +
                         " to " + std::to_string(plan.B));
  return r;
}

template<class XB, class YB>
struct AdaptiveSetup
{
  std::vector<TruncationSet<typename XB::index_type, typename YB::index_type>>
    truncations;
  std::vector<std::string> labels;
};

template<class XB, class YB>
AdaptiveSetup<XB, YB>
ordering_levels(
  std::size_t n,
  const TruncationSet<typename XB::index_type, typename YB::index_type>&
    ordering,
  const AdaptiveConfig& adaptive)
{
  const auto sizes = adaptive.levels
                       ? *adaptive.levels
                       : dyadic_levels(dyadic_gamma(n, 1));
  if (ordering.size() == 0)
    throw DomainError("adaptive_test: empty ordering");
  AdaptiveSetup<XB, YB> s;
  for (auto m : sizes) {
    s.truncations.push_back(ordering.prefix(std::min(m, ordering.size())));
    s.labels.push_back("m=" + std::to_string(m));
  }
  return s;
}

//! Runs every level of `engine` against one shared permutation batch.
inline std::pair<std::vector<double>, CountRun>
run_levels(const PermutationEngine& engine, std::size_t n,
           const TestConfig& config, const AdaptivePlan& plan, bool early)
{
  const std::size_t L = engine.level_count();
  const std::vector<double> observed = engine.evaluate();
  auto run = run_replicates(
    plan.B, L, config.threads, config.keep_nulls && !early,
    early ? &plan.max_count : nullptr,
    [&](std::size_t b, std::span<const char> active, std::span<double> v,
        std::span<char> e) {
      const auto perm = permutation_at(n, config.seed, b);
      engine.evaluate(perm, v, active);
      for (std::size_t l = 0; l < L; ++l)
        e[l] = v[l] >= observed[l];
    });
  return { observed, std::move(run) };
}

inline bool
any_level_rejects(const CountRun& run, const AdaptivePlan& plan)
{
  if (run.evaluated != plan.B)
    return false;
  for (std::size_t l = 0; l < run.counts.size(); ++l)
    if (static_cast<long long>(run.counts[l]) <= plan.max_count[l])
      return true;
  return false;
}

template<class XB, class YB>
std::pair<PermutationEngine, AdaptiveSetup<XB, YB>>
ordering_engine(
  const PairedSample& sample,
  const TruncationSet<typename XB::index_type, typename YB::index_type>&
    ordering,
  const XB& xb, const YB& yb, const TestConfig& config,
  const AdaptiveConfig& adaptive)
{
  config.validate();
  adaptive.validate(config.alpha);
  require_sample_size(sample.size());
  auto setup = ordering_levels<XB, YB>(sample.size(), ordering, adaptive);
  auto engine = make_engine<XB, YB>(
    sample,
    std::span<const TruncationSet<typename XB::index_type,
                                  typename YB::index_type>>(setup.truncations),
    xb, yb, config.route);
  return { std::move(engine), std::move(setup) };
}

} // namespace detail

//! Bonferroni combination of USP tests over the prefixes of `ordering` of
//! lengths 2, 4, ..., 2^gamma, gamma = ceil(2 log2 n). Rejects when the
//! smallest p-value is strictly below alpha / gamma.
template<class XB, class YB>
TestResult
adaptive_test(
  const PairedSample& sample,
  const TruncationSet<typename XB::index_type, typename YB::index_type>&
    ordering,
  const XB& xb, const YB& yb, const TestConfig& config,
  const AdaptiveConfig& adaptive)
{
  auto [engine, setup] =
    detail::ordering_engine(sample, ordering, xb, yb, config, adaptive);
  const auto plan =
    detail::adaptive_plan(setup.truncations.size(), config, adaptive);
  auto [observed, run] =
    detail::run_levels(engine, sample.size(), config, plan, false);
  std::vector<LevelResult> levels;
  for (std::size_t l = 0; l < observed.size(); ++l)
    levels.push_back({ setup.labels[l], setup.truncations[l].size(),
                       observed[l], pvalue_from_count(run.counts[l], plan.B) });
  return detail::adaptive_result("usp-adaptive", config, plan,
                                 std::move(levels), std::move(run.nulls));
}

template<class XB, class YB>
bool
adaptive_reject(
  const PairedSample& sample,
  const TruncationSet<typename XB::index_type, typename YB::index_type>&
    ordering,
  const XB& xb, const YB& yb, const TestConfig& config,
  const AdaptiveConfig& adaptive)
{
  auto [engine, setup] =
    detail::ordering_engine(sample, ordering, xb, yb, config, adaptive);
  const auto plan =
    detail::adaptive_plan(setup.truncations.size(), config, adaptive);
  auto [observed, run] =
    detail::run_levels(engine, sample.size(), config, plan, true);
  return detail::any_level_rejects(run, plan);
}

//! Adaptive test for Fourier data with the default max-norm ordering.
inline TestResult
adaptive_test_fourier(const PairedSample& sample, const TestConfig& config,
                      const AdaptiveConfig& adaptive)
{
  adaptive.validate(config.alpha);
  const auto sizes = adaptive.levels
                       ? *adaptive.levels
                       : dyadic_levels(dyadic_gamma(sample.size(), 1));
  const auto ordering = fourier_max_norm_ordering(
    adaptive.dX, adaptive.dY, *std::max_element(sizes.begin(), sizes.end()));
  return adaptive_test(sample, ordering, FourierBasis(adaptive.dX),
                       FourierBasis(adaptive.dY), config, adaptive);
}

inline bool
adaptive_reject_fourier(const PairedSample& sample, const TestConfig& config,
                        const AdaptiveConfig& adaptive)
{
  adaptive.validate(config.alpha);
  const auto sizes = adaptive.levels
                       ? *adaptive.levels
                       : dyadic_levels(dyadic_gamma(sample.size(), 1));
  const auto ordering = fourier_max_norm_ordering(
    adaptive.dX, adaptive.dY, *std::max_element(sizes.begin(), sizes.end()));
  return adaptive_reject(sample, ordering, FourierBasis(adaptive.dX),
                         FourierBasis(adaptive.dY), config, adaptive);
}

namespace detail {

struct SobolevGrid
{
  std::vector<std::size_t> mx;
  std::vector<std::size_t> my;
  PermutationEngine engine;
};

inline SobolevGrid
sobolev_grid(const PairedSample& sample, const TestConfig& config,
             const AdaptiveConfig& adaptive)
{
  config.validate();
  adaptive.validate(config.alpha);
  require_sample_size(sample.size());
  if (static_cast<std::size_t>(sample.x.cols()) != adaptive.dX ||
      static_cast<std::size_t>(sample.y.cols()) != adaptive.dY)
    throw DomainError("adaptive_sobolev_test: dimension mismatch");
  const auto mx = dyadic_levels(dyadic_gamma(sample.size(), adaptive.dX));
  const auto my = dyadic_levels(dyadic_gamma(sample.size(), adaptive.dY));
  std::vector<Eigen::MatrixXd> gx;
  std::vector<Eigen::MatrixXd> gy;
  for (auto m : mx)
    gx.push_back(fourier_sobolev_gram(sample.x, static_cast<int>(m)));
  for (auto m : my)
    gy.push_back(fourier_sobolev_gram(sample.y, static_cast<int>(m)));
  std::vector<PermutationEngine::Level> levels;
  for (std::size_t i = 0; i < mx.size(); ++i)
    for (std::size_t j = 0; j < my.size(); ++j)
      levels.push_back({ { i, j } });
  return { mx, my, PermutationEngine::from_grams(gx, gy, levels) };
}

inline std::size_t
fourier_index_count(std::size_t d, std::size_t max_norm)
{
  // 2 * #{m in N_0^d : 1 <= |m|_1 <= T} = 2 * (C(T + d, d) - 1)
  long double c = 1.0L;
  for (std::size_t i = 1; i <= d; ++i)
    c = c * static_cast<long double>(max_norm + i) / static_cast<long double>(i);
  return static_cast<std::size_t>(2.0L * (std::round(c) - 1.0L));
}

} // namespace detail

//! Bonferroni combination over the Sobolev sets M_{mX,mY} with mX and mY
//! running over separate dyadic grids. Fourier basis on both sides.
inline TestResult
adaptive_sobolev_test(const PairedSample& sample, const TestConfig& config,
                      const AdaptiveConfig& adaptive)
{
  auto grid = detail::sobolev_grid(sample, config, adaptive);
  const auto plan =
    detail::adaptive_plan(grid.engine.level_count(), config, adaptive);
  auto [observed, run] =
    detail::run_levels(grid.engine, sample.size(), config, plan, false);
  std::vector<LevelResult> levels;
  std::size_t l = 0;
  for (auto a : grid.mx)
    for (auto b : grid.my) {
      levels.push_back(
        { "mX=" + std::to_string(a) + ",mY=" + std::to_string(b),
          detail::fourier_index_count(adaptive.dX, a) *
            detail::fourier_index_count(adaptive.dY, b),
          observed[l], pvalue_from_count(run.counts[l], plan.B) });
      ++l;
    }
  return detail::adaptive_result("usp-adaptive-sobolev", config, plan,
                                 std::move(levels), std::move(run.nulls));
}

inline bool
adaptive_sobolev_reject(const PairedSample& sample, const TestConfig& config,
                        const AdaptiveConfig& adaptive)
{
  auto grid = detail::sobolev_grid(sample, config, adaptive);
  const auto plan =
    detail::adaptive_plan(grid.engine.level_count(), config, adaptive);
  auto [observed, run] =
    detail::run_levels(grid.engine, sample.size(), config, plan, true);
  return detail::any_level_rejects(run, plan);
}

} // namespace usp
