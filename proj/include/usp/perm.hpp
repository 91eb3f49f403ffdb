#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "numeric.hpp"
#include "rng.hpp"
#include "sample.hpp"

namespace usp {

using Permutation = std::vector<std::size_t>;

//! Fisher-Yates shuffle of the identity on [n].
inline Permutation
uniform_permutation(std::size_t n, rng::Stream& stream)
{
  Permutation p(n);
  std::iota(p.begin(), p.end(), std::size_t{ 0 });
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(p[i - 1], p[pick(stream)]);
  }
  return p;
}

//! Stream of the b-th permutation below a master seed.
inline rng::Stream
permutation_stream(std::uint64_t seed, std::size_t b)
{
  return rng::make_stream(seed, { rng::key(rng::Tag::permutation), b });
}

//! The b-th permutation of [n] under `seed`.
inline Permutation
permutation_at(std::size_t n, std::uint64_t seed, std::size_t b)
{
  auto stream = permutation_stream(seed, b);
  return uniform_permutation(n, stream);
}

//! B permutations of [n], the b-th drawn from its own substream of `seed`,
//! so any subset can be regenerated independently.
struct PermutationBatch
{
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<Permutation> perms;

  static PermutationBatch generate(std::size_t n, std::size_t B,
                                   std::uint64_t seed)
  {
    PermutationBatch batch{ n, seed, {} };
    batch.perms.reserve(B);
    for (std::size_t b = 0; b < B; ++b)
      batch.perms.push_back(batch.at(b));
    return batch;
  }

  std::size_t size() const { return perms.size(); }

  //! Regenerates permutation b from (seed, b).
  Permutation at(std::size_t b) const
  {
    auto stream = permutation_stream(seed, b);
    return uniform_permutation(n, stream);
  }
};

//! Permutation p-value k/(B+1), kept as an exact rational.
struct PValue
{
  std::size_t numerator = 1;
  std::size_t denominator = 1;

  double value() const
  {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  std::string str() const
  {
    return std::to_string(numerator) + "/" + std::to_string(denominator);
  }
  //! p <= alpha, evaluated on the correctly rounded quotient so that a
  //! p-value equal to alpha as a decimal compares equal.
  bool at_most(double alpha) const { return value() <= alpha; }
  bool below(double alpha) const { return value() < alpha; }

  friend bool operator==(const PValue&, const PValue&) = default;
};

//! (1 + #{b : observed <= null_b}) / (1 + B). Ties count toward the
//! numerator.
inline PValue
pvalue_from_count(std::size_t at_least_as_large, std::size_t B)
{
  return { 1 + at_least_as_large, B + 1 };
}

inline PValue
pvalue(double observed, std::span<const double> nulls)
{
  if (nulls.empty())
    throw DomainError("pvalue: no null statistics");
  std::size_t count = 0;
  for (double v : nulls)
    if (observed <= v)
      ++count;
  return pvalue_from_count(count, nulls.size());
}

//! Largest exceedance count k whose p-value (1+k)/(B+1) still rejects, or
//! -1 when no count does.
inline long long
max_rejecting_count(std::size_t B, double threshold, bool strict)
{
  long long k = static_cast<long long>(
                  std::floor(threshold * static_cast<double>(B + 1))) -
                1;
  auto rejects = [&](long long c) {
    if (c < 0)
      return true;
    const auto p = pvalue_from_count(static_cast<std::size_t>(c), B);
    return strict ? p.below(threshold) : p.at_most(threshold);
  };
  k = std::min<long long>(k, static_cast<long long>(B));
  while (k >= 0 && !rejects(k))
    --k;
  while (k + 1 <= static_cast<long long>(B) && rejects(k + 1))
    ++k;
  return k;
}

// ---------------------------------------------------------------------------
// Contingency-table resampling
// ---------------------------------------------------------------------------

//! Number of marked items among `draws` taken without replacement from a
//! population of `population` items of which `marked` are marked. Exact
//! inversion of the CDF, walking outward from the mode.
inline std::int64_t
hypergeometric(std::int64_t population, std::int64_t marked,
               std::int64_t draws, rng::Stream& stream)
{
  if (marked < 0 || draws < 0 || marked > population || draws > population)
    throw DomainError("hypergeometric: invalid parameters");
  const std::int64_t lo = std::max<std::int64_t>(0, draws - (population - marked));
  const std::int64_t hi = std::min(draws, marked);
  if (lo == hi)
    return lo;
  const auto lchoose = [](std::int64_t a, std::int64_t b) {
    return std::lgamma(static_cast<double>(a) + 1.0) -
           std::lgamma(static_cast<double>(b) + 1.0) -
           std::lgamma(static_cast<double>(a - b) + 1.0);
  };
  std::int64_t mode = static_cast<std::int64_t>(
    std::floor((static_cast<double>(draws) + 1.0) *
               (static_cast<double>(marked) + 1.0) /
               (static_cast<double>(population) + 2.0)));
  mode = std::clamp(mode, lo, hi);
  const double pmode =
    std::exp(lchoose(marked, mode) + lchoose(population - marked, draws - mode) -
             lchoose(population, draws));
  // Ratios f(x+1)/f(x) = (K-x)(d-x) / ((x+1)(N-K-d+x+1)).
  const auto up = [&](std::int64_t x) {
    return static_cast<double>(marked - x) * static_cast<double>(draws - x) /
           (static_cast<double>(x + 1) *
            static_cast<double>(population - marked - draws + x + 1));
  };
  double u = rng::uniform01(stream);
  // Visit outcomes alternately right and left of the mode.
  std::int64_t left = mode;
  std::int64_t right = mode;
  double pleft = pmode;
  double pright = pmode;
  u -= pmode;
  if (u <= 0.0)
    return mode;
  while (left > lo || right < hi) {
    if (right < hi) {
      pright *= up(right);
      ++right;
      u -= pright;
      if (u <= 0.0)
        return right;
    }
    if (left > lo) {
      pleft /= up(left - 1);
      --left;
      u -= pleft;
      if (u <= 0.0)
        return left;
    }
  }
  // Rounding left a sliver of mass unassigned; fall back to the mode.
  return mode;
}

//! Random table with the given margins drawn from the permutation law
//! P(n_jk) = prod N_j+! prod N_+k! / (n! prod n_jk!), built row by row with
//! conditional hypergeometric draws.
inline ContingencyTable
patefield_sample(std::span<const std::int64_t> row_margins,
                 std::span<const std::int64_t> col_margins,
                 rng::Stream& stream)
{
  if (row_margins.empty() || col_margins.empty())
    throw DomainError("patefield_sample: empty margins");
  std::int64_t rtotal = 0;
  std::int64_t ctotal = 0;
  for (auto r : row_margins) {
    if (r < 0)
      throw DomainError("patefield_sample: negative margin");
    rtotal += r;
  }
  for (auto c : col_margins) {
    if (c < 0)
      throw DomainError("patefield_sample: negative margin");
    ctotal += c;
  }
  if (rtotal != ctotal)
    throw DomainError("patefield_sample: row and column totals differ");

  const std::size_t J = row_margins.size();
  const std::size_t K = col_margins.size();
  std::vector<std::int64_t> cells(J * K, 0);
  std::vector<std::int64_t> cols(col_margins.begin(), col_margins.end());
  std::int64_t remaining = rtotal;
  for (std::size_t j = 0; j + 1 < J; ++j) {
    std::int64_t row_left = row_margins[j];
    std::int64_t pool = remaining;
    for (std::size_t k = 0; k + 1 < K && row_left > 0; ++k) {
      const std::int64_t x = hypergeometric(pool, cols[k], row_left, stream);
      cells[j * K + k] = x;
      pool -= cols[k];
      cols[k] -= x;
      row_left -= x;
    }
    cells[j * K + (K - 1)] += row_left;
    cols[K - 1] -= row_left;
    remaining -= row_margins[j];
  }
  for (std::size_t k = 0; k < K; ++k)
    cells[(J - 1) * K + k] = cols[k];
  return { J, K, std::move(cells) };
}

//! Cell counts of a uniformly random re-pairing of the data behind `table`.
inline ContingencyTable
permute_table(const ContingencyTable& table, rng::Stream& stream)
{
  return patefield_sample(table.row_margins(), table.col_margins(), stream);
}

} // namespace usp
