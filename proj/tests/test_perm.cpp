#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include <usp/usp.hpp>

#include "support.hpp"

using namespace usp;

namespace {

double
log_factorial(std::int64_t k)
{
  return std::lgamma(static_cast<double>(k) + 1.0);
}

//! Exact permutation law of a table given its margins.
double
table_probability(const ContingencyTable& t)
{
  double l = -log_factorial(t.total());
  for (auto r : t.row_margins())
    l += log_factorial(r);
  for (auto c : t.col_margins())
    l += log_factorial(c);
  for (auto c : t.counts())
    l -= log_factorial(c);
  return std::exp(l);
}

//! Chi-square goodness of fit p-value of observed counts against probs.
double
gof_pvalue(const std::vector<double>& observed, const std::vector<double>& probs,
           double total)
{
  double x2 = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double e = probs[i] * total;
    x2 += (observed[i] - e) * (observed[i] - e) / e;
  }
  return numeric::chi_squared_sf(x2, static_cast<double>(probs.size() - 1));
}

} // namespace

TEST(Permutation, IsBijectionAndReproducible)
{
  for (std::size_t n : { 0u, 1u, 2u, 17u, 200u }) {
    const auto p = permutation_at(n, 1234, 5);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_EQ(sorted[i], i);
    EXPECT_EQ(p, permutation_at(n, 1234, 5));
  }
  const auto a = PermutationBatch::generate(30, 50, 9);
  const auto b = PermutationBatch::generate(30, 50, 9);
  EXPECT_EQ(a.perms, b.perms);
  EXPECT_EQ(a.at(17), a.perms[17]);
  EXPECT_NE(a.perms[0], a.perms[1]);
}

TEST(Permutation, UniformOverSmallSymmetricGroup)
{
  std::map<std::vector<std::size_t>, double> counts;
  const int draws = 24000;
  for (int b = 0; b < draws; ++b)
    counts[permutation_at(4, 55, static_cast<std::size_t>(b))] += 1.0;
  ASSERT_EQ(counts.size(), 24u);
  std::vector<double> obs;
  for (auto& [k, v] : counts)
    obs.push_back(v);
  EXPECT_GT(gof_pvalue(obs, std::vector<double>(24, 1.0 / 24), draws), 0.001);
}

TEST(PValue, DefinitionAndTies)
{
  std::vector<double> nulls{ 1.0, 2.0, 3.0, 2.0 };
  EXPECT_EQ(pvalue(2.0, nulls), (PValue{ 4, 5 }));
  EXPECT_EQ(pvalue(5.0, nulls), (PValue{ 1, 5 }));
  EXPECT_EQ(pvalue(0.0, nulls), (PValue{ 5, 5 }));
  EXPECT_EQ(pvalue(2.0, nulls).str(), "4/5");
  EXPECT_THROW(pvalue(1.0, std::span<const double>()), DomainError);
  EXPECT_TRUE((PValue{ 5, 100 }).at_most(0.05));
  EXPECT_FALSE((PValue{ 5, 100 }).below(0.05));
}

TEST(PValue, MaxRejectingCount)
{
  EXPECT_EQ(max_rejecting_count(99, 0.05, false), 4);
  EXPECT_EQ(max_rejecting_count(99, 0.05, true), 3);
  EXPECT_EQ(max_rejecting_count(99, 0.1, false), 9);
  EXPECT_EQ(max_rejecting_count(9, 0.05, false), -1);
  EXPECT_EQ(max_rejecting_count(19, 0.05, false), 0);
  // Brute force against the p-value comparison itself.
  for (std::size_t B : { 1u, 7u, 99u, 250u, 2398u })
    for (double a : { 0.01, 0.05, 0.0041666, 0.1, 0.37 })
      for (bool strict : { false, true }) {
        long long k = -1;
        for (std::size_t c = 0; c <= B; ++c) {
          const auto p = pvalue_from_count(c, B);
          if (strict ? p.below(a) : p.at_most(a))
            k = static_cast<long long>(c);
        }
        EXPECT_EQ(max_rejecting_count(B, a, strict), k);
      }
}

TEST(Hypergeometric, MatchesPmf)
{
  auto s = rng::make_stream(4, { 0 });
  const std::int64_t N = 30, K = 12, d = 9;
  std::vector<double> obs(static_cast<std::size_t>(d + 1), 0.0);
  const int draws = 40000;
  for (int i = 0; i < draws; ++i)
    obs[static_cast<std::size_t>(hypergeometric(N, K, d, s))] += 1.0;
  std::vector<double> probs;
  std::vector<double> o2;
  for (std::int64_t x = 0; x <= d; ++x) {
    const double p = std::exp(log_factorial(K) - log_factorial(x) - log_factorial(K - x) +
                              log_factorial(N - K) - log_factorial(d - x) -
                              log_factorial(N - K - d + x) -
                              (log_factorial(N) - log_factorial(d) - log_factorial(N - d)));
    // Pool the far tail so every expected count is at least 5.
    if (p * draws < 5.0 && !probs.empty() && x > 4) {
      probs.back() += p;
      o2.back() += obs[static_cast<std::size_t>(x)];
    } else {
      probs.push_back(p);
      o2.push_back(obs[static_cast<std::size_t>(x)]);
    }
  }
  EXPECT_GT(gof_pvalue(o2, probs, draws), 0.001);
  EXPECT_THROW(hypergeometric(5, 6, 1, s), DomainError);
}

TEST(Patefield, TwoByTwoLaw)
{
  // Exact law by enumerating n11 in {0, 1, 2}.
  std::vector<double> probs;
  for (int a = 0; a <= 2; ++a)
    probs.push_back(table_probability(
      ContingencyTable::from_rows({ { a, 2 - a }, { 2 - a, a } })));
  EXPECT_NEAR(probs[0], 1.0 / 6, 1e-12);
  EXPECT_NEAR(probs[1], 4.0 / 6, 1e-12);
  EXPECT_NEAR(probs[2], 1.0 / 6, 1e-12);
  auto s = rng::make_stream(6, { 0 });
  const std::vector<std::int64_t> r{ 2, 2 }, c{ 2, 2 };
  std::vector<double> obs(3, 0.0);
  for (int i = 0; i < 20000; ++i) {
    const auto t = patefield_sample(r, c, s);
    ASSERT_EQ(std::vector<std::int64_t>(t.row_margins().begin(), t.row_margins().end()), r);
    ASSERT_EQ(std::vector<std::int64_t>(t.col_margins().begin(), t.col_margins().end()), c);
    obs[static_cast<std::size_t>(t(0, 0))] += 1.0;
  }
  EXPECT_GT(gof_pvalue(obs, probs, 20000), 0.001);
}

TEST(Patefield, ThreeByThreeLawByEnumeration)
{
  const std::vector<std::int64_t> r{ 3, 2, 2 }, c{ 1, 4, 2 };
  // Enumerate every table with these margins.
  std::map<std::vector<std::int64_t>, double> law;
  for (std::int64_t a = 0; a <= 1; ++a)
    for (std::int64_t b = 0; b <= 3; ++b)
      for (std::int64_t d = 0; d <= 1; ++d)
        for (std::int64_t e = 0; e <= 2; ++e) {
          const std::int64_t cc = 3 - a - b, f = 2 - d - e;
          const std::int64_t g = 1 - a - d, h = 4 - b - e, i = 2 - cc - f;
          if (cc < 0 || f < 0 || g < 0 || h < 0 || i < 0 || g + h + i != 2)
            continue;
          std::vector<std::int64_t> cells{ a, b, cc, d, e, f, g, h, i };
          law[cells] = table_probability(ContingencyTable(3, 3, cells));
        }
  double total = 0.0;
  for (auto& [k, p] : law)
    total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  auto s = rng::make_stream(7, { 0 });
  std::map<std::vector<std::int64_t>, double> counts;
  const int draws = 30000;
  for (int k = 0; k < draws; ++k) {
    const auto t = patefield_sample(r, c, s);
    counts[std::vector<std::int64_t>(t.counts().begin(), t.counts().end())] += 1;
  }
  std::vector<double> obs, probs;
  for (auto& [k, p] : law) {
    probs.push_back(p);
    obs.push_back(counts[k]);
  }
  EXPECT_EQ(counts.size(), law.size());
  EXPECT_GT(gof_pvalue(obs, probs, draws), 0.001);
}

TEST(Patefield, ErrorsAndDegenerateTables)
{
  auto s = rng::make_stream(8, { 0 });
  const std::vector<std::int64_t> a{ 2, 2 }, b{ 3, 2 }, neg{ -1, 5 };
  EXPECT_THROW(patefield_sample(a, b, s), DomainError);
  EXPECT_THROW(patefield_sample(neg, std::vector<std::int64_t>{ 4 }, s), DomainError);
  const auto one = ContingencyTable::from_rows({ { 7 } });
  EXPECT_EQ(permute_table(one, s), one);
  EXPECT_THROW(ContingencyTable::from_rows({ { 1, -1 } }), DomainError);
}

TEST(Patefield, AgreesWithLabelPermutation)
{
  const auto table = ContingencyTable::from_rows({ { 2, 1 }, { 1, 2 } });
  const auto [x, y] = expand_table(table);
  auto s = rng::make_stream(9, { 0 });
  const int draws = 20000;
  std::map<std::int64_t, double> pa, pb;
  for (int i = 0; i < draws; ++i) {
    pa[permute_table(table, s)(0, 0)] += 1.0 / draws;
    const auto perm = permutation_at(y.size(), 10, static_cast<std::size_t>(i));
    std::vector<int> py(y.size());
    for (std::size_t k = 0; k < y.size(); ++k)
      py[k] = y[perm[k]];
    pb[tabulate(x, py, 2, 2)(0, 0)] += 1.0 / draws;
  }
  double tv = 0.0;
  for (std::int64_t v = 0; v <= 3; ++v)
    tv += std::abs(pa[v] - pb[v]);
  EXPECT_LT(0.5 * tv, 0.02);
}
