#include <cmath>
#include <complex>
#include <set>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <usp/basis.hpp>
#include <usp/numeric.hpp>
#include <usp/rng.hpp>

using namespace usp;

namespace {

std::vector<double>
pt(std::initializer_list<double> v)
{
  return v;
}

} // namespace

TEST(FourierEval, ClosedFormValues)
{
  const auto x0 = pt({ 0.0 });
  const auto xq = pt({ 0.25 });
  EXPECT_DOUBLE_EQ(fourier_eval(FourierIndex(0, { 0 }), pt({ 0.37 })), 1.0);
  EXPECT_DOUBLE_EQ(fourier_eval(FourierIndex(0, { 1 }), x0), std::numbers::sqrt2);
  EXPECT_NEAR(fourier_eval(FourierIndex(1, { 1 }), xq), -std::numbers::sqrt2,
              1e-15);
}

TEST(FourierEval, MatchesComplexForm)
{
  // sqrt(2) Re(exp(-a pi i / 2) prod exp(-2 pi i m_l x_l)) evaluated in
  // long double complex arithmetic.
  auto s = rng::make_stream(7, { 0 });
  for (int rep = 0; rep < 200; ++rep) {
    const int a = rep % 2;
    std::vector<int> m{ 1 + rep % 3, rep % 4 };
    std::vector<double> x{ rng::uniform01(s), rng::uniform01(s) };
    std::complex<long double> z = std::polar(1.0L, -a * std::numbers::pi_v<long double> / 2);
    for (std::size_t l = 0; l < 2; ++l)
      z *= std::polar(1.0L, -2 * std::numbers::pi_v<long double> * m[l] * x[l]);
    EXPECT_NEAR(fourier_eval(FourierIndex(a, m), x),
                static_cast<double>(std::sqrt(2.0L) * z.real()), 1e-12);
  }
}

TEST(FourierEval, DomainErrors)
{
  EXPECT_THROW(fourier_eval(FourierIndex(0, { 1 }), pt({ 1.5 })), DomainError);
  EXPECT_THROW(fourier_eval(FourierIndex(0, { 1 }), pt({ -0.1 })), DomainError);
  EXPECT_THROW(FourierIndex(1, { 0 }), DomainError);
  EXPECT_THROW(FourierIndex(2, { 1 }), DomainError);
}

TEST(FourierBasis, OrthonormalUnderTrapezoid)
{
  const auto idx = fourier_indices(1, 3, 0);
  ASSERT_EQ(idx.size(), 7u);
  const std::size_t G = 2049;
  for (const auto& a : idx)
    for (const auto& b : idx) {
      std::vector<double> v(G);
      for (std::size_t g = 0; g < G; ++g) {
        const double x = static_cast<double>(g) / (G - 1);
        v[g] = fourier_eval(a, std::span(&x, 1)) * fourier_eval(b, std::span(&x, 1));
      }
      EXPECT_NEAR(numeric::trapezoid_unit(v), a == b ? 1.0 : 0.0, 1e-6);
    }
}

TEST(FourierBasis, BoundedBySqrtTwo)
{
  auto s = rng::make_stream(9, { 0 });
  const auto idx = fourier_indices(2, 4);
  for (int r = 0; r < 100; ++r) {
    std::vector<double> x{ rng::uniform01(s), rng::uniform01(s) };
    for (const auto& i : idx)
      EXPECT_LE(std::abs(fourier_eval(i, x)), std::numbers::sqrt2 + 1e-15);
  }
}

TEST(IndicatorEval, Definition)
{
  EXPECT_EQ(indicator_eval(2, 2), 1.0);
  EXPECT_EQ(indicator_eval(2, 5), 0.0);
  for (int x = 1; x <= 5; ++x) {
    double s = 0.0;
    for (int j = 1; j <= 5; ++j)
      s += indicator_eval(j, x);
    EXPECT_EQ(s, 1.0);
  }
  IndicatorBasis basis(3);
  const double bad = 4.0;
  EXPECT_THROW(basis.evaluate({ 1 }, std::span(&bad, 1)), DomainError);
}

TEST(BmCoefficient, ZeroPathGivesOneHalf)
{
  std::vector<double> zero(50, 0.0);
  for (int l = 1; l <= 4; ++l)
    EXPECT_DOUBLE_EQ(bm_coefficient(zero, l), 0.5);
  EXPECT_NEAR(bm_basis_eval(zero, 1, 1), -std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(bm_basis_eval(zero, 1, 2), std::numbers::sqrt2, 1e-15);
}

TEST(BmCoefficient, SinePathAgainstQuadratureOracle)
{
  const std::size_t G = 1000;
  const double w = std::numbers::pi / 2;
  auto path_fn = [&](double t) { return std::sin(w * t) * std::numbers::sqrt2 / w; };
  std::vector<double> path(G);
  for (std::size_t g = 0; g < G; ++g)
    path[g] = path_fn(static_cast<double>(g) / (G - 1));
  // Oracle: 64-point Gauss-Legendre integral, then Phi.
  const auto rule = numeric::gauss_legendre(64);
  const double integral = numeric::integrate(
    rule, 0.0, 1.0, [&](double t) { return path_fn(t) * std::sin(w * t); });
  const double oracle =
    0.5 * std::erfc(-(std::numbers::sqrt2 * w * integral) / std::numbers::sqrt2);
  EXPECT_NEAR(oracle, 0.841344746068543, 1e-12);
  EXPECT_NEAR(bm_coefficient(path, 1), oracle, 1e-4);
}

TEST(BmCoefficient, Errors)
{
  EXPECT_THROW(bm_coefficient(std::span<const double>(), 1), DomainError);
  std::vector<double> p(10, 0.1);
  EXPECT_THROW(bm_coefficient(p, 0), DomainError);
  EXPECT_THROW(bm_basis_eval(p, 1, 0), DomainError);
  BmCoefficientConfig bad{ 0, 10 };
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(Truncation, RectangleSizes)
{
  EXPECT_EQ(rectangle_truncation(1).size(), 4u);
  EXPECT_EQ(rectangle_truncation(2).size(), 16u);
  EXPECT_EQ(rectangle_truncation(7).size(), 196u);
  EXPECT_THROW(rectangle_truncation(0), DomainError);
  for (const auto& [j, k] : rectangle_truncation(3)) {
    EXPECT_FALSE(is_constant(j));
    EXPECT_FALSE(is_constant(k));
  }
}

TEST(Truncation, SobolevMatchesEnumeration)
{
  // Oracle: brute-force enumeration of {(a, m) : 1 <= |m|_1 <= T} per side.
  auto count = [](int T, int d) {
    int c = 0;
    std::vector<int> m(static_cast<std::size_t>(d), 0);
    auto rec = [&](auto& self, int pos) -> void {
      if (pos == d) {
        int s = 0;
        for (int v : m)
          s += v;
        if (s >= 1 && s <= T)
          c += 2;
        return;
      }
      for (int v = 0; v <= T; ++v) {
        m[static_cast<std::size_t>(pos)] = v;
        self(self, pos + 1);
      }
    };
    rec(rec, 0);
    return static_cast<std::size_t>(c);
  };
  EXPECT_EQ(sobolev_truncation(1, 1, 1, 1).size(), 4u);
  EXPECT_EQ(sobolev_truncation(2, 1, 1, 1).size(), 8u);
  for (int mx = 1; mx <= 3; ++mx)
    for (int d = 1; d <= 3; ++d)
      EXPECT_EQ(sobolev_truncation(mx, 2, d, 1).size(), count(mx, d) * count(2, 1));
  const auto t = sobolev_truncation(1, 1, 2, 1);
  const auto left = t.left_indices();
  ASSERT_EQ(left.size(), 4u);
  EXPECT_EQ(left[0], FourierIndex(0, { 0, 1 }));
  EXPECT_EQ(left[1], FourierIndex(0, { 1, 0 }));
  EXPECT_EQ(left[2], FourierIndex(1, { 0, 1 }));
  EXPECT_EQ(left[3], FourierIndex(1, { 1, 0 }));
  EXPECT_THROW(sobolev_truncation(0, 1, 1, 1), DomainError);
}

TEST(Truncation, InvariantsAndDeterminism)
{
  const FourierIndex c(0, { 0 });
  const FourierIndex a(0, { 1 });
  using P = FourierTruncation::pair_type;
  EXPECT_THROW(FourierTruncation(std::vector<P>{ { c, a } }), DomainError);
  FourierTruncation dup(std::vector<P>{ { a, a }, { a, a } });
  EXPECT_EQ(dup.size(), 1u);
  EXPECT_EQ(rectangle_truncation(4), rectangle_truncation(4));
  EXPECT_TRUE(rectangle_truncation(3).is_product());
  EXPECT_FALSE(rectangle_truncation(3).prefix(7).is_product());
}

TEST(Truncation, MaxNormOrderingIsNested)
{
  const auto w = fourier_max_norm_ordering(1, 1, 64);
  ASSERT_EQ(w.size(), 64u);
  // The first 4 t^2 pairs are exactly the rectangle of level t.
  for (int t = 1; t <= 4; ++t) {
    const auto p = w.prefix(static_cast<std::size_t>(4 * t * t));
    std::set<FourierTruncation::pair_type> a(p.begin(), p.end());
    const auto r = rectangle_truncation(t);
    std::set<FourierTruncation::pair_type> b(r.begin(), r.end());
    EXPECT_EQ(a, b);
  }
}

TEST(SobolevGram, MatchesFeatureGram)
{
  auto s = rng::make_stream(11, { 0 });
  for (std::size_t d : { 1u, 2u, 3u }) {
    Points x(9, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index l = 0; l < x.cols(); ++l)
        x(i, l) = rng::uniform01(s);
    x(1, 0) = x(0, 0); // exercise the small-angle branch
    for (int T : { 1, 3, 6 }) {
      const auto idx = fourier_indices(d, T);
      const Eigen::MatrixXd f = FourierBasis(d).features(x, idx);
      const Eigen::MatrixXd oracle = f * f.transpose();
      const Eigen::MatrixXd g = fourier_sobolev_gram(x, T);
      EXPECT_LT((g - oracle).cwiseAbs().maxCoeff(), 1e-10)
        << "d=" << d << " T=" << T;
    }
  }
}
