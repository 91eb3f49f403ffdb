#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "numeric.hpp"
#include "sample.hpp"

namespace usp {

//! Raised when the trace route is asked to handle a non-product truncation.
class NonProductTruncation : public std::invalid_argument
{
public:
  NonProductTruncation()
    : std::invalid_argument("fast path requires product truncation")
  {}
};

//! One observation pair (x, y) as views into sample rows.
struct Observation
{
  std::span<const double> x;
  std::span<const double> y;
};

inline Observation
observation(const PairedSample& s, std::size_t i)
{
  return { row_span(s.x, static_cast<Eigen::Index>(i)),
           row_span(s.y, static_cast<Eigen::Index>(i)) };
}

//! Kernel h of the fourth-order U-statistic, summed over the truncation set
//! exactly as written (not symmetrised).
template<class XB, class YB>
double
kernel_h(const std::array<Observation, 4>& z,
         const TruncationSet<typename XB::index_type,
                             typename YB::index_type>& truncation,
         const XB& xb, const YB& yb)
{
  double h = 0.0;
  for (const auto& [j, k] : truncation) {
    const double x1 = xb.evaluate(j, z[0].x);
    const double x2 = xb.evaluate(j, z[1].x);
    const double x3 = xb.evaluate(j, z[2].x);
    const double y1 = yb.evaluate(k, z[0].y);
    const double y2 = yb.evaluate(k, z[1].y);
    const double y3 = yb.evaluate(k, z[2].y);
    const double y4 = yb.evaluate(k, z[3].y);
    h += x1 * y1 * x2 * y2 - 2.0 * x1 * y1 * x2 * y3 + x1 * y2 * x3 * y4;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Feature layout: distinct basis indices per side, their n x p feature
// matrices, and each truncation pair as a (left column, right column) pair.
// ---------------------------------------------------------------------------

using ColumnPairs = std::vector<std::pair<std::size_t, std::size_t>>;

template<class XB, class YB>
struct FeatureLayout
{
  std::vector<typename XB::index_type> left;
  std::vector<typename YB::index_type> right;
  Eigen::MatrixXd left_features;
  Eigen::MatrixXd right_features;
  std::vector<ColumnPairs> levels;
};

template<class XB, class YB>
FeatureLayout<XB, YB>
feature_layout(
  const PairedSample& sample,
  std::span<const TruncationSet<typename XB::index_type,
                                typename YB::index_type>> levels,
  const XB& xb, const YB& yb)
{
  FeatureLayout<XB, YB> out;
  std::map<typename XB::index_type, std::size_t> left_col;
  std::map<typename YB::index_type, std::size_t> right_col;
  for (const auto& truncation : levels) {
    ColumnPairs cols;
    cols.reserve(truncation.size());
    for (const auto& [j, k] : truncation) {
      auto [lit, lnew] = left_col.try_emplace(j, out.left.size());
      if (lnew)
        out.left.push_back(j);
      auto [rit, rnew] = right_col.try_emplace(k, out.right.size());
      if (rnew)
        out.right.push_back(k);
      cols.emplace_back(lit->second, rit->second);
    }
    out.levels.push_back(std::move(cols));
  }
  out.left_features = xb.features(sample.x, out.left);
  out.right_features = yb.features(sample.y, out.right);
  return out;
}

//! Reference estimator: average of h over all ordered 4-tuples of distinct
//! indices. O(n^4 |M|); kept as the correctness oracle for the fast routes.
template<class XB, class YB>
double
dhat_naive(const PairedSample& sample,
           const TruncationSet<typename XB::index_type,
                               typename YB::index_type>& truncation,
           const XB& xb, const YB& yb)
{
  const std::size_t n = sample.size();
  require_sample_size(n);
  const auto layout = feature_layout<XB, YB>(
    sample, std::span(&truncation, 1), xb, yb);
  const Eigen::MatrixXd& U = layout.left_features;
  const Eigen::MatrixXd& V = layout.right_features;
  const ColumnPairs& pairs = layout.levels.front();
  const auto e = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

  numeric::PairwiseAccumulator acc;
  for (std::size_t i1 = 0; i1 < n; ++i1)
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      if (i2 == i1)
        continue;
      for (std::size_t i3 = 0; i3 < n; ++i3) {
        if (i3 == i1 || i3 == i2)
          continue;
        for (std::size_t i4 = 0; i4 < n; ++i4) {
          if (i4 == i1 || i4 == i2 || i4 == i3)
            continue;
          double h = 0.0;
          for (const auto& [jc, kc] : pairs) {
            const auto j = e(jc);
            const auto k = e(kc);
            const double a = U(e(i1), j) * V(e(i1), k) * U(e(i2), j);
            h += a * V(e(i2), k) - 2.0 * a * V(e(i3), k) +
                 U(e(i1), j) * V(e(i2), k) * U(e(i3), j) * V(e(i4), k);
          }
          acc.add(h);
        }
      }
    }
  const auto nd = static_cast<double>(n);
  return acc.total() / (nd * (nd - 1.0) * (nd - 2.0) * (nd - 3.0));
}

// ---------------------------------------------------------------------------
// Trace route
// ---------------------------------------------------------------------------

//! Gram matrices J, K of a product truncation J0 x K0 and their copies with
//! zeroed diagonals.
struct BasisMatrixPair
{
  Eigen::MatrixXd J;
  Eigen::MatrixXd K;
  Eigen::MatrixXd Jtilde;
  Eigen::MatrixXd Ktilde;

  std::size_t size() const { return static_cast<std::size_t>(J.rows()); }
};

//! G = F F^T with explicit, order-fixed dot products so that G(i, l)
//! depends only on rows i and l of F. Reordering the rows of F therefore
//! reorders G exactly.
inline Eigen::MatrixXd
gram_from_features(const Eigen::MatrixXd& features)
{
  const Eigen::Index n = features.rows();
  const Eigen::MatrixXd ft = features.transpose();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = i; l < n; ++l) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < ft.rows(); ++c)
        s += ft(c, i) * ft(c, l);
      g(i, l) = s;
      g(l, i) = s;
    }
  return g;
}

inline Eigen::MatrixXd
zero_diagonal(Eigen::MatrixXd m)
{
  m.diagonal().setZero();
  return m;
}

template<class XB, class YB>
BasisMatrixPair
build_basis_matrices(const PairedSample& sample,
                     std::span<const typename XB::index_type> left,
                     std::span<const typename YB::index_type> right,
                     const XB& xb, const YB& yb)
{
  BasisMatrixPair m;
  m.J = gram_from_features(xb.features(sample.x, left));
  m.K = gram_from_features(yb.features(sample.y, right));
  m.Jtilde = zero_diagonal(m.J);
  m.Ktilde = zero_diagonal(m.K);
  return m;
}

template<class XB, class YB>
BasisMatrixPair
build_basis_matrices(const PairedSample& sample,
                     const TruncationSet<typename XB::index_type,
                                         typename YB::index_type>& truncation,
                     const XB& xb, const YB& yb)
{
  if (!truncation.is_product())
    throw NonProductTruncation();
  const auto left = truncation.left_indices();
  const auto right = truncation.right_indices();
  return build_basis_matrices<XB, YB>(sample, std::span(left),
                                      std::span(right), xb, yb);
}

namespace detail {

struct StatisticParts
{
  double trace = 0.0;   // tr(J~ K~)
  double cross = 0.0;   // 1' J~ K~ 1
  double total_j = 0.0; // 1' J~ 1
  double total_k = 0.0; // 1' K~ 1
};

inline double
combine(const StatisticParts& p, std::size_t n)
{
  const auto nd = static_cast<double>(n);
  return p.trace / (nd * (nd - 3.0)) -
         2.0 * p.cross / (nd * (nd - 2.0) * (nd - 3.0)) +
         p.total_j * p.total_k / (nd * (nd - 1.0) * (nd - 2.0) * (nd - 3.0));
}

inline std::vector<std::size_t>
identity_permutation(std::size_t n)
{
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i)
    p[i] = i;
  return p;
}

//! Column sums of a symmetric zero-diagonal matrix, summed in row order.
inline Eigen::VectorXd
ordered_column_sums(const Eigen::MatrixXd& m)
{
  Eigen::VectorXd r(m.cols());
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    double s = 0.0;
    const double* col = m.col(i).data();
    for (Eigen::Index l = 0; l < m.rows(); ++l)
      s += col[l];
    r(i) = s;
  }
  return r;
}

//! Trace-route parts for J~ against K~ re-indexed by perm, i.e. against the
//! matrix with entries K~(perm[i], perm[l]). The summation order is the same
//! as for a K~ rebuilt from the permuted sample, so both agree bit for bit.
inline StatisticParts
trace_parts(const Eigen::MatrixXd& jt, const Eigen::VectorXd& j_sums,
            double j_total, const Eigen::MatrixXd& kt,
            std::span<const std::size_t> perm)
{
  const auto n = static_cast<std::size_t>(jt.rows());
  std::vector<double> dots(n);
  std::vector<double> k_sums(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* jcol = jt.col(static_cast<Eigen::Index>(i)).data();
    const double* kcol = kt.col(static_cast<Eigen::Index>(perm[i])).data();
    double dot = 0.0;
    double ks = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      const double k = kcol[perm[l]];
      dot += jcol[l] * k;
      ks += k;
    }
    dots[i] = dot;
    k_sums[i] = ks;
  }
  StatisticParts p;
  p.trace = numeric::pairwise_sum(dots);
  p.cross = numeric::pairwise_sum(
    0, n, [&](std::size_t i) { return j_sums(static_cast<Eigen::Index>(i)) * k_sums[i]; });
  p.total_j = j_total;
  p.total_k = numeric::pairwise_sum(k_sums);
  return p;
}

} // namespace detail

//! D_n from the trace identity: tr(J~K~)/(n(n-3)) - 2 1'J~K~1/(n(n-2)(n-3))
//! + (1'J~1)(1'K~1)/(n(n-1)(n-2)(n-3)).
inline double
dhat_fast(const BasisMatrixPair& mats)
{
  const std::size_t n = mats.size();
  require_sample_size(n);
  const Eigen::VectorXd j_sums = detail::ordered_column_sums(mats.Jtilde);
  const auto id = detail::identity_permutation(n);
  return detail::combine(
    detail::trace_parts(mats.Jtilde, j_sums, numeric::pairwise_sum(std::span<const double>(j_sums.data(), n)),
                        mats.Ktilde, id),
    n);
}

//! D_n on (x_i, y_{perm(i)}), reusing J~ and re-indexing K~. Bit-identical
//! to dhat_fast on matrices rebuilt from the permuted sample.
inline double
dhat_fast_permuted(const BasisMatrixPair& mats,
                   std::span<const std::size_t> perm)
{
  const std::size_t n = mats.size();
  require_sample_size(n);
  if (perm.size() != n)
    throw std::invalid_argument("dhat_fast_permuted: permutation size");
  const Eigen::VectorXd j_sums = detail::ordered_column_sums(mats.Jtilde);
  return detail::combine(
    detail::trace_parts(mats.Jtilde, j_sums, numeric::pairwise_sum(std::span<const double>(j_sums.data(), n)),
                        mats.Ktilde, perm),
    n);
}

// ---------------------------------------------------------------------------
// Discrete closed form
// ---------------------------------------------------------------------------

__extension__ using int128 = __int128;

//! Integer numerator of T_n over the positive common denominator
//! n^3 (n-2)(n-3):  (n-2) sum (n N_jk - N_j+ N_+k)^2 - 4n sum N_jk N_j+ N_+k.
//! Comparisons between tables with the same margins are exact on it.
inline int128
discrete_stat_numerator(const ContingencyTable& table)
{
  const int128 n = table.total();
  require_sample_size(static_cast<std::size_t>(table.total()));
  int128 squares = 0;
  int128 weighted = 0;
  for (std::size_t j = 0; j < table.rows(); ++j)
    for (std::size_t k = 0; k < table.cols(); ++k) {
      const int128 c = table(j, k);
      const int128 rc = static_cast<int128>(table.row_margins()[j]) *
                        table.col_margins()[k];
      const int128 d = n * c - rc;
      squares += d * d;
      weighted += c * rc;
    }
  return (n - 2) * squares - 4 * n * weighted;
}

inline double
discrete_stat_denominator(const ContingencyTable& table)
{
  const auto n = static_cast<double>(table.total());
  return n * n * n * (n - 2.0) * (n - 3.0);
}

//! T_n = 1/(n(n-3)) sum (N_jk - N_j+ N_+k / n)^2
//!       - 4/(n^2 (n-2)(n-3)) sum N_jk N_j+ N_+k.
inline double
discrete_stat(const ContingencyTable& table)
{
  const int128 num = discrete_stat_numerator(table);
  return static_cast<double>(static_cast<long double>(num) /
                             static_cast<long double>(
                               discrete_stat_denominator(table)));
}

// ---------------------------------------------------------------------------
// Permutation engine
// ---------------------------------------------------------------------------

//! How a product block is evaluated under a permutation.
//!  gram:   re-index K~ and form tr(J~ K~) directly, O(n^2) per permutation.
//!  moment: tr(J~ K~) = ||U' V_perm||_F^2 - sum_i |U_i|^2 |V_perm(i)|^2 from
//!          the n x a and n x b feature matrices, O(n a b) per permutation.
enum class Route
{
  automatic,
  gram,
  moment,
};

//! Splits a list of (left, right) column pairs into disjoint product blocks
//! by grouping left columns that share the same set of right columns.
inline std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
product_blocks(const ColumnPairs& pairs)
{
  std::map<std::size_t, std::vector<std::size_t>> rows;
  std::vector<std::size_t> row_order;
  for (const auto& [l, r] : pairs) {
    auto [it, fresh] = rows.try_emplace(l);
    if (fresh)
      row_order.push_back(l);
    it->second.push_back(r);
  }
  std::map<std::vector<std::size_t>, std::size_t> by_cols;
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
    blocks;
  for (std::size_t l : row_order) {
    auto cols = rows[l];
    std::sort(cols.begin(), cols.end());
    auto [it, fresh] = by_cols.try_emplace(cols, blocks.size());
    if (fresh)
      blocks.push_back({ {}, cols });
    blocks[it->second].first.push_back(l);
  }
  for (auto& b : blocks)
    std::sort(b.first.begin(), b.first.end());
  return blocks;
}

//! Evaluates D_n for several truncation levels on (x_i, y_{perm(i)}) for
//! arbitrary permutations. Every level is a union of product blocks; blocks
//! and per-side matrices are shared between levels. Immutable after
//! construction, so one engine may serve many threads.
class PermutationEngine
{
public:
  using Level = std::vector<std::pair<std::size_t, std::size_t>>;

  //! Levels given as column pairs into the two feature matrices.
  PermutationEngine(Eigen::MatrixXd left_features,
                    Eigen::MatrixXd right_features,
                    const std::vector<ColumnPairs>& levels,
                    Route route = Route::automatic)
    : n_(static_cast<std::size_t>(left_features.rows()))
    , left_features_(std::move(left_features))
    , right_features_(std::move(right_features))
  {
    if (static_cast<std::size_t>(right_features_.rows()) != n_)
      throw std::invalid_argument("PermutationEngine: feature row mismatch");
    require_sample_size(n_);
    std::map<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>,
             std::size_t>
      block_ids;
    for (const auto& level : levels) {
      std::vector<std::size_t> ids;
      for (auto& [lcols, rcols] : product_blocks(level)) {
        auto key = std::make_pair(lcols, rcols);
        auto [it, fresh] = block_ids.try_emplace(key, blocks_.size());
        if (fresh)
          blocks_.push_back(make_block(lcols, rcols, route));
        ids.push_back(it->second);
      }
      levels_.push_back(std::move(ids));
    }
  }

  //! Levels given as products of precomputed Gram matrices (with diagonal).
  //! Each level lists (left gram, right gram) product blocks.
  static PermutationEngine from_grams(
    const std::vector<Eigen::MatrixXd>& left_grams,
    const std::vector<Eigen::MatrixXd>& right_grams,
    const std::vector<Level>& levels)
  {
    PermutationEngine e;
    if (left_grams.empty() || right_grams.empty())
      throw std::invalid_argument("PermutationEngine: no Gram matrices");
    e.n_ = static_cast<std::size_t>(left_grams.front().rows());
    require_sample_size(e.n_);
    for (const auto& g : left_grams)
      e.left_sides_.push_back(gram_side(zero_diagonal(g)));
    for (const auto& g : right_grams)
      e.right_sides_.push_back(gram_side(zero_diagonal(g)));
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> ids;
    for (const auto& level : levels) {
      std::vector<std::size_t> block_list;
      for (const auto& lr : level) {
        auto [it, fresh] = ids.try_emplace(lr, e.blocks_.size());
        if (fresh)
          e.blocks_.push_back({ lr.first, lr.second, Route::gram });
        block_list.push_back(it->second);
      }
      e.levels_.push_back(std::move(block_list));
    }
    return e;
  }

  std::size_t sample_size() const { return n_; }
  std::size_t level_count() const { return levels_.size(); }
  std::size_t block_count() const { return blocks_.size(); }

  //! Statistic of every level whose `active` flag is set (all levels when
  //! `active` is empty) for the pairing (x_i, y_{perm(i)}). An empty perm
  //! means the identity. Inactive levels are left untouched in `out`.
  void evaluate(std::span<const std::size_t> perm, std::span<double> out,
                std::span<const char> active = {}) const
  {
    std::vector<std::size_t> id;
    if (perm.empty()) {
      id = detail::identity_permutation(n_);
      perm = id;
    }
    if (perm.size() != n_ || out.size() < levels_.size())
      throw std::invalid_argument("PermutationEngine: size mismatch");
    std::vector<double> block_value(blocks_.size(), 0.0);
    std::vector<char> done(blocks_.size(), 0);
    for (std::size_t lv = 0; lv < levels_.size(); ++lv) {
      if (!active.empty() && !active[lv])
        continue;
      double s = 0.0;
      for (std::size_t b : levels_[lv]) {
        if (!done[b]) {
          block_value[b] = evaluate_block(blocks_[b], perm);
          done[b] = 1;
        }
        s += block_value[b];
      }
      out[lv] = s;
    }
  }

  std::vector<double> evaluate(std::span<const std::size_t> perm = {}) const
  {
    std::vector<double> out(levels_.size(), 0.0);
    evaluate(perm, out);
    return out;
  }

private:
  struct GramSide
  {
    Eigen::MatrixXd tilde;
    Eigen::VectorXd sums;
    double total = 0.0;
  };
  struct MomentSide
  {
    Eigen::MatrixXd features;
    Eigen::VectorXd diag;
    Eigen::VectorXd sums;
    double total = 0.0;
  };
  struct Side
  {
    std::optional<GramSide> gram;
    std::optional<MomentSide> moment;
  };
  struct Block
  {
    std::size_t left;
    std::size_t right;
    Route route;
  };

  PermutationEngine() = default;

  static Side gram_side(Eigen::MatrixXd tilde)
  {
    GramSide g;
    g.sums = detail::ordered_column_sums(tilde);
    g.total = numeric::pairwise_sum(
      std::span<const double>(g.sums.data(), static_cast<std::size_t>(g.sums.size())));
    g.tilde = std::move(tilde);
    Side s;
    s.gram = std::move(g);
    return s;
  }

  static MomentSide moment_side(Eigen::MatrixXd f)
  {
    MomentSide m;
    m.diag = f.rowwise().squaredNorm();
    const Eigen::VectorXd colsum = f.colwise().sum().transpose();
    m.sums = f * colsum - m.diag;
    m.total = numeric::pairwise_sum(
      std::span<const double>(m.sums.data(), static_cast<std::size_t>(m.sums.size())));
    m.features = std::move(f);
    return m;
  }

  static Eigen::MatrixXd columns(const Eigen::MatrixXd& f,
                                 const std::vector<std::size_t>& cols)
  {
    Eigen::MatrixXd out(f.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      out.col(static_cast<Eigen::Index>(c)) =
        f.col(static_cast<Eigen::Index>(cols[c]));
    return out;
  }

  Route choose(std::size_t a, std::size_t b, Route requested) const
  {
    if (requested != Route::automatic)
      return requested;
    if (n_ > 6000)
      return Route::moment;
    return a * b <= 6 * n_ ? Route::moment : Route::gram;
  }

  static std::size_t side_id(
    std::map<std::vector<std::size_t>, std::size_t>& cache,
    std::vector<Side>& sides, const std::vector<std::size_t>& cols)
  {
    auto [it, fresh] = cache.try_emplace(cols, sides.size());
    if (fresh)
      sides.emplace_back();
    return it->second;
  }

  Block make_block(const std::vector<std::size_t>& lcols,
                   const std::vector<std::size_t>& rcols, Route requested)
  {
    Block b;
    b.route = choose(lcols.size(), rcols.size(), requested);
    b.left = side_id(left_cache_, left_sides_, lcols);
    b.right = side_id(right_cache_, right_sides_, rcols);
    Side& ls = left_sides_[b.left];
    Side& rs = right_sides_[b.right];
    if (b.route == Route::gram) {
      if (!ls.gram)
        ls.gram = gram_side(zero_diagonal(
                              gram_from_features(columns(left_features_, lcols))))
                    .gram;
      if (!rs.gram)
        rs.gram = gram_side(zero_diagonal(gram_from_features(
                              columns(right_features_, rcols))))
                    .gram;
    } else {
      if (!ls.moment)
        ls.moment = moment_side(columns(left_features_, lcols));
      if (!rs.moment)
        rs.moment = moment_side(columns(right_features_, rcols));
    }
    return b;
  }

  double evaluate_block(const Block& b, std::span<const std::size_t> perm) const
  {
    if (b.route == Route::gram) {
      const GramSide& l = *left_sides_[b.left].gram;
      const GramSide& r = *right_sides_[b.right].gram;
      return detail::combine(
        detail::trace_parts(l.tilde, l.sums, l.total, r.tilde, perm), n_);
    }
    const MomentSide& l = *left_sides_[b.left].moment;
    const MomentSide& r = *right_sides_[b.right].moment;
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd vp(n, r.features.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      vp.row(i) = r.features.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
    const Eigen::MatrixXd c = l.features.transpose() * vp;
    double diag = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto ei = static_cast<Eigen::Index>(i);
      const auto pi = static_cast<Eigen::Index>(perm[i]);
      diag += l.diag(ei) * r.diag(pi);
      cross += l.sums(ei) * r.sums(pi);
    }
    detail::StatisticParts p;
    p.trace = c.squaredNorm() - diag;
    p.cross = cross;
    p.total_j = l.total;
    p.total_k = r.total;
    return detail::combine(p, n_);
  }

  std::size_t n_ = 0;
  Eigen::MatrixXd left_features_;
  Eigen::MatrixXd right_features_;
  std::vector<Side> left_sides_;
  std::vector<Side> right_sides_;
  std::map<std::vector<std::size_t>, std::size_t> left_cache_;
  std::map<std::vector<std::size_t>, std::size_t> right_cache_;
  std::vector<Block> blocks_;
  std::vector<std::vector<std::size_t>> levels_;
};

//! Engine over the given truncation levels of a sample.
template<class XB, class YB>
PermutationEngine
make_engine(const PairedSample& sample,
            std::span<const TruncationSet<typename XB::index_type,
                                          typename YB::index_type>> levels,
            const XB& xb, const YB& yb, Route route = Route::automatic)
{
  auto layout = feature_layout<XB, YB>(sample, levels, xb, yb);
  return PermutationEngine(std::move(layout.left_features),
                           std::move(layout.right_features), layout.levels,
                           route);
}

//! Production estimate of D_n for any truncation set.
template<class XB, class YB>
double
dhat(const PairedSample& sample,
     const TruncationSet<typename XB::index_type, typename YB::index_type>&
       truncation,
     const XB& xb, const YB& yb, Route route = Route::automatic)
{
  return make_engine<XB, YB>(sample, std::span(&truncation, 1), xb, yb, route)
    .evaluate()
    .front();
}

} // namespace usp
