#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "numeric.hpp"

namespace usp {

//! Observations stored one per row, so each observation is a contiguous span
//! of doubles. Labels and sampled paths use the same layout.
using Points =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double>
row_span(const Points& p, Eigen::Index i)
{
  return { p.data() + i * p.cols(), static_cast<std::size_t>(p.cols()) };
}

//! Raised when fewer observations are supplied than a statistic needs.
class InsufficientSample : public std::invalid_argument
{
public:
  explicit InsufficientSample(std::size_t n, std::size_t needed = 4)
    : std::invalid_argument("insufficient sample: n = " + std::to_string(n) +
                            ", need at least " + std::to_string(needed))
  {}
};

inline void
require_sample_size(std::size_t n, std::size_t needed = 4)
{
  if (n < needed)
    throw InsufficientSample(n, needed);
}

//! n observation pairs (x_i, y_i).
struct PairedSample
{
  Points x;
  Points y;

  PairedSample() = default;
  PairedSample(Points xs, Points ys)
    : x(std::move(xs))
    , y(std::move(ys))
  {
    if (x.rows() != y.rows())
      throw std::invalid_argument("PairedSample: x and y row counts differ");
  }

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }

  //! The sample (x_i, y_{perm(i)}).
  PairedSample permuted_y(std::span<const std::size_t> perm) const
  {
    Points py(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      py.row(i) = y.row(static_cast<Eigen::Index>(perm[i]));
    return { x, std::move(py) };
  }
};

//! J x K table of nonnegative counts with cached margins.
class ContingencyTable
{
public:
  ContingencyTable() = default;

  ContingencyTable(std::size_t rows, std::size_t cols,
                   std::vector<std::int64_t> counts)
    : rows_(rows)
    , cols_(cols)
    , counts_(std::move(counts))
  {
    if (rows == 0 || cols == 0)
      throw DomainError("ContingencyTable: empty dimension");
    if (counts_.size() != rows * cols)
      throw DomainError("ContingencyTable: count vector has wrong length");
    row_margins_.assign(rows, 0);
    col_margins_.assign(cols, 0);
    for (std::size_t j = 0; j < rows; ++j)
      for (std::size_t k = 0; k < cols; ++k) {
        const std::int64_t c = counts_[j * cols + k];
        if (c < 0)
          throw DomainError("ContingencyTable: negative count");
        row_margins_[j] += c;
        col_margins_[k] += c;
        total_ += c;
      }
  }

  static ContingencyTable from_rows(
    const std::vector<std::vector<std::int64_t>>& rows)
  {
    if (rows.empty())
      throw DomainError("ContingencyTable: no rows");
    std::vector<std::int64_t> flat;
    for (const auto& r : rows) {
      if (r.size() != rows.front().size())
        throw DomainError("ContingencyTable: ragged rows");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return { rows.size(), rows.front().size(), std::move(flat) };
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::int64_t total() const { return total_; }
  std::int64_t operator()(std::size_t j, std::size_t k) const
  {
    return counts_[j * cols_ + k];
  }
  std::span<const std::int64_t> counts() const { return counts_; }
  std::span<const std::int64_t> row_margins() const { return row_margins_; }
  std::span<const std::int64_t> col_margins() const { return col_margins_; }

  friend bool operator==(const ContingencyTable& a, const ContingencyTable& b)
  {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.counts_ == b.counts_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> row_margins_;
  std::vector<std::int64_t> col_margins_;
  std::int64_t total_ = 0;
};

//! Cross-tabulates 1-based category labels into a rows x cols table.
inline ContingencyTable
tabulate(std::span<const int> x, std::span<const int> y, std::size_t rows,
         std::size_t cols)
{
  if (x.size() != y.size())
    throw std::invalid_argument("tabulate: label vectors differ in length");
  std::vector<std::int64_t> counts(rows * cols, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 1 || static_cast<std::size_t>(x[i]) > rows || y[i] < 1 ||
        static_cast<std::size_t>(y[i]) > cols)
      throw DomainError("tabulate: label outside the category range");
    ++counts[static_cast<std::size_t>(x[i] - 1) * cols +
             static_cast<std::size_t>(y[i] - 1)];
  }
  return { rows, cols, std::move(counts) };
}

//! Expands a table back into label vectors, row-major cell order.
inline std::pair<std::vector<int>, std::vector<int>>
expand_table(const ContingencyTable& table)
{
  std::vector<int> x;
  std::vector<int> y;
  for (std::size_t j = 0; j < table.rows(); ++j)
    for (std::size_t k = 0; k < table.cols(); ++k)
      for (std::int64_t c = 0; c < table(j, k); ++c) {
        x.push_back(static_cast<int>(j + 1));
        y.push_back(static_cast<int>(k + 1));
      }
  return { std::move(x), std::move(y) };
}

//! Labels as a one-column point matrix for the indicator basis.
inline Points
label_points(std::span<const int> labels)
{
  Points p(static_cast<Eigen::Index>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i)
    p(static_cast<Eigen::Index>(i), 0) = labels[i];
  return p;
}

} // namespace usp
