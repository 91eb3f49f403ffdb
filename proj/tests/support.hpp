#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <usp/usp.hpp>

namespace usp::testsupport {

inline Points
uniform_points(std::size_t n, std::size_t d, rng::Stream& s)
{
  Points p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index l = 0; l < p.cols(); ++l)
      p(i, l) = rng::uniform01(s);
  return p;
}

inline PairedSample
uniform_sample(std::size_t n, std::size_t dx, std::size_t dy, rng::Stream& s)
{
  Points x = uniform_points(n, dx, s);
  Points y = uniform_points(n, dy, s);
  return { std::move(x), std::move(y) };
}

inline std::vector<int>
random_labels(std::size_t n, int levels, rng::Stream& s)
{
  std::vector<int> v(n);
  for (auto& x : v)
    x = 1 + static_cast<int>(std::uniform_int_distribution<int>(0, levels - 1)(s));
  return v;
}

//! Random subset of `pool` with between 1 and `max_size` elements.
template<class T>
std::vector<T>
random_subset(const std::vector<T>& pool, std::size_t max_size, rng::Stream& s)
{
  std::vector<T> copy = pool;
  std::shuffle(copy.begin(), copy.end(), s);
  const std::size_t k = 1 + std::uniform_int_distribution<std::size_t>(
                              0, std::min(max_size, copy.size()) - 1)(s);
  copy.resize(k);
  return copy;
}

} // namespace usp::testsupport
