#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace scfp::stats {

struct Interval {
  double lo = 0;
  double hi = 0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

// Wilson score interval for k successes in n trials.
inline Interval wilson(std::uint64_t k, std::uint64_t n, double z = 1.959963984540054) {
  if (n == 0) return {0, 1};
  const double nn = static_cast<double>(n);
  const double ph = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double den = 1 + z2 / nn;
  const double centre = (ph + z2 / (2 * nn)) / den;
  const double half = z * std::sqrt(ph * (1 - ph) / nn + z2 / (4 * nn * nn)) / den;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Rate interval p +- 3 sqrt(p(1-p)/n) for a binomial with known p.
inline Interval binomial_3sigma(double p, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("binomial interval needs n > 0");
  const double sd = std::sqrt(p * (1 - p) / static_cast<double>(n));
  return {std::max(0.0, p - 3 * sd), std::min(1.0, p + 3 * sd)};
}

// Geometric(p) on {1, 2, ...}: P(L = j) = (1-p)^(j-1) p.
inline double geometric_pmf(double p, unsigned j) { return std::pow(1 - p, j - 1) * p; }

struct ChiSquare {
  double statistic = 0;
  unsigned dof = 0;
  double critical = 0;  // 5% level
  bool pass() const { return statistic <= critical; }
};

inline double chi_square_critical_5pct(unsigned dof) {
  static constexpr double table[] = {0, 3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307};
  if (dof == 0 || dof > 10) throw std::invalid_argument("chi-square table covers 1..10 degrees of freedom");
  return table[dof];
}

// Bins 1, 2, 3, 4 and >= 5 against geometric(p).
inline ChiSquare chi_square_geometric(const std::map<std::uint64_t, std::uint64_t>& hist, double p) {
  std::uint64_t total = 0;
  for (auto& [v, c] : hist) {
    if (v == 0) throw std::invalid_argument("geometric samples start at 1");
    total += c;
  }
  if (total == 0) throw std::invalid_argument("empty histogram");
  double obs[5] = {0, 0, 0, 0, 0};
  for (auto& [v, c] : hist) obs[std::min<std::uint64_t>(v, 5) - 1] += static_cast<double>(c);
  double expect[5];
  double tail = 1;
  for (unsigned j = 1; j <= 4; ++j) {
    expect[j - 1] = geometric_pmf(p, j) * static_cast<double>(total);
    tail -= geometric_pmf(p, j);
  }
  expect[4] = tail * static_cast<double>(total);
  ChiSquare r;
  for (unsigned i = 0; i < 5; ++i) r.statistic += (obs[i] - expect[i]) * (obs[i] - expect[i]) / expect[i];
  r.dof = 4;
  r.critical = chi_square_critical_5pct(r.dof);
  return r;
}

inline double mean_of(const std::map<std::uint64_t, std::uint64_t>& hist) {
  double s = 0, n = 0;
  for (auto& [v, c] : hist) {
    s += static_cast<double>(v) * static_cast<double>(c);
    n += static_cast<double>(c);
  }
  return n ? s / n : 0.0;
}

}  // namespace scfp::stats
