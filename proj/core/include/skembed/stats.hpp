#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace skembed {

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
/// The sample is sorted in place.
inline double ks_distance(std::vector<double>& sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - F,
                             F - static_cast<double>(i) / n));
  }
  return d;
}

/// KS distance between a sample ECDF and a purely discrete reference CDF
/// given by its jump locations (ascending) and cumulative values. Both are
/// right-continuous step functions, so the supremum is attained at jumps of
/// either; left limits are checked as the merge advances.
inline double ks_distance_discrete(std::vector<double>& sample, const std::vector<double>& locs,
                                   const std::vector<double>& cums) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0, F = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sample.size() || j < locs.size()) {
    double x = std::numeric_limits<double>::infinity();
    if (i < sample.size()) x = sample[i];
    if (j < locs.size()) x = std::min(x, locs[j]);
    d = std::max(d, std::abs(static_cast<double>(i) / n - F));  // left limits at x
    while (i < sample.size() && sample[i] <= x) ++i;
    while (j < locs.size() && locs[j] <= x) F = cums[j++];
    d = std::max(d, std::abs(static_cast<double>(i) / n - F));
  }
  return d;
}

/// Two-sample KS distance; both samples are sorted in place.
inline double ks_distance_two(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSE mean_se(const std::vector<double>& xs) {
  MeanSE r;
  r.n = xs.size();
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - r.mean) * (x - r.mean);
  if (xs.size() > 1) v /= static_cast<double>(xs.size() - 1);
  r.se = std::sqrt(v / static_cast<double>(xs.size()));
  return r;
}

}  // namespace skembed
