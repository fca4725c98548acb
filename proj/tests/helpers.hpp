#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "skembed/curve.hpp"
#include "skembed/measure.hpp"
#include "skembed/tangent.hpp"

namespace testutil {

/// Approx comparison that treats matching infinities as equal.
inline void check_close_ext(double a, double b, double eps = 1e-9) {
  if (std::isinf(a) || std::isinf(b)) {
    CHECK(a == b);
  } else {
    CHECK(a == doctest::Approx(b).epsilon(eps));
  }
}

inline skembed::CenteredAtomicMeasure mu2() {
  return skembed::CenteredAtomicMeasure({{-1.0, 0.5}, {1.0, 0.5}});
}

inline skembed::CenteredAtomicMeasure mu4() {
  return skembed::CenteredAtomicMeasure({{-2.0, 0.25}, {-1.0, 0.25}, {1.0, 0.25}, {2.0, 0.25}});
}

/// Brute-force tangent slopes: dense grid search over x, with the kinks and
/// the asymptote included as candidates. Independent of the kink-walking
/// implementation.
inline std::pair<double, double> brute_tangent_slopes(const skembed::PotentialFunction& c,
                                                      double F, double h, double grid_step = 1e-4) {
  const double xmax = c.max_kink() + 1.0;
  const double xmin = c.min_kink() - 1.0;
  double R = 1.0;  // asymptote
  for (double x = F + grid_step; x <= xmax; x += grid_step)
    R = std::min(R, (c(x) - h) / (x - F));
  for (double xk : c.kinks())
    if (xk > F) R = std::min(R, (c(xk) - h) / (xk - F));
  double S = -1.0;
  for (double x = F - grid_step; x >= xmin; x -= grid_step)
    S = std::max(S, (h - c(x)) / (F - x));
  for (double xk : c.kinks())
    if (xk < F) S = std::max(S, (h - c(xk)) / (F - xk));
  return {R, S};
}

inline skembed::CenteredAtomicMeasure random_measure(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(3, 8);
  std::uniform_real_distribution<double> loc(-3.0, 3.0);
  std::uniform_real_distribution<double> mass(0.1, 1.0);
  const int n = nd(rng);
  std::vector<double> xs;
  while (static_cast<int>(xs.size()) < n) {
    const double x = loc(rng);
    bool ok = true;
    for (double v : xs)
      if (std::abs(v - x) < 0.05) ok = false;
    if (ok) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  std::vector<double> ps(static_cast<std::size_t>(n));
  double tot = 0.0;
  for (auto& p : ps) {
    p = mass(rng);
    tot += p;
  }
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    ps[static_cast<std::size_t>(i)] /= tot;
    mean += ps[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)];
  }
  std::vector<skembed::Atom> atoms;
  for (int i = 0; i < n; ++i)
    atoms.push_back({xs[static_cast<std::size_t>(i)] - mean, ps[static_cast<std::size_t>(i)]});
  return skembed::CenteredAtomicMeasure(std::move(atoms));
}

/// Random admissible curve: piecewise-linear segments whose slopes satisfy
/// h' >= max(F' S, F' R) with strict margin at each breakpoint, closed by a
/// vertical run that is guaranteed to reach the potential.
inline skembed::EmbeddingCurve random_admissible_curve(std::mt19937_64& rng,
                                                       const skembed::PotentialFunction& c) {
  std::uniform_int_distribution<int> segs(2, 7);
  std::uniform_real_distribution<double> fdist(-1.0, 1.0);
  std::uniform_real_distribution<double> margin(0.05, 0.6);
  std::uniform_real_distribution<double> len(0.05, 0.3);

  std::vector<skembed::CurveBreakpoint> pts{{0.0, 0.0, 0.0}};
  const int n = segs(rng);
  double s = 0.0, F = 0.0, h = 0.0;
  for (int i = 0; i < n; ++i) {
    if (h >= c(F) - 1e-9) break;
    const skembed::TangentLines tl = skembed::tangent_at(c, F, h);
    const double fp = fdist(rng);
    const double lb = std::max(fp * tl.S, fp * tl.R);
    const double hp = lb + margin(rng);
    double ds = len(rng);
    // stay strictly inside: cap the segment so h cannot cross c by much
    const double gap = c(F) - h;
    if (hp > 0.0) ds = std::min(ds, 0.8 * gap / hp);
    if (ds <= 1e-6) break;
    s += ds;
    F += fp * ds;
    h += hp * ds;
    pts.push_back({s, F, h});
  }
  // closing vertical run, always admissible and always touching
  const double rise = std::max(c(F) - h, 0.0) + 0.5;
  pts.push_back({s + rise, F, h + rise});
  return skembed::EmbeddingCurve::from_breakpoints(std::move(pts));
}

}  // namespace testutil
