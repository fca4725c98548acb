#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "skembed/errors.hpp"

namespace skembed {

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

/// A centred probability measure given by finitely many atoms,
/// sorted strictly ascending by location. Total mass 1 and mean 0
/// are enforced at construction up to the validation tolerance.
/// Immutable after construction.
class CenteredAtomicMeasure {
 public:
  explicit CenteredAtomicMeasure(std::vector<Atom> atoms, double tolerance = 1e-9);

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double tolerance() const noexcept { return tolerance_; }

  /// True for the degenerate single-atom measure (necessarily at 0).
  bool is_delta_zero() const noexcept { return atoms_.size() == 1; }

  double min_location() const noexcept { return atoms_.front().location; }
  double max_location() const noexcept { return atoms_.back().location; }

  /// mu((-inf, x))
  double mass_below(double x) const;
  /// mu((-inf, x])
  double mass_upto(double x) const;
  /// mu({x}); nonzero only when x is exactly an atom location.
  double mass_at(double x) const;

  /// E|X|, which equals the potential at the origin.
  double mean_abs() const;

 private:
  std::vector<Atom> atoms_;
  double tolerance_;
};

/// The potential c(x) = integral of |y-x| d mu(y): a piecewise-linear convex
/// function with kinks exactly at the atoms, c(x) >= |x| everywhere and
/// c(x) = |x| outside the support. One-sided slopes follow the cdf:
/// c'-(x) = 2 mu((-inf,x)) - 1 and c'+(x) = 2 mu((-inf,x]) - 1.
class PotentialFunction {
 public:
  explicit PotentialFunction(const CenteredAtomicMeasure& mu);

  double operator()(double x) const;
  double left_derivative(double x) const;
  double right_derivative(double x) const;
  std::pair<double, double> derivatives(double x) const {
    return {left_derivative(x), right_derivative(x)};
  }

  const std::vector<double>& kinks() const noexcept { return xs_; }
  const std::vector<double>& kink_values() const noexcept { return cs_; }
  std::size_t size() const noexcept { return xs_.size(); }

  double min_kink() const noexcept { return xs_.front(); }
  double max_kink() const noexcept { return xs_.back(); }

 private:
  std::vector<double> xs_;         // atom locations
  std::vector<double> cs_;         // c at each kink
  std::vector<double> cum_mass_;   // inclusive prefix masses
  std::vector<double> cum_first_;  // inclusive prefix first moments
};

/// Generalized inverse of the barycenter function b(x) = E[X | X >= x]:
/// psi(s) = sup{x : b(x) <= s}, clamped to the top atom for large s.
/// Used as an independent oracle for the reflected-maximum boundary.
double barycenter_inverse(const CenteredAtomicMeasure& mu, double s);

/// A piecewise-constant probability density on a compact interval:
/// density(x) = values[i] on [edges[i], edges[i+1]).
struct PiecewiseConstantDensity {
  std::vector<double> edges;
  std::vector<double> values;

  /// Throws BadDensity unless the edges increase, the values are
  /// nonnegative and the total integral is positive and finite.
  void check() const;
  double total_mass() const;
  double mean() const;
};

/// Quantize a density into n equal-mass atoms placed at the conditional
/// means of consecutive quantile cells; the result is re-centred exactly
/// by shifting every atom by the residual mean.
CenteredAtomicMeasure quantize(const PiecewiseConstantDensity& density, std::size_t n_atoms,
                               double tolerance = 1e-9);

}  // namespace skembed
