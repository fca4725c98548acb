#pragma once

#include <vector>

#include "skembed/tangent.hpp"

namespace skembed {

struct SpecKnot {
  double s = 0.0;      // curve position
  double l = 0.0;      // local time H(s)
  double G = 0.0;      // F(s), i.e. G(l)
  double alpha = 0.0;  // theta in B-coordinates (left-continuous step in l)
  double beta = 0.0;   // phi in B-coordinates
  double a = 0.0;      // alpha - G, upper barrier for X
  double b = 0.0;      // beta - G, lower barrier for X
  double p = 0.0;      // (1 - G')/2 on the interval ending here
};

/// The executable stopping rule: tabulated local-time scale l = H(s),
/// skew function G = F o H^{-1} (piecewise linear in l) and the barriers.
/// The table ends at l_max; whatever survival probability remains there is
/// stopped at terminal_location (a real atom when the curve meets the
/// potential, a truncation artifact bounded by gamma_floor otherwise).
class EmbeddingSpec {
 public:
  const std::vector<SpecKnot>& knots() const noexcept { return knots_; }
  double l_max() const noexcept { return knots_.back().l; }
  bool truncated() const noexcept { return truncated_; }
  double terminal_mass() const noexcept { return terminal_mass_; }
  double terminal_location() const noexcept { return terminal_location_; }
  double gamma_floor() const noexcept { return gamma_floor_; }
  CurvePreset preset_tag() const noexcept { return preset_tag_; }
  double preset_x() const noexcept { return preset_x_; }

  /// p(l) = (1 - G'(l))/2 with the left slope of the tabulated G at knots.
  double skew_probability(double l) const;
  /// s with H(s) = l, consistent with the closed-form quadrature.
  double invert_H(double l) const;
  /// H(s) for any s in the profile domain.
  double l_at_s(double s) const;

  double G_at(double l) const;      // piecewise linear
  double alpha_at(double l) const;  // left-continuous step
  double beta_at(double l) const;
  double a_at(double l) const { return alpha_at(l) - G_at(l); }
  double b_at(double l) const { return beta_at(l) - G_at(l); }

  /// Rebuild a spec from tabulated knots (e.g. a CSV read-back). Without the
  /// profile pieces, invert_H degrades to monotone linear interpolation.
  static EmbeddingSpec from_knots(std::vector<SpecKnot> knots, bool truncated,
                                  double terminal_mass, double terminal_location,
                                  double gamma_floor, CurvePreset tag, double preset_x);

  friend EmbeddingSpec build_embedding(const TangentProfile&, const EmbeddingCurve&);

 private:
  std::size_t interval_below(double l) const;

  std::vector<SpecKnot> knots_;
  std::vector<ProfilePiece> pieces_;  // for exact H evaluation
  std::vector<int> ipiece_;           // piece index per knot interval
  bool truncated_ = false;
  double terminal_mass_ = 0.0;
  double terminal_location_ = 0.0;
  double gamma_floor_ = 1e-6;
  CurvePreset preset_tag_ = CurvePreset::custom;
  double preset_x_ = 0.0;
};

/// Tabulate H by exact per-piece integration of (2h' - F'(R+S))/(R-S) and
/// assemble the stopping rule. Throws DegenerateCurve if the tangent slopes
/// collapse before the end of the profile.
EmbeddingSpec build_embedding(const TangentProfile& profile, const EmbeddingCurve& curve);

}  // namespace skembed
