#pragma once

#include <vector>

#include "skembed/measure.hpp"

namespace skembed {

class TangentProfile;

enum class CurvePreset { vallois, azema_yor, local_time_at_x, custom };

const char* preset_name(CurvePreset p);

struct CurveBreakpoint {
  double s = 0.0;
  double F = 0.0;
  double h = 0.0;
};

/// Piecewise-linear curve s -> (F(s), h(s)) starting at the origin.
/// Presets:
///   vallois          F == 0,       h(s) = s,        up to c(0)
///   azema_yor        F = h = s/sqrt(2),             up to the top kink
///   local_time_at_x  trace (s ^ x, s),              diagonal then vertical
class EmbeddingCurve {
 public:
  static EmbeddingCurve from_breakpoints(std::vector<CurveBreakpoint> pts);
  static EmbeddingCurve preset(CurvePreset tag, const CenteredAtomicMeasure& mu, double x = 0.0);

  double F(double s) const;
  double h(double s) const;
  /// Right-sided slopes; at s_end the final segment's slopes are returned.
  double F_right_slope(double s) const;
  double h_right_slope(double s) const;

  const std::vector<CurveBreakpoint>& breakpoints() const noexcept { return pts_; }
  double s_end() const noexcept { return pts_.back().s; }
  std::size_t segment_count() const noexcept { return pts_.size() - 1; }
  /// Index of the segment containing s (clamped to the last one).
  std::size_t segment_index(double s) const;

  CurvePreset preset_tag() const noexcept { return tag_; }
  double preset_x() const noexcept { return preset_x_; }

 private:
  EmbeddingCurve(std::vector<CurveBreakpoint> pts, CurvePreset tag, double preset_x);

  std::vector<CurveBreakpoint> pts_;
  CurvePreset tag_ = CurvePreset::custom;
  double preset_x_ = 0.0;
};

struct SlopeViolation {
  double s = 0.0;
  double lhs = 0.0;  // h'(s)
  double rhs = 0.0;  // max(F' S, F' R)
};

struct AdmissibilityReport {
  double zeta = 0.0;  // +inf when the curve never meets the potential
  bool ok = false;
  std::vector<SlopeViolation> violations;
  bool touches_c = false;
};

/// First s at which h(s) >= c(F(s)); +inf if the curve is exhausted first.
/// Throws CurveAboveC for curves that start above the potential.
double compute_zeta(const EmbeddingCurve& curve, const PotentialFunction& c);

/// Grid check of the slope condition h' >= max(F' S, F' R) against a profile
/// built on the same curve, at every profile grid point. Violations are
/// reported, not thrown.
AdmissibilityReport validate(const EmbeddingCurve& curve, const TangentProfile& profile,
                             double tol = 1e-9);

}  // namespace skembed
