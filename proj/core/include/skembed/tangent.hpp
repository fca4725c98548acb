#pragma once

#include <limits>
#include <vector>

#include "skembed/curve.hpp"
#include "skembed/measure.hpp"

namespace skembed {

/// Tangent contact data from a point (F, h) strictly below the potential:
/// R is the slope of the steepest line through the point staying below c on
/// the right, S its mirror on the left; theta / phi are the outermost contact
/// locations (+/-inf when the contact is the asymptote ray).
struct TangentLines {
  double theta = 0.0;
  double phi = 0.0;
  double R = 0.0;
  double S = 0.0;
};

/// Contacts and slopes for a single point. At h == c(F) the terminal
/// convention applies: R = c'+(F), S = c'-(F), theta = phi = F.
/// Throws PointAboveC for h > c(F).
TangentLines tangent_at(const PotentialFunction& c, double F, double h);

struct GridControl {
  double ds_max = 0.0;       // <= 0: auto, span/1000
  double gamma_floor = 1e-6; // truncate once the survival probability drops below this
};

enum class ProfileEnd { touched_c, gamma_floor_hit, curve_exhausted };

/// Maximal sub-interval of one curve segment on which both contacts are
/// constant. All per-point quantities evaluate exactly from the stored
/// constants; the local-time density H' is a ratio of affine functions of s
/// on the piece and integrates in closed form.
struct ProfilePiece {
  double s0 = 0.0, s1 = 0.0;
  double F0 = 0.0, h0 = 0.0;  // curve position at s0
  double f = 0.0, g = 0.0;    // F', h' on the piece
  double theta = 0.0, phi = 0.0;      // contact locations, +/-inf allowed
  double c_theta = 0.0, c_phi = 0.0;  // c at the finite contacts
  double R0 = 0.0, S0 = 0.0, R1 = 0.0, S1 = 0.0;  // endpoint slopes

  double F_at(double s) const { return F0 + f * (s - s0); }
  double h_at(double s) const { return h0 + g * (s - s0); }
  double R_at(double s) const;
  double S_at(double s) const;
  double Gamma_at(double s) const { return 0.5 * (R_at(s) - S_at(s)); }
  double Rprime_at(double s) const;
  double Sprime_at(double s) const;
  double Hprime_at(double s) const;

  /// Exact integral of H' over [sa, sb] within the piece.
  double H_integral(double sa, double sb) const;
  /// Inverse of the integral: sb with H_integral(sa, sb) = dl.
  double H_invert(double sa, double dl) const;
};

struct TangentPoint {
  double s = 0.0;
  double F = 0.0, h = 0.0;
  double theta = 0.0, phi = 0.0;  // left-continuous at switch points
  double R = 0.0, S = 0.0, Gamma = 0.0;
  double Rprime = 0.0, Sprime = 0.0;  // right-sided values
};

/// Tangent geometry along an admissible curve, exact for atomic measures:
/// contact switches, curve breakpoints and the truncation point are located
/// by closed-form solves; the grid refines every piece to ds_max spacing.
class TangentProfile {
 public:
  const std::vector<ProfilePiece>& pieces() const noexcept { return pieces_; }
  const std::vector<TangentPoint>& grid() const noexcept { return grid_; }

  ProfileEnd end_reason() const noexcept { return end_; }
  /// Touch location of the curve on c (+inf when it never touches).
  double zeta() const noexcept { return zeta_; }
  /// Last grid s: min(zeta, gamma-floor crossing, curve end).
  double s_end() const noexcept { return grid_.back().s; }
  double gamma_floor() const noexcept { return gamma_floor_; }

  double Gamma(double s) const;
  double R_of(double s) const;
  double S_of(double s) const;
  const ProfilePiece& piece_containing(double s) const;

  friend TangentProfile build_profile(const PotentialFunction&, const EmbeddingCurve&, GridControl);

 private:
  std::vector<ProfilePiece> pieces_;
  std::vector<TangentPoint> grid_;
  ProfileEnd end_ = ProfileEnd::touched_c;
  double zeta_ = std::numeric_limits<double>::infinity();
  double gamma_floor_ = 1e-6;
};

TangentProfile build_profile(const PotentialFunction& c, const EmbeddingCurve& curve,
                             GridControl ctrl = {});

}  // namespace skembed
