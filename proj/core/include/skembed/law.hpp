#pragma once

#include <functional>
#include <vector>

#include "skembed/transform.hpp"

namespace skembed {

struct WeightedPoint {
  double location = 0.0;
  double mass = 0.0;
};

/// Analytic law of the stopped Brownian motion: mass swept to the upper
/// contacts (exact differences of R per constant-theta piece), to the lower
/// contacts, the terminal atom, and whatever the gamma-floor truncation left.
struct ExitLaw {
  std::vector<WeightedPoint> upper;
  std::vector<WeightedPoint> lower;
  WeightedPoint terminal;
  double truncation_mass = 0.0;
  double truncation_location = 0.0;

  double total_mass() const;
  /// All mass points (upper, lower, terminal) merged and sorted by location.
  std::vector<WeightedPoint> combined() const;
  /// Right-continuous CDF of the exit law (truncation mass excluded).
  double cdf(double x) const;
};

struct JointExitEntry {
  double location = 0.0;  // B_T
  double l = 0.0;         // representative local time of the slab
  double mass = 0.0;
};

/// Discretized joint law of (B_T, L_T) along the grid; the B-marginal matches
/// the exit law exactly, the L-marginal matches Gamma o H^{-1} up to grid
/// resolution.
struct JointExitLaw {
  std::vector<JointExitEntry> entries;
  double total_mass() const;
};

struct AtomCheck {
  double location = 0.0;
  double expected = 0.0;
  double actual = 0.0;
};

struct VerifyResult {
  double max_abs_discrepancy = 0.0;
  std::vector<AtomCheck> table;
};

/// Pr(Y_T >= s) where Y is curve position at the stopping time.
double survival_Y(const TangentProfile& profile, double s);

ExitLaw exit_law(const TangentProfile& profile, const EmbeddingSpec& spec);

JointExitLaw joint_exit_law(const TangentProfile& profile, const EmbeddingSpec& spec);

/// Compare aggregated exit-law mass per atom of mu against mu itself.
VerifyResult verify_embedding(const ExitLaw& law, const CenteredAtomicMeasure& mu);

/// Pr(L_T >= l) = Gamma(H^{-1}(l)).
double local_time_law(const EmbeddingSpec& spec, const TangentProfile& profile, double l);

/// A convex payoff of local time with Psi(0) = 0.
struct Psi {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
  std::function<double(double)> second;
};

Psi psi_power(double exponent);  // l^p for p >= 1
inline Psi psi_square() { return psi_power(2.0); }
inline Psi psi_identity() { return psi_power(1.0); }

/// E Psi(L_T) = integral of Psi'(l) Pr(L_T >= l) dl, evaluated in the s
/// variable where the integrand is piecewise smooth.
double expected_psi(const EmbeddingSpec& spec, const TangentProfile& profile, const Psi& psi);

/// E Psi(L_T^x) for the local-time-at-x preset, through the identity
/// L_T^x = L_T - (sup B ^ x) which reads (L_T - x)^+ on the table.
/// Throws WrongPreset unless the spec was built from that preset at x.
double expected_psi_level(const EmbeddingSpec& spec, const TangentProfile& profile, const Psi& psi,
                          double x);

struct DualCertificate {
  double delta = 0.0;
  std::vector<double> l_grid;
  std::vector<double> A;
  std::vector<double> gamma_l;
  std::vector<double> eta_l;
  std::vector<double> b_grid;
  std::vector<double> lambda_b;
  double dual_value = 0.0;
  double bracket_max = 0.0;
  double primal_value = 0.0;  // E Psi(L_T) for the same boundaries
};

struct DualOptions {
  std::size_t n_atoms = 400;   // quantization used for the boundaries
  std::size_t n_l = 200;       // bracket test grid
  std::size_t n_b = 200;
  // l-range cut where Pr(L_T >= l) drops below this; 0 picks the atom mass
  // 1/n_atoms, the scale below which step boundaries stop carrying
  // information and the multipliers would inflate.
  double survival_cap = 0.0;
  std::size_t n_quad = 4000;   // internal quadrature grid in l
};

/// Lagrangian certificate for the optimality of the level-zero local-time
/// rule: multipliers A, gamma, eta, lambda built from the tabulated
/// boundaries by nested quadrature, the dual value integral against the
/// density, and the maximum of the feasibility bracket on a test grid.
/// Requires a genuine density; throws DegenerateBoundaries when the
/// quantized boundaries are too coarse to carry the certificate.
DualCertificate dual_certificate(const PiecewiseConstantDensity& density, const Psi& psi,
                                 const DualOptions& opts = {});

}  // namespace skembed
