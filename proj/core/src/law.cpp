#include "skembed/law.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace skembed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 8-point Gauss-Legendre rule on [0, 1].
constexpr int kGL = 8;
constexpr double kGLx[kGL] = {0.01985507175123188, 0.10166676129318664, 0.2372337950418355,
                              0.40828267875217505, 0.5917173212478249,  0.7627662049581645,
                              0.8983332387068134,  0.9801449282487681};
constexpr double kGLw[kGL] = {0.05061426814518813, 0.11119051722668724, 0.15685332293894364,
                              0.18134189168918099, 0.18134189168918099, 0.15685332293894364,
                              0.11119051722668724, 0.05061426814518813};

void push_mass(std::vector<WeightedPoint>& out, double location, double mass) {
  if (!(mass != 0.0) || std::isinf(location)) return;
  if (!out.empty() && out.back().location == location) {
    out.back().mass += mass;
    return;
  }
  out.push_back({location, mass});
}

}  // namespace

double ExitLaw::total_mass() const {
  double t = terminal.mass + truncation_mass;
  for (const auto& w : upper) t += w.mass;
  for (const auto& w : lower) t += w.mass;
  return t;
}

std::vector<WeightedPoint> ExitLaw::combined() const {
  std::map<double, double> acc;
  for (const auto& w : upper) acc[w.location] += w.mass;
  for (const auto& w : lower) acc[w.location] += w.mass;
  if (terminal.mass > 0.0) acc[terminal.location] += terminal.mass;
  std::vector<WeightedPoint> out;
  out.reserve(acc.size());
  for (const auto& [loc, m] : acc) out.push_back({loc, m});
  return out;
}

double ExitLaw::cdf(double x) const {
  double c = 0.0;
  for (const auto& w : combined())
    if (w.location <= x) c += w.mass;
  return c;
}

double JointExitLaw::total_mass() const {
  double t = 0.0;
  for (const auto& e : entries) t += e.mass;
  return t;
}

double survival_Y(const TangentProfile& profile, double s) {
  if (s < -1e-12 || s > profile.s_end() * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::out_of_range, "s outside [0, s_end]");
  if (profile.pieces().empty()) return profile.grid().front().Gamma;
  if (s <= 0.0) return profile.grid().front().Gamma;
  return profile.Gamma(std::min(s, profile.s_end()));
}

ExitLaw exit_law(const TangentProfile& profile, const EmbeddingSpec& spec) {
  ExitLaw law;
  for (const ProfilePiece& pc : profile.pieces()) {
    if (std::isfinite(pc.theta)) push_mass(law.upper, pc.theta, 0.5 * (pc.R0 - pc.R1));
    if (std::isfinite(pc.phi)) push_mass(law.lower, pc.phi, 0.5 * (pc.S1 - pc.S0));
  }
  if (profile.end_reason() == ProfileEnd::touched_c) {
    law.terminal = {spec.terminal_location(), spec.terminal_mass()};
  } else if (profile.end_reason() == ProfileEnd::gamma_floor_hit) {
    law.truncation_mass = spec.terminal_mass();
    law.truncation_location = spec.terminal_location();
  }
  return law;
}

JointExitLaw joint_exit_law(const TangentProfile& profile, const EmbeddingSpec& spec) {
  JointExitLaw joint;
  const auto& knots = spec.knots();
  const auto& grid = profile.grid();
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double lmid = 0.5 * (knots[k].l + knots[k + 1].l);
    const double du = 0.5 * (grid[k + 1].R - grid[k].R);
    const double dl = 0.5 * (grid[k + 1].S - grid[k].S);
    if (std::isfinite(knots[k + 1].alpha) && du < 0.0)
      joint.entries.push_back({knots[k + 1].alpha, lmid, -du});
    if (std::isfinite(knots[k + 1].beta) && dl > 0.0)
      joint.entries.push_back({knots[k + 1].beta, lmid, dl});
  }
  if (spec.terminal_mass() > 0.0 && profile.end_reason() == ProfileEnd::touched_c)
    joint.entries.push_back({spec.terminal_location(), spec.l_max(), spec.terminal_mass()});
  return joint;
}

VerifyResult verify_embedding(const ExitLaw& law, const CenteredAtomicMeasure& mu) {
  VerifyResult res;
  const auto points = law.combined();
  std::vector<bool> used(points.size(), false);
  for (const Atom& atom : mu.atoms()) {
    const double tol = 1e-9 * std::max(1.0, std::abs(atom.location));
    AtomCheck row{atom.location, atom.mass, 0.0};
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!used[i] && std::abs(points[i].location - atom.location) <= tol) {
        row.actual += points[i].mass;
        used[i] = true;
      }
    }
    res.table.push_back(row);
    res.max_abs_discrepancy = std::max(res.max_abs_discrepancy, std::abs(row.actual - row.expected));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (used[i] || points[i].mass == 0.0) continue;
    res.table.push_back({points[i].location, 0.0, points[i].mass});
    res.max_abs_discrepancy = std::max(res.max_abs_discrepancy, std::abs(points[i].mass));
  }
  return res;
}

double local_time_law(const EmbeddingSpec& spec, const TangentProfile& profile, double l) {
  if (l < 0.0 || l > spec.l_max() * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::out_of_range, "local time beyond the table");
  if (l <= 0.0) return 1.0;
  if (profile.pieces().empty()) return profile.grid().front().Gamma;
  return profile.Gamma(std::min(spec.invert_H(l), profile.s_end()));
}

Psi psi_power(double exponent) {
  if (!(exponent >= 1.0)) throw Error(Errc::config_error, "psi exponent must be >= 1");
  Psi psi;
  psi.value = [exponent](double l) { return std::pow(l, exponent); };
  psi.deriv = [exponent](double l) {
    return exponent == 1.0 ? 1.0 : exponent * std::pow(l, exponent - 1.0);
  };
  psi.second = [exponent](double l) {
    if (exponent == 1.0) return 0.0;
    if (exponent == 2.0) return 2.0;
    return exponent * (exponent - 1.0) * std::pow(l, exponent - 2.0);
  };
  return psi;
}

namespace {

// integral over s of Psi'(l(s) - shift)+ times the exit-rate density
// Gamma(s) H'(s) = h' - F'(R+S)/2, from s_from to the end of the profile.
double psi_survival_integral(const EmbeddingSpec& spec, const TangentProfile& profile,
                             const Psi& psi, double s_from, double l_shift) {
  const auto& knots = spec.knots();
  if (knots.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double sa = std::max(knots[k].s, s_from);
    const double sb = knots[k + 1].s;
    if (!(sb > sa)) continue;
    const ProfilePiece& pc = profile.piece_containing(0.5 * (sa + sb));
    const double base_l = spec.l_at_s(sa);
    for (int q = 0; q < kGL; ++q) {
      const double s = sa + (sb - sa) * kGLx[q];
      const double l = base_l + pc.H_integral(sa, s);
      const double u = l - l_shift;
      if (u <= 0.0) continue;
      const double rate = pc.g - pc.f * 0.5 * (pc.R_at(s) + pc.S_at(s));
      total += kGLw[q] * (sb - sa) * psi.deriv(u) * rate;
    }
  }
  return total;
}

}  // namespace

double expected_psi(const EmbeddingSpec& spec, const TangentProfile& profile, const Psi& psi) {
  return psi_survival_integral(spec, profile, psi, profile.grid().front().s, 0.0);
}

double expected_psi_level(const EmbeddingSpec& spec, const TangentProfile& profile, const Psi& psi,
                          double x) {
  if (spec.preset_tag() != CurvePreset::local_time_at_x ||
      std::abs(spec.preset_x() - x) > 1e-12 * std::max(1.0, std::abs(x)))
    throw Error(Errc::wrong_preset, "identity evaluation needs the local_time_at_x preset");
  if (x <= 0.0) return expected_psi(spec, profile, psi);
  if (x >= profile.s_end()) return 0.0;
  const double l_shift = spec.l_at_s(x);
  return psi_survival_integral(spec, profile, psi, x, l_shift);
}

DualCertificate dual_certificate(const PiecewiseConstantDensity& density, const Psi& raw_psi,
                                 const DualOptions& opts) {
  density.check();
  const double dmean = density.mean();
  const double dscale = std::max(std::abs(density.edges.front()), std::abs(density.edges.back()));
  if (std::abs(dmean) > 1e-9 * std::max(1.0, dscale))
    throw Error(Errc::config_error, "dual certificate expects a centred density");

  // Normalize to Psi(0) = Psi'(0) = 0; the removed linear part is fixed
  // across all admissible rules, so the certificate is unaffected.
  const double lin = raw_psi.deriv(0.0);
  Psi psi;
  psi.value = [raw_psi, lin](double l) { return raw_psi.value(l) - lin * l; };
  psi.deriv = [raw_psi, lin](double l) { return raw_psi.deriv(l) - lin; };
  psi.second = raw_psi.second;

  const CenteredAtomicMeasure mu = quantize(density, opts.n_atoms);
  const PotentialFunction c(mu);
  const EmbeddingCurve curve = EmbeddingCurve::preset(CurvePreset::vallois, mu);
  GridControl gc;
  gc.gamma_floor = 1e-9;
  TangentProfile profile = build_profile(c, curve, gc);
  EmbeddingSpec spec = build_embedding(profile, curve);

  DualCertificate cert;
  cert.delta = density.edges.front();
  cert.primal_value = expected_psi(spec, profile, psi);

  // l-range cut at the survival cap (bisection: the knot grid is uniform in
  // s and far too coarse in l near depletion).
  const double survival_cap =
      opts.survival_cap > 0.0 ? opts.survival_cap : 1.0 / static_cast<double>(opts.n_atoms);
  const auto& knots = spec.knots();
  double l_cap = spec.l_max();
  if (local_time_law(spec, profile, l_cap) < survival_cap) {
    double lo = 0.0, hi = l_cap;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (local_time_law(spec, profile, mid) > survival_cap) lo = mid;
      else hi = mid;
    }
    l_cap = hi;
  }

  // Step locations of the boundaries, and a sanity check that they are rich
  // enough to carry the certificate.
  std::vector<double> steps;
  std::vector<double> alpha_vals{knots[1].alpha};
  std::vector<double> beta_vals{knots[1].beta};
  for (std::size_t k = 1; k + 1 < knots.size(); ++k) {
    if (knots[k].l > l_cap) break;
    if (knots[k + 1].alpha != knots[k].alpha || knots[k + 1].beta != knots[k].beta)
      steps.push_back(knots[k].l);
    if (knots[k + 1].alpha != knots[k].alpha) alpha_vals.push_back(knots[k + 1].alpha);
    if (knots[k + 1].beta != knots[k].beta) beta_vals.push_back(knots[k + 1].beta);
  }
  if (alpha_vals.size() < 8 || beta_vals.size() < 8)
    throw Error(Errc::degenerate_boundaries,
                "boundaries are piecewise constant on too coarse a scale");

  // Working grid in l: uniform refinement merged with the step locations.
  std::vector<double> ls;
  ls.reserve(opts.n_quad + steps.size() + 2);
  for (std::size_t i = 0; i <= opts.n_quad; ++i)
    ls.push_back(l_cap * static_cast<double>(i) / static_cast<double>(opts.n_quad));
  ls.insert(ls.end(), steps.begin(), steps.end());
  std::sort(ls.begin(), ls.end());
  ls.erase(std::unique(ls.begin(), ls.end(),
                       [&](double a, double b) { return b - a < 1e-15 * std::max(1.0, l_cap); }),
           ls.end());

  const std::size_t m = ls.size();
  std::vector<double> A(m, 0.0), I(m, 0.0), J1(m, 0.0), gam(m, 0.0), eta(m, 0.0), T(m, 0.0);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double d = ls[k + 1] - ls[k];
    const double mid = 0.5 * (ls[k] + ls[k + 1]);
    const double av = spec.alpha_at(mid);
    const double bv = spec.beta_at(mid);
    const double inva = std::isfinite(av) ? 1.0 / av : 0.0;
    const double invb = std::isfinite(bv) ? 1.0 / bv : 0.0;  // negative
    const double ap = 0.5 * (inva - invb);                   // A' = (1/alpha + 1/|beta|)/2
    const double psi2 = psi.second(mid);

    const double P0 = std::exp(A[k]);
    const double E0 = 1.0 / P0;
    const double m1 = std::expm1(ap * d);
    A[k + 1] = A[k] + ap * d;

    if (ap <= 0.0) {
      // both boundaries at infinity: nothing accrues
      I[k + 1] = I[k] + psi2 * E0 * d;
      J1[k + 1] = J1[k] + P0 * I[k] * d;
      gam[k + 1] = gam[k];
      eta[k + 1] = eta[k];
      T[k + 1] = T[k] + 0.5 * (gam[k] - eta[k]) * d;
      continue;
    }

    const double c1 = psi2 / ap;
    const double c0 = I[k] + c1 * E0;
    I[k + 1] = I[k] - c1 * E0 * std::expm1(-ap * d);
    const double Jint = c0 * P0 * m1 / ap - c1 * d;  // integral of e^A I over the cell
    J1[k + 1] = J1[k] + Jint;
    gam[k + 1] = gam[k] + inva * Jint;
    eta[k + 1] = eta[k] + invb * Jint;
    // integral of (gamma - eta)/2: the within-cell growth has weight 2 A'
    T[k + 1] = T[k] + 0.5 * (gam[k] - eta[k]) * d + c0 * P0 * (m1 - ap * d) / ap - 0.5 * ap * c1 * d * d;
  }

  // Per-cell boundary values: av nonincreasing, bv nondecreasing in l.
  std::vector<double> av(m - 1), bv(m - 1);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double mid = 0.5 * (ls[k] + ls[k + 1]);
    av[k] = spec.alpha_at(mid);
    bv[k] = spec.beta_at(mid);
  }
  // Generalized inverses of the step boundaries, as indices into ls:
  // largest grid point below which alpha stays >= b (resp. beta stays <= b).
  auto alpha_inv_idx = [&](double b) -> std::size_t {
    auto it = std::lower_bound(av.begin(), av.end(), b,
                               [](double value, double target) { return value >= target; });
    return static_cast<std::size_t>(it - av.begin());
  };
  auto beta_inv_idx = [&](double b) -> std::size_t {
    auto it = std::lower_bound(bv.begin(), bv.end(), b,
                               [](double value, double target) { return value <= target; });
    return static_cast<std::size_t>(it - bv.begin());
  };

  auto lambda_of = [&](double b) -> double {
    if (b == 0.0) return J1[m - 1];
    const std::size_t idx = (b > 0.0) ? alpha_inv_idx(b) : beta_inv_idx(b);
    const double mult = (b > 0.0) ? gam[idx] : eta[idx];
    return J1[idx] - b * mult;
  };

  // Reported grids.
  cert.l_grid.reserve(opts.n_l + 1);
  const std::size_t stride = std::max<std::size_t>(1, m / std::max<std::size_t>(1, opts.n_l));
  for (std::size_t k = 0; k < m; k += stride) cert.l_grid.push_back(ls[k]);
  if (cert.l_grid.back() != ls[m - 1]) cert.l_grid.push_back(ls[m - 1]);
  for (double l : cert.l_grid) {
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(ls.begin(), ls.end(), l) - ls.begin());
    cert.A.push_back(A[k]);
    cert.gamma_l.push_back(gam[k]);
    cert.eta_l.push_back(eta[k]);
  }

  const double b_lo = density.edges.front(), b_hi = density.edges.back();
  for (std::size_t i = 0; i < opts.n_b; ++i) {
    const double b =
        b_lo + (b_hi - b_lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(opts.n_b);
    cert.b_grid.push_back(b);
    cert.lambda_b.push_back(lambda_of(b));
  }

  // dual value: lambda is piecewise affine in b with kinks exactly at the
  // boundary step values, so integrate cell by cell against the density.
  std::vector<double> bks;
  bks.insert(bks.end(), density.edges.begin(), density.edges.end());
  for (double v : alpha_vals)
    if (v > 0.0 && v < b_hi) bks.push_back(v);
  for (double v : beta_vals)
    if (v > b_lo && v < 0.0) bks.push_back(v);
  bks.push_back(0.0);
  std::sort(bks.begin(), bks.end());
  bks.erase(std::unique(bks.begin(), bks.end()), bks.end());
  double dual = 0.0;
  for (std::size_t i = 0; i + 1 < bks.size(); ++i) {
    const double ba = bks[i], bb = bks[i + 1];
    if (bb <= b_lo || ba >= b_hi) continue;
    const double bm = 0.5 * (ba + bb);
    // density value at bm
    double f = 0.0;
    for (std::size_t j = 0; j < density.values.size(); ++j) {
      if (bm >= density.edges[j] && bm < density.edges[j + 1]) {
        f = density.values[j];
        break;
      }
    }
    if (f == 0.0) continue;
    const std::size_t idx = (bm > 0.0) ? alpha_inv_idx(bm) : beta_inv_idx(bm);
    const double mult = (bm > 0.0) ? gam[idx] : eta[idx];
    dual += f * (J1[idx] * (bb - ba) - mult * 0.5 * (bb * bb - ba * ba));
  }
  cert.dual_value = dual;

  // Feasibility bracket on the test grid, with the boundary step values
  // added on the b axis so the piecewise-affine maximum is captured exactly.
  std::vector<double> btest = cert.b_grid;
  for (double v : alpha_vals)
    if (v > 0.0 && v <= b_hi) btest.push_back(v);
  for (double v : beta_vals)
    if (v < 0.0 && v >= b_lo) btest.push_back(v);
  std::sort(btest.begin(), btest.end());
  double worst = -kInf;
  for (double l : cert.l_grid) {
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(ls.begin(), ls.end(), l) - ls.begin());
    const double base = psi.value(l) + T[k];
    for (double b : btest) {
      const double mult = (b > 0.0) ? gam[k] : eta[k];
      const double v = base - lambda_of(b) - mult * b;
      if (v > worst) worst = v;
    }
  }
  cert.bracket_max = worst;
  return cert;
}

}  // namespace skembed
