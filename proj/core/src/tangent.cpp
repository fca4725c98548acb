#include "skembed/tangent.hpp"

#include <algorithm>
#include <cmath>

namespace skembed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Exact integral of (P0 + P1 t)/(N0 + N1 t) over [0, T]; series branch keeps
// the formula stable when the denominator barely moves.
double affine_ratio_integral(double P0, double P1, double N0, double N1, double T) {
  if (T <= 0.0) return 0.0;
  const double beta = N1 * T / N0;
  if (std::abs(beta) < 1e-9) {
    const double e = N1 / N0;
    return (P0 * T + 0.5 * (P1 - P0 * e) * T * T + (P0 * e * e - P1 * e) * T * T * T / 3.0 +
            0.25 * P1 * e * e * T * T * T * T) /
           N0;
  }
  const double r = P1 / N1;
  return r * T + (P0 - r * N0) / N1 * std::log1p(beta);
}

struct AffineRatio {
  double P0 = 0.0, P1 = 0.0, N0 = 1.0, N1 = 0.0;
  double value(double t) const { return (P0 + P1 * t) / (N0 + N1 * t); }
  double integral(double T) const { return affine_ratio_integral(P0, P1, N0, N1, T); }
};

// H' on the piece, as a ratio of affine functions of t = s - sa. The
// quadratic terms of numerator and denominator cancel identically.
AffineRatio hprime_ratio(const ProfilePiece& pc, double sa) {
  const double f = pc.f, g = pc.g;
  const double F0 = pc.F_at(sa), h0 = pc.h_at(sa);
  AffineRatio r;
  const bool thi = std::isinf(pc.theta);
  const bool phi_inf = std::isinf(pc.phi);
  if (thi && phi_inf) {
    r.P0 = g;
    r.P1 = 0.0;
    r.N0 = 1.0;
    r.N1 = 0.0;
  } else if (thi) {
    const double w0 = F0 - pc.phi;
    const double B0 = h0 - pc.c_phi;
    r.N0 = w0 - B0;
    r.N1 = f - g;
    r.P0 = (2.0 * g - f) * w0 - f * B0;
    r.P1 = f * (g - f);
  } else if (phi_inf) {
    const double u0 = pc.theta - F0;
    const double A0 = pc.c_theta - h0;
    r.N0 = A0 + u0;
    r.N1 = -(f + g);
    r.P0 = (2.0 * g + f) * u0 - f * A0;
    r.P1 = -f * (g + f);
  } else {
    const double u0 = pc.theta - F0;
    const double w0 = F0 - pc.phi;
    const double A0 = pc.c_theta - h0;
    const double B0 = h0 - pc.c_phi;
    r.N0 = A0 * w0 - B0 * u0;
    r.N1 = f * (A0 + B0) - g * (u0 + w0);
    r.P0 = 2.0 * g * u0 * w0 - f * (A0 * w0 + B0 * u0);
    r.P1 = f * g * (u0 - w0) - f * f * (A0 - B0);
  }
  return r;
}

}  // namespace

double ProfilePiece::R_at(double s) const {
  if (std::isinf(theta)) return 1.0;
  return (c_theta - h_at(s)) / (theta - F_at(s));
}

double ProfilePiece::S_at(double s) const {
  if (std::isinf(phi)) return -1.0;
  return (h_at(s) - c_phi) / (F_at(s) - phi);
}

double ProfilePiece::Rprime_at(double s) const {
  if (std::isinf(theta)) return 0.0;
  return -(g - f * R_at(s)) / (theta - F_at(s));
}

double ProfilePiece::Sprime_at(double s) const {
  if (std::isinf(phi)) return 0.0;
  return (g - f * S_at(s)) / (F_at(s) - phi);
}

double ProfilePiece::Hprime_at(double s) const {
  const double R = R_at(s), S = S_at(s);
  return (2.0 * g - f * (R + S)) / (R - S);
}

double ProfilePiece::H_integral(double sa, double sb) const {
  return hprime_ratio(*this, sa).integral(sb - sa);
}

double ProfilePiece::H_invert(double sa, double dl) const {
  if (dl <= 0.0) return sa;
  const AffineRatio r = hprime_ratio(*this, sa);
  const double T = s1 - sa;
  double lo = 0.0, hi = T;
  double t = std::min(T, dl / std::max(r.value(0.0), 1e-300));
  for (int it = 0; it < 80; ++it) {
    const double err = r.integral(t) - dl;
    if (err > 0.0) hi = t;
    else lo = t;
    const double step = err / std::max(r.value(t), 1e-300);
    double nt = t - step;
    if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
    if (std::abs(nt - t) <= 1e-16 * std::max(1.0, std::abs(t))) {
      t = nt;
      break;
    }
    t = nt;
  }
  return sa + std::min(t, T);
}

namespace {

// Core contact scan. `tie` widens the argmin comparison so that a tangent
// line touching several kinks reports the outermost one; the piece walker
// probes just past a switch and needs tie = 0 to pick the incoming contact.
TangentLines tangent_scan(const PotentialFunction& c, double F, double h, double tie) {
  const double cF = c(F);
  const double scale = std::max({1.0, std::abs(F), std::abs(h), cF});
  if (h > cF + 1e-12 * scale)
    throw Error(Errc::point_above_c, "tangents undefined above the potential");
  if (h >= cF) return TangentLines{F, F, c.right_derivative(F), c.left_derivative(F)};

  const auto& xs = c.kinks();
  const auto& cs = c.kink_values();

  // Upper side: minimize the chord slope over kinks right of F; the slope-1
  // asymptote caps it at 1, in which case the contact escapes to +inf.
  double R = kInf, theta = kInf;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k] <= F) continue;
    const double ratio = (cs[k] - h) / (xs[k] - F);
    if (ratio < R) {
      R = ratio;
      theta = xs[k];
    } else if (ratio <= R + tie * (std::abs(R) + 1.0)) {
      theta = xs[k];  // later (larger) kink wins ties: sup of the contact set
    }
  }
  if (!(R < 1.0)) {
    R = 1.0;
    theta = kInf;
  }

  // Lower side, mirrored: maximize the chord slope left of F, asymptote -1.
  double S = -kInf, phi = -kInf;
  for (std::size_t k = xs.size(); k-- > 0;) {
    if (xs[k] >= F) continue;
    const double ratio = (h - cs[k]) / (F - xs[k]);
    if (ratio > S) {
      S = ratio;
      phi = xs[k];
    } else if (ratio >= S - tie * (std::abs(S) + 1.0)) {
      phi = xs[k];  // earlier (smaller) kink wins ties: inf of the contact set
    }
  }
  if (!(S > -1.0)) {
    S = -1.0;
    phi = -kInf;
  }
  return TangentLines{theta, phi, R, S};
}

}  // namespace

TangentLines tangent_at(const PotentialFunction& c, double F, double h) {
  return tangent_scan(c, F, h, 1e-12);
}

namespace {

struct ContactIdx {
  int th = -1;  // kink index, -1 encodes +inf
  int ph = -1;  // kink index, -1 encodes -inf
};

ContactIdx probe_contacts(const PotentialFunction& c, const EmbeddingCurve& curve, double s) {
  const TangentLines tl = tangent_scan(c, curve.F(s), curve.h(s), 0.0);
  ContactIdx ci;
  const auto& xs = c.kinks();
  if (std::isfinite(tl.theta)) {
    auto it = std::lower_bound(xs.begin(), xs.end(), tl.theta);
    ci.th = static_cast<int>(it - xs.begin());
  }
  if (std::isfinite(tl.phi)) {
    auto it = std::lower_bound(xs.begin(), xs.end(), tl.phi);
    ci.ph = static_cast<int>(it - xs.begin());
  }
  return ci;
}

// Time at which the moving point (F0+ft, h0+gt) is collinear with the kinks
// (xi, ci) and (xj, cj); the bilinear terms cancel, leaving a linear solve.
double collinear_time(double F0, double h0, double f, double g, double xi, double ci, double xj,
                      double cj) {
  const double A = ci * xj - cj * xi;
  const double B = ci - cj;
  const double C = xj - xi;
  const double den = f * B + g * C;
  if (den == 0.0) return kInf;
  return (A - F0 * B - h0 * C) / den;
}

// First t in (t_eps, T] at which Gamma drops to the floor, or +inf.
double gamma_floor_time(const ProfilePiece& pc, double t_eps, double T, double floor) {
  const double s0 = pc.s0;
  if (pc.Gamma_at(s0 + T) > floor) return kInf;
  const bool thi = std::isinf(pc.theta);
  const bool phl = std::isinf(pc.phi);
  if (thi && phl) return kInf;  // Gamma == 1

  double root = kInf;
  if (thi) {
    // (w0 - B0) + (f-g) t = 2*floor*(w0 + f t)
    const double w0 = pc.F0 - pc.phi, B0 = pc.h0 - pc.c_phi;
    const double a = (w0 - B0) - 2.0 * floor * w0;
    const double b = (pc.f - pc.g) - 2.0 * floor * pc.f;
    if (b != 0.0) root = -a / b;
  } else if (phl) {
    const double u0 = pc.theta - pc.F0, A0 = pc.c_theta - pc.h0;
    const double a = (A0 + u0) - 2.0 * floor * u0;
    const double b = -(pc.f + pc.g) + 2.0 * floor * pc.f;
    if (b != 0.0) root = -a / b;
  } else {
    const double u0 = pc.theta - pc.F0, w0 = pc.F0 - pc.phi;
    const double A0 = pc.c_theta - pc.h0, B0 = pc.h0 - pc.c_phi;
    const double gf = 2.0 * floor;
    const double C2 = gf * pc.f * pc.f;
    const double C1 = pc.f * (A0 + B0) - pc.g * (u0 + w0) - gf * pc.f * (u0 - w0);
    const double C0 = A0 * w0 - B0 * u0 - gf * u0 * w0;
    if (C2 == 0.0) {
      if (C1 != 0.0) root = -C0 / C1;
    } else {
      const double disc = C1 * C1 - 4.0 * C2 * C0;
      if (disc >= 0.0) {
        const double q = -0.5 * (C1 + std::copysign(std::sqrt(disc), C1));
        double r1 = q / C2;
        double r2 = (q != 0.0) ? C0 / q : kInf;
        if (r1 > r2) std::swap(r1, r2);
        root = (r1 > t_eps) ? r1 : r2;
      }
    }
  }
  if (!(root > t_eps && root <= T * (1.0 + 1e-12))) {
    // The crossing exists in (0, T]; fall back to bisection on Gamma - floor.
    double lo = 0.0, hi = T;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pc.Gamma_at(s0 + mid) > floor) lo = mid;
      else hi = mid;
    }
    root = hi;
  }
  return std::min(root, T);
}

}  // namespace

double TangentProfile::Gamma(double s) const { return piece_containing(s).Gamma_at(s); }
double TangentProfile::R_of(double s) const { return piece_containing(s).R_at(s); }
double TangentProfile::S_of(double s) const { return piece_containing(s).S_at(s); }

const ProfilePiece& TangentProfile::piece_containing(double s) const {
  if (pieces_.empty()) throw Error(Errc::out_of_range, "degenerate profile has no pieces");
  if (s < -1e-12 || s > s_end() * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::out_of_range, "s outside the profile domain");
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), s,
                             [](double v, const ProfilePiece& p) { return v < p.s0; });
  if (it != pieces_.begin()) --it;
  return *it;
}

TangentProfile build_profile(const PotentialFunction& c, const EmbeddingCurve& curve,
                             GridControl ctrl) {
  if (!(ctrl.gamma_floor > 0.0) || !(ctrl.gamma_floor <= 0.5))
    throw Error(Errc::config_error, "gamma_floor must lie in (0, 0.5]");

  TangentProfile prof;
  prof.gamma_floor_ = ctrl.gamma_floor;
  const double zeta = compute_zeta(curve, c);
  prof.zeta_ = zeta;
  double s_stop = std::min(zeta, curve.s_end());
  prof.end_ = (zeta <= curve.s_end()) ? ProfileEnd::touched_c : ProfileEnd::curve_exhausted;

  if (s_stop <= 0.0) {
    TangentPoint p;
    p.s = 0.0;
    p.F = curve.F(0.0);
    p.h = curve.h(0.0);
    p.R = c.right_derivative(p.F);
    p.S = c.left_derivative(p.F);
    p.Gamma = 0.5 * (p.R - p.S);
    p.theta = p.F;
    p.phi = p.F;
    prof.end_ = ProfileEnd::touched_c;
    prof.grid_.push_back(p);
    return prof;
  }

  const double scale = std::max(1.0, s_stop);
  const double t_eps = 1e-14 * scale;
  const double probe_eps = 1e-11 * scale;
  const auto& xs = c.kinks();
  const auto& cs = c.kink_values();
  const int n = static_cast<int>(xs.size());

  double s_cur = 0.0;
  int guard = 0;
  const int max_pieces = 32 * (n + static_cast<int>(curve.segment_count())) + 256;

  while (s_cur < s_stop - t_eps) {
    if (++guard > max_pieces)
      throw Error(Errc::not_admissible, "contact state does not stabilize");

    const std::size_t seg = curve.segment_index(s_cur);
    const auto& b0 = curve.breakpoints()[seg];
    const auto& b1 = curve.breakpoints()[seg + 1];
    const double seg_end = std::min(b1.s, s_stop);
    const double T = seg_end - s_cur;
    if (T <= t_eps) {
      s_cur = seg_end;
      continue;
    }

    ProfilePiece pc;
    pc.s0 = s_cur;
    pc.f = (b1.F - b0.F) / (b1.s - b0.s);
    pc.g = (b1.h - b0.h) / (b1.s - b0.s);
    pc.F0 = curve.F(s_cur);
    pc.h0 = curve.h(s_cur);

    const ContactIdx ci = probe_contacts(c, curve, s_cur + std::min(0.45 * T, probe_eps));
    pc.theta = (ci.th >= 0) ? xs[ci.th] : kInf;
    pc.c_theta = (ci.th >= 0) ? cs[ci.th] : 0.0;
    pc.phi = (ci.ph >= 0) ? xs[ci.ph] : -kInf;
    pc.c_phi = (ci.ph >= 0) ? cs[ci.ph] : 0.0;

    // Candidate event times, all measured from s_cur.
    double t_next = T;
    auto consider = [&](double t) {
      if (t > t_eps && t < t_next) t_next = t;
    };

    if (ci.th >= 0) {
      for (int cand : {ci.th - 1, ci.th + 1}) {
        if (cand < 0 || cand >= n) continue;
        const double t = collinear_time(pc.F0, pc.h0, pc.f, pc.g, xs[cand], cs[cand],
                                        xs[ci.th], cs[ci.th]);
        if (t > t_eps && t <= T && xs[cand] > pc.F_at(s_cur + t)) consider(t);
      }
      if (pc.g - pc.f < 0.0) consider((pc.F0 - pc.h0) / (pc.g - pc.f));  // h-F back to 0
    } else if (pc.g - pc.f > 0.0) {
      consider((pc.F0 - pc.h0) / (pc.g - pc.f));  // contact comes in from +inf
    }

    if (ci.ph >= 0) {
      for (int cand : {ci.ph - 1, ci.ph + 1}) {
        if (cand < 0 || cand >= n) continue;
        const double t = collinear_time(pc.F0, pc.h0, pc.f, pc.g, xs[cand], cs[cand],
                                        xs[ci.ph], cs[ci.ph]);
        if (t > t_eps && t <= T && xs[cand] < pc.F_at(s_cur + t)) consider(t);
      }
      if (pc.g + pc.f < 0.0) consider(-(pc.h0 + pc.F0) / (pc.g + pc.f));  // h+F back to 0
    } else if (pc.g + pc.f > 0.0) {
      consider(-(pc.h0 + pc.F0) / (pc.g + pc.f));  // contact comes in from -inf
    }

    bool floored = false;
    const double t_floor = gamma_floor_time(pc, t_eps, T, ctrl.gamma_floor);
    if (t_floor <= t_next) {
      t_next = t_floor;
      floored = true;
    }

    pc.s1 = s_cur + t_next;
    pc.R0 = pc.R_at(pc.s0);
    pc.S0 = pc.S_at(pc.s0);
    pc.R1 = pc.R_at(pc.s1);
    pc.S1 = pc.S_at(pc.s1);
    prof.pieces_.push_back(pc);
    s_cur = pc.s1;

    if (floored) {
      prof.end_ = ProfileEnd::gamma_floor_hit;
      break;
    }
  }

  // Refined grid: piece boundaries plus equal subdivision at ds_max spacing.
  const double span = prof.pieces_.empty() ? 0.0 : prof.pieces_.back().s1;
  double ds_max = ctrl.ds_max > 0.0 ? ctrl.ds_max : span / 1000.0;
  if (!(ds_max > 0.0)) ds_max = span > 0.0 ? span : 1.0;

  for (std::size_t pi = 0; pi < prof.pieces_.size(); ++pi) {
    const ProfilePiece& pc = prof.pieces_[pi];
    const double len = pc.s1 - pc.s0;
    const int nsub = std::max(1, static_cast<int>(std::ceil(len / ds_max - 1e-12)));
    for (int k = 0; k < nsub; ++k) {
      const double s = pc.s0 + len * static_cast<double>(k) / static_cast<double>(nsub);
      TangentPoint p;
      p.s = s;
      p.F = pc.F_at(s);
      p.h = pc.h_at(s);
      p.R = pc.R_at(s);
      p.S = pc.S_at(s);
      p.Gamma = 0.5 * (p.R - p.S);
      p.Rprime = pc.Rprime_at(s);
      p.Sprime = pc.Sprime_at(s);
      if (k == 0) {
        // Left-continuity at boundaries; the first point reports the
        // asymptote contacts of the origin.
        if (pi == 0) {
          const TangentLines tl = tangent_at(c, p.F, p.h);
          p.theta = tl.theta;
          p.phi = tl.phi;
        } else {
          p.theta = prof.pieces_[pi - 1].theta;
          p.phi = prof.pieces_[pi - 1].phi;
        }
      } else {
        p.theta = pc.theta;
        p.phi = pc.phi;
      }
      prof.grid_.push_back(p);
    }
  }
  if (!prof.pieces_.empty()) {
    const ProfilePiece& pc = prof.pieces_.back();
    TangentPoint p;
    p.s = pc.s1;
    p.F = pc.F_at(p.s);
    p.h = pc.h_at(p.s);
    p.R = pc.R_at(p.s);
    p.S = pc.S_at(p.s);
    p.Gamma = 0.5 * (p.R - p.S);
    p.Rprime = pc.Rprime_at(p.s);
    p.Sprime = pc.Sprime_at(p.s);
    p.theta = pc.theta;
    p.phi = pc.phi;
    prof.grid_.push_back(p);
  }
  return prof;
}

}  // namespace skembed
