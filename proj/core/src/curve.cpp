#include "skembed/curve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "skembed/tangent.hpp"

namespace skembed {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* preset_name(CurvePreset p) {
  switch (p) {
    case CurvePreset::vallois: return "vallois";
    case CurvePreset::azema_yor: return "azema_yor";
    case CurvePreset::local_time_at_x: return "local_time_at_x";
    case CurvePreset::custom: return "custom";
  }
  return "custom";
}

EmbeddingCurve::EmbeddingCurve(std::vector<CurveBreakpoint> pts, CurvePreset tag, double preset_x)
    : pts_(std::move(pts)), tag_(tag), preset_x_(preset_x) {}

EmbeddingCurve EmbeddingCurve::from_breakpoints(std::vector<CurveBreakpoint> pts) {
  if (pts.size() < 2) throw Error(Errc::bad_preset, "curve needs at least two breakpoints");
  if (pts.front().s != 0.0 || pts.front().F != 0.0 || pts.front().h != 0.0)
    throw Error(Errc::bad_preset, "curve must start at (s,F,h) = (0,0,0)");
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!(pts[i].s < pts[i + 1].s))
      throw Error(Errc::bad_preset, "breakpoint s-values must be strictly increasing");
    if (!std::isfinite(pts[i + 1].s) || !std::isfinite(pts[i + 1].F) || !std::isfinite(pts[i + 1].h))
      throw Error(Errc::bad_preset, "breakpoints must be finite");
    const double ds = pts[i + 1].s - pts[i].s;
    const double dF = pts[i + 1].F - pts[i].F;
    const double dh = pts[i + 1].h - pts[i].h;
    if (dF == 0.0 && dh == 0.0)
      throw Error(Errc::bad_preset, "stalled curve segment (F' = h' = 0)");
    (void)ds;
  }
  return EmbeddingCurve(std::move(pts), CurvePreset::custom, 0.0);
}

EmbeddingCurve EmbeddingCurve::preset(CurvePreset tag, const CenteredAtomicMeasure& mu, double x) {
  const PotentialFunction c(mu);
  switch (tag) {
    case CurvePreset::vallois: {
      const double zeta = c(0.0);  // h(s) = s meets c at c(0)
      std::vector<CurveBreakpoint> pts{{0.0, 0.0, 0.0}, {std::max(zeta, 1e-12), 0.0, std::max(zeta, 1e-12)}};
      return EmbeddingCurve(std::move(pts), CurvePreset::vallois, 0.0);
    }
    case CurvePreset::azema_yor: {
      // Diagonal in value space; touches c at the top kink (v, c(v)) with v = max atom.
      const double v = std::max(mu.max_location(), 1e-12);
      const double send = v * std::sqrt(2.0);
      std::vector<CurveBreakpoint> pts{{0.0, 0.0, 0.0}, {send, v, v}};
      return EmbeddingCurve(std::move(pts), CurvePreset::azema_yor, 0.0);
    }
    case CurvePreset::local_time_at_x: {
      if (x < 0.0) throw Error(Errc::bad_preset, "local_time_at_x requires x >= 0");
      if (x == 0.0) {
        // Same rule as the vallois preset, tagged for the identity estimator.
        const double zeta = c(0.0);
        std::vector<CurveBreakpoint> pts{{0.0, 0.0, 0.0},
                                         {std::max(zeta, 1e-12), 0.0, std::max(zeta, 1e-12)}};
        return EmbeddingCurve(std::move(pts), CurvePreset::local_time_at_x, 0.0);
      }
      const double top = mu.max_location();
      if (x >= top) {
        // The diagonal phase already exhausts the construction.
        const double v = std::max(top, 1e-12);
        std::vector<CurveBreakpoint> pts{{0.0, 0.0, 0.0}, {v, v, v}};
        return EmbeddingCurve(std::move(pts), CurvePreset::local_time_at_x, x);
      }
      const double zeta = c(x);  // vertical phase h(s) = s meets c(x)
      std::vector<CurveBreakpoint> pts{{0.0, 0.0, 0.0}, {x, x, x}, {zeta, x, zeta}};
      return EmbeddingCurve(std::move(pts), CurvePreset::local_time_at_x, x);
    }
    case CurvePreset::custom:
      throw Error(Errc::bad_preset, "custom curves come from breakpoints");
  }
  throw Error(Errc::bad_preset, "unknown preset");
}

std::size_t EmbeddingCurve::segment_index(double s) const {
  if (s <= pts_.front().s) return 0;
  if (s >= pts_.back().s) return pts_.size() - 2;
  auto it = std::upper_bound(pts_.begin(), pts_.end(), s,
                             [](double v, const CurveBreakpoint& p) { return v < p.s; });
  return static_cast<std::size_t>(it - pts_.begin()) - 1;
}

double EmbeddingCurve::F(double s) const {
  const std::size_t i = segment_index(s);
  const CurveBreakpoint& a = pts_[i];
  const CurveBreakpoint& b = pts_[i + 1];
  const double t = (s - a.s) / (b.s - a.s);
  return a.F + t * (b.F - a.F);
}

double EmbeddingCurve::h(double s) const {
  const std::size_t i = segment_index(s);
  const CurveBreakpoint& a = pts_[i];
  const CurveBreakpoint& b = pts_[i + 1];
  const double t = (s - a.s) / (b.s - a.s);
  return a.h + t * (b.h - a.h);
}

double EmbeddingCurve::F_right_slope(double s) const {
  std::size_t i = segment_index(s);
  if (s >= pts_.back().s) i = pts_.size() - 2;
  return (pts_[i + 1].F - pts_[i].F) / (pts_[i + 1].s - pts_[i].s);
}

double EmbeddingCurve::h_right_slope(double s) const {
  std::size_t i = segment_index(s);
  if (s >= pts_.back().s) i = pts_.size() - 2;
  return (pts_[i + 1].h - pts_[i].h) / (pts_[i + 1].s - pts_[i].s);
}

double compute_zeta(const EmbeddingCurve& curve, const PotentialFunction& c) {
  const auto& pts = curve.breakpoints();
  double gap0 = c(curve.F(0.0)) - curve.h(0.0);
  if (gap0 < 0.0) throw Error(Errc::curve_above_c, "curve starts above the potential");
  if (gap0 == 0.0) return 0.0;

  // Per segment, split where F crosses a kink so that c(F(s)) is affine,
  // then solve h(s) - c(F(s)) = 0 linearly on each sub-piece.
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double s0 = pts[i].s, s1 = pts[i + 1].s;
    const double F0 = pts[i].F, F1 = pts[i + 1].F;
    const double ds = s1 - s0;
    const double f = (F1 - F0) / ds;
    const double g = (pts[i + 1].h - pts[i].h) / ds;

    std::vector<double> cuts{s0};
    if (f != 0.0) {
      for (double xk : c.kinks()) {
        const double t = (xk - F0) / f;
        if (t > 0.0 && t < ds) cuts.push_back(s0 + t);
      }
      std::sort(cuts.begin(), cuts.end());
    }
    cuts.push_back(s1);

    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
      const double sa = cuts[j], sb = cuts[j + 1];
      if (!(sb > sa)) continue;
      const double ga = c(curve.F(sa)) - curve.h(sa);
      const double gb = c(curve.F(sb)) - curve.h(sb);
      if (ga <= 0.0) return sa;
      if (gb > 0.0) continue;
      // gap is affine on [sa, sb]: root where it hits zero
      return sa + ga / (ga - gb) * (sb - sa);
    }
  }
  return kInf;
}

AdmissibilityReport validate(const EmbeddingCurve& curve, const TangentProfile& profile,
                             double tol) {
  AdmissibilityReport rep;
  rep.zeta = profile.zeta();
  rep.touches_c = profile.end_reason() != ProfileEnd::curve_exhausted;
  for (const TangentPoint& p : profile.grid()) {
    if (p.s >= curve.s_end()) break;
    const double fp = curve.F_right_slope(p.s);
    const double hp = curve.h_right_slope(p.s);
    const double rhs = std::max(fp * p.S, fp * p.R);
    if (hp < rhs - tol) rep.violations.push_back({p.s, hp, rhs});
  }
  rep.ok = rep.violations.empty() && rep.touches_c;
  return rep;
}

}  // namespace skembed
