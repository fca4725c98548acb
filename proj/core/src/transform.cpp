#include "skembed/transform.hpp"

#include <algorithm>
#include <cmath>

namespace skembed {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

EmbeddingSpec build_embedding(const TangentProfile& profile, const EmbeddingCurve& curve) {
  EmbeddingSpec spec;
  spec.gamma_floor_ = profile.gamma_floor();
  spec.preset_tag_ = curve.preset_tag();
  spec.preset_x_ = curve.preset_x();
  spec.truncated_ = profile.end_reason() == ProfileEnd::gamma_floor_hit;

  const auto& grid = profile.grid();
  const auto& pieces = profile.pieces();

  if (pieces.empty()) {
    // Degenerate target: everything stops immediately at the start point.
    const TangentPoint& p0 = grid.front();
    SpecKnot k;
    k.s = p0.s;
    k.l = 0.0;
    k.G = p0.F;
    k.alpha = p0.F;
    k.beta = p0.F;
    k.a = 0.0;
    k.b = 0.0;
    k.p = 0.5;
    spec.knots_.push_back(k);
    spec.terminal_mass_ = p0.Gamma;
    spec.terminal_location_ = p0.F;
    return spec;
  }

  spec.pieces_ = pieces;
  spec.knots_.reserve(grid.size());
  spec.ipiece_.reserve(grid.size());

  SpecKnot first;
  first.s = grid.front().s;
  first.l = 0.0;
  first.G = grid.front().F;
  first.alpha = grid.front().theta;
  first.beta = grid.front().phi;
  first.a = first.alpha - first.G;
  first.b = first.beta - first.G;
  first.p = 0.5;  // replaced by the first interval's value below
  spec.knots_.push_back(first);

  std::size_t pi = 0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double sa = grid[k].s, sb = grid[k + 1].s;
    const double smid = 0.5 * (sa + sb);
    while (pi + 1 < pieces.size() && smid >= pieces[pi + 1].s0) ++pi;
    const ProfilePiece& pc = pieces[pi];

    const double dl = pc.H_integral(sa, sb);
    if (!(dl > 0.0) || !std::isfinite(dl))
      throw Error(Errc::degenerate_curve, "H is not strictly increasing on the grid");

    SpecKnot kn;
    kn.s = sb;
    kn.l = spec.knots_.back().l + dl;
    kn.G = pc.F_at(sb);
    kn.alpha = grid[k + 1].theta;
    kn.beta = grid[k + 1].phi;
    kn.a = kn.alpha - kn.G;
    kn.b = kn.beta - kn.G;
    const double gslope = (kn.G - spec.knots_.back().G) / dl;
    kn.p = std::min(1.0, std::max(0.0, 0.5 * (1.0 - gslope)));
    spec.knots_.push_back(kn);
    spec.ipiece_.push_back(static_cast<int>(pi));
  }
  spec.knots_.front().p = spec.knots_[1].p;

  spec.terminal_mass_ = grid.back().Gamma;
  spec.terminal_location_ = grid.back().F;
  return spec;
}

EmbeddingSpec EmbeddingSpec::from_knots(std::vector<SpecKnot> knots, bool truncated,
                                        double terminal_mass, double terminal_location,
                                        double gamma_floor, CurvePreset tag, double preset_x) {
  if (knots.empty()) throw Error(Errc::config_error, "spec table is empty");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i - 1].l < knots[i].l))
      throw Error(Errc::config_error, "spec table l-values must increase");
  EmbeddingSpec spec;
  spec.knots_ = std::move(knots);
  spec.truncated_ = truncated;
  spec.terminal_mass_ = terminal_mass;
  spec.terminal_location_ = terminal_location;
  spec.gamma_floor_ = gamma_floor;
  spec.preset_tag_ = tag;
  spec.preset_x_ = preset_x;
  return spec;
}

std::size_t EmbeddingSpec::interval_below(double l) const {
  // Smallest knot index j >= 1 with l <= l_j, so that l lies in (l_{j-1}, l_j].
  auto it = std::lower_bound(knots_.begin(), knots_.end(), l,
                             [](const SpecKnot& k, double v) { return k.l < v; });
  std::size_t j = static_cast<std::size_t>(it - knots_.begin());
  if (j == 0) j = 1;
  if (j >= knots_.size()) j = knots_.size() - 1;
  return j;
}

double EmbeddingSpec::skew_probability(double l) const {
  if (l < 0.0 || l > l_max() * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::out_of_range, "local time beyond the table");
  if (knots_.size() == 1) return knots_.front().p;
  return knots_[interval_below(l)].p;
}

double EmbeddingSpec::invert_H(double l) const {
  if (l < 0.0 || l > l_max() * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::out_of_range, "local time beyond the table");
  if (l <= 0.0 || knots_.size() == 1) return knots_.front().s;
  const std::size_t j = interval_below(l);
  const SpecKnot& lo = knots_[j - 1];
  if (l >= knots_[j].l) return knots_[j].s;
  if (ipiece_.empty()) {
    const double t = (l - lo.l) / (knots_[j].l - lo.l);
    return lo.s + t * (knots_[j].s - lo.s);
  }
  const ProfilePiece& pc = pieces_[static_cast<std::size_t>(ipiece_[j - 1])];
  return pc.H_invert(lo.s, l - lo.l);
}

double EmbeddingSpec::l_at_s(double s) const {
  if (knots_.size() == 1) {
    if (std::abs(s - knots_.front().s) > 1e-12) throw Error(Errc::out_of_range, "s beyond profile");
    return 0.0;
  }
  if (s < knots_.front().s - 1e-12 || s > knots_.back().s * (1.0 + 1e-12) + 1e-12)
    throw Error(Errc::out_of_range, "s beyond profile");
  auto it = std::lower_bound(knots_.begin(), knots_.end(), s,
                             [](const SpecKnot& k, double v) { return k.s < v; });
  std::size_t j = static_cast<std::size_t>(it - knots_.begin());
  if (j == 0) return 0.0;
  if (j >= knots_.size()) j = knots_.size() - 1;
  const SpecKnot& lo = knots_[j - 1];
  if (s >= knots_[j].s) return knots_[j].l;
  if (ipiece_.empty()) {
    const double t = (s - lo.s) / (knots_[j].s - lo.s);
    return lo.l + t * (knots_[j].l - lo.l);
  }
  const ProfilePiece& pc = pieces_[static_cast<std::size_t>(ipiece_[j - 1])];
  return lo.l + pc.H_integral(lo.s, s);
}

double EmbeddingSpec::G_at(double l) const {
  if (knots_.size() == 1) return knots_.front().G;
  const std::size_t j = interval_below(std::min(l, l_max()));
  const SpecKnot& lo = knots_[j - 1];
  const SpecKnot& hi = knots_[j];
  const double t = std::clamp((l - lo.l) / (hi.l - lo.l), 0.0, 1.0);
  return lo.G + t * (hi.G - lo.G);
}

double EmbeddingSpec::alpha_at(double l) const {
  if (knots_.size() == 1) return knots_.front().alpha;
  return knots_[interval_below(std::min(l, l_max()))].alpha;
}

double EmbeddingSpec::beta_at(double l) const {
  if (knots_.size() == 1) return knots_.front().beta;
  return knots_[interval_below(std::min(l, l_max()))].beta;
}

}  // namespace skembed
