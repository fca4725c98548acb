#include "skembed/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace skembed {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CenteredAtomicMeasure::CenteredAtomicMeasure(std::vector<Atom> atoms, double tolerance)
    : atoms_(std::move(atoms)), tolerance_(tolerance) {
  if (atoms_.empty()) throw Error(Errc::bad_atom, "measure needs at least one atom");
  double total = 0.0, mean = 0.0, abs_scale = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const Atom& a = atoms_[i];
    if (!std::isfinite(a.location) || !std::isfinite(a.mass))
      throw Error(Errc::bad_atom, "non-finite atom");
    if (a.mass <= 0.0)
      throw Error(Errc::bad_atom, "atom mass must be positive at x=" + fmt(a.location));
    if (i > 0 && !(atoms_[i - 1].location < a.location))
      throw Error(Errc::bad_atom, "atom locations must be strictly increasing near x=" + fmt(a.location));
    total += a.mass;
    mean += a.mass * a.location;
    abs_scale = std::max(abs_scale, std::abs(a.location));
  }
  if (std::abs(total - 1.0) > tolerance_)
    throw Error(Errc::not_probability, "masses sum to " + fmt(total));
  if (std::abs(mean) > tolerance_ * std::max(1.0, abs_scale))
    throw Error(Errc::not_centered, "mean is " + fmt(mean));
}

double CenteredAtomicMeasure::mass_below(double x) const {
  double m = 0.0;
  for (const Atom& a : atoms_) {
    if (a.location < x) m += a.mass;
    else break;
  }
  return m;
}

double CenteredAtomicMeasure::mass_upto(double x) const {
  double m = 0.0;
  for (const Atom& a : atoms_) {
    if (a.location <= x) m += a.mass;
    else break;
  }
  return m;
}

double CenteredAtomicMeasure::mass_at(double x) const {
  for (const Atom& a : atoms_) {
    if (a.location == x) return a.mass;
    if (a.location > x) break;
  }
  return 0.0;
}

double CenteredAtomicMeasure::mean_abs() const {
  double m = 0.0;
  for (const Atom& a : atoms_) m += a.mass * std::abs(a.location);
  return m;
}

PotentialFunction::PotentialFunction(const CenteredAtomicMeasure& mu) {
  const auto& atoms = mu.atoms();
  xs_.reserve(atoms.size());
  cum_mass_.reserve(atoms.size());
  cum_first_.reserve(atoms.size());
  double w = 0.0, s1 = 0.0;
  for (const Atom& a : atoms) {
    xs_.push_back(a.location);
    w += a.mass;
    s1 += a.mass * a.location;
    cum_mass_.push_back(w);
    cum_first_.push_back(s1);
  }
  cs_.reserve(atoms.size());
  for (double x : xs_) cs_.push_back((*this)(x));
}

double PotentialFunction::operator()(double x) const {
  // c(x) = sum p_i |x_i - x| via prefix sums; exact for the kinks themselves.
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t k = static_cast<std::size_t>(it - xs_.begin());  // atoms [0,k) are <= x
  const double W = cum_mass_.back(), S = cum_first_.back();
  double w_le = (k == 0) ? 0.0 : cum_mass_[k - 1];
  double s_le = (k == 0) ? 0.0 : cum_first_[k - 1];
  return (x * w_le - s_le) + ((S - s_le) - x * (W - w_le));
}

double PotentialFunction::left_derivative(double x) const {
  auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
  std::size_t k = static_cast<std::size_t>(it - xs_.begin());  // atoms [0,k) are < x
  double below = (k == 0) ? 0.0 : cum_mass_[k - 1];
  return 2.0 * below - 1.0;
}

double PotentialFunction::right_derivative(double x) const {
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t k = static_cast<std::size_t>(it - xs_.begin());  // atoms [0,k) are <= x
  double upto = (k == 0) ? 0.0 : cum_mass_[k - 1];
  return 2.0 * upto - 1.0;
}

double barycenter_inverse(const CenteredAtomicMeasure& mu, double s) {
  // Tail means m_i = E[X | X >= x_i] increase with i, with m_1 = 0.
  // psi(s) = x_i for s in [m_i, m_{i+1}) and psi(s) = x_n past the top.
  const auto& atoms = mu.atoms();
  double tail_mass = 0.0, tail_first = 0.0;
  std::vector<double> tail_mean(atoms.size());
  for (std::size_t i = atoms.size(); i-- > 0;) {
    tail_mass += atoms[i].mass;
    tail_first += atoms[i].mass * atoms[i].location;
    tail_mean[i] = tail_first / tail_mass;
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (tail_mean[i] <= s) best = i;
    else break;
  }
  return atoms[best].location;
}

void PiecewiseConstantDensity::check() const {
  if (edges.size() < 2 || values.size() + 1 != edges.size())
    throw Error(Errc::bad_density, "need n+1 edges for n cells");
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i] < edges[i + 1]) || !std::isfinite(edges[i]))
      throw Error(Errc::bad_density, "edges must be finite and strictly increasing");
  }
  if (!std::isfinite(edges.back())) throw Error(Errc::bad_density, "edges must be finite");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
      throw Error(Errc::bad_density, "density values must be nonnegative");
    total += values[i] * (edges[i + 1] - edges[i]);
  }
  if (!(total > 0.0)) throw Error(Errc::bad_density, "density integrates to zero");
}

double PiecewiseConstantDensity::total_mass() const {
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    total += values[i] * (edges[i + 1] - edges[i]);
  return total;
}

double PiecewiseConstantDensity::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    m += values[i] * 0.5 * (edges[i + 1] * edges[i + 1] - edges[i] * edges[i]);
  return m / total_mass();
}

CenteredAtomicMeasure quantize(const PiecewiseConstantDensity& density, std::size_t n_atoms,
                               double tolerance) {
  density.check();
  if (n_atoms == 0) throw Error(Errc::bad_density, "n_atoms must be positive");
  const double total = density.total_mass();
  const double cell_mass = total / static_cast<double>(n_atoms);

  // March through the density, cutting at every multiple of cell_mass and
  // accumulating each cell's first moment for its conditional mean.
  std::vector<Atom> atoms;
  atoms.reserve(n_atoms);
  std::size_t cell = 0;
  double cell_acc = 0.0, cell_first = 0.0;
  for (std::size_t i = 0; i < density.values.size() && cell < n_atoms; ++i) {
    double lo = density.edges[i];
    const double hi = density.edges[i + 1];
    const double f = density.values[i];
    if (f <= 0.0) continue;
    while (lo < hi && cell < n_atoms) {
      const double want = cell_mass - cell_acc;
      const double avail = f * (hi - lo);
      if (avail < want - 1e-14 * total) {
        cell_acc += avail;
        cell_first += f * 0.5 * (hi * hi - lo * lo);
        lo = hi;
      } else {
        const double cut = std::min(hi, lo + want / f);
        cell_first += f * 0.5 * (cut * cut - lo * lo);
        atoms.push_back({cell_first / cell_mass, 1.0 / static_cast<double>(n_atoms)});
        cell_acc = 0.0;
        cell_first = 0.0;
        lo = cut;
        ++cell;
      }
    }
  }
  if (cell < n_atoms) {
    if (cell + 1 < n_atoms || !(cell_acc > 0.75 * cell_mass))
      throw Error(Errc::bad_density, "density mass exhausted early");
    // Floating-point shortfall at the very end: close the last cell.
    atoms.push_back({cell_first / cell_acc, 1.0 / static_cast<double>(n_atoms)});
  }

  // Exact recentring: shift every atom by the residual mean.
  double mean = 0.0;
  for (const Atom& a : atoms) mean += a.mass * a.location;
  for (Atom& a : atoms) a.location -= mean;

  // Merging is never needed for strictly positive cells, but equal conditional
  // means can arise from zero-density gaps; nudge instead of failing.
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    if (!(atoms[i - 1].location < atoms[i].location)) {
      throw Error(Errc::bad_density, "quantization produced non-increasing atoms");
    }
  }
  return CenteredAtomicMeasure(std::move(atoms), tolerance);
}

}  // namespace skembed
