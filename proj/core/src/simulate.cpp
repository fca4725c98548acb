#include "skembed/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "skembed/rng.hpp"
#include "skembed/stats.hpp"

namespace skembed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxLevels = 16;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

template <typename Fn>
void parallel_chunks(std::int64_t n, int threads, const Fn& fn) {
  threads = static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(threads, n)));
  if (threads == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  const std::int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] { fn(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

struct KnotTables {
  std::vector<double> l, G, alpha, beta, p;
  double l_max = 0.0;
  double terminal_location = 0.0;
  std::size_t n = 0;
};

KnotTables flatten(const EmbeddingSpec& spec) {
  KnotTables t;
  const auto& ks = spec.knots();
  t.n = ks.size();
  t.l.reserve(t.n);
  t.G.reserve(t.n);
  t.alpha.reserve(t.n);
  t.beta.reserve(t.n);
  t.p.reserve(t.n);
  for (const SpecKnot& k : ks) {
    t.l.push_back(k.l);
    t.G.push_back(k.G);
    t.alpha.push_back(k.alpha);
    t.beta.push_back(k.beta);
    t.p.push_back(k.p);
  }
  t.l_max = spec.l_max();
  t.terminal_location = spec.terminal_location();
  return t;
}

void check_config(const EmbeddingSpec& spec, const SimConfig& cfg) {
  if (!(cfg.dx > 0.0)) throw Error(Errc::config_error, "dx must be positive");
  if (cfg.n_paths <= 0) throw Error(Errc::config_error, "n_paths must be positive");
  if (cfg.max_steps <= 0) throw Error(Errc::config_error, "max_steps must be positive");
  if (cfg.record_levels.size() > kMaxLevels)
    throw Error(Errc::config_error, "too many record levels");
  double min_barrier = kInf;
  const auto& ks = spec.knots();
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (std::isfinite(ks[i].a)) min_barrier = std::min(min_barrier, std::abs(ks[i].a));
    if (std::isfinite(ks[i].b)) min_barrier = std::min(min_barrier, std::abs(ks[i].b));
  }
  if (std::isfinite(min_barrier) && cfg.dx > min_barrier / 10.0 * (1.0 + 1e-12))
    throw Error(Errc::config_error, "dx must not exceed a tenth of the smallest barrier");
}

}  // namespace

double PathEnsemble::unfinished_fraction() const {
  if (paths.empty()) return 0.0;
  std::int64_t u = 0;
  for (const PathResult& p : paths)
    if (p.side == StopSide::unfinished) ++u;
  return static_cast<double>(u) / static_cast<double>(paths.size());
}

std::size_t PathEnsemble::level_index(double x) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (std::abs(levels[i] - x) <= 1e-9 * std::max(1.0, std::abs(x))) return i;
  throw Error(Errc::config_error, "level was not recorded in this run");
}

PathEnsemble simulate_paths(const EmbeddingSpec& spec, const SimConfig& config) {
  if (config.scheme != Scheme::skew_walk)
    throw Error(Errc::config_error, "simulate_paths runs the skew_walk scheme");
  check_config(spec, config);

  const KnotTables T = flatten(spec);
  PathEnsemble ens;
  ens.config = config;
  ens.levels = config.record_levels;
  const std::size_t nlev = ens.levels.size();
  const std::size_t npaths = static_cast<std::size_t>(config.n_paths);
  ens.paths.resize(npaths);
  ens.level_visits.assign(npaths * nlev, 0);
  ens.level_crossings.assign(npaths * nlev, 0);
  ens.level_hit.assign(npaths * nlev, 0);

  const double dx = config.dx;
  const double eps_l = 1e-12 * (1.0 + std::abs(T.l_max));

  parallel_chunks(config.n_paths, resolve_threads(config.threads), [&](std::int64_t lo,
                                                                       std::int64_t hi) {
    double lv[kMaxLevels];
    int lsgn[kMaxLevels];
    std::uint32_t lvis[kMaxLevels], lcross[kMaxLevels];
    std::uint8_t lhit[kMaxLevels];
    for (std::size_t r = 0; r < nlev; ++r) lv[r] = ens.levels[r];

    for (std::int64_t pi = lo; pi < hi; ++pi) {
      Xoshiro256pp rng(config.seed, static_cast<std::uint64_t>(pi));
      PathResult res;
      std::int64_t k = 0;
      double l = 0.0;
      std::size_t j = 1;
      double G_cur = T.G.front();
      double alpha_cur = 0.0, beta_cur = 0.0, p_cur = 0.5;
      std::int64_t kup = std::numeric_limits<std::int64_t>::max();
      std::int64_t kdn = std::numeric_limits<std::int64_t>::min();
      double B = G_cur;
      double sup_B = B, inf_B = B;
      std::int64_t steps = 0;

      for (std::size_t r = 0; r < nlev; ++r) {
        lsgn[r] = (B - lv[r] > -0.5 * dx) ? 1 : -1;
        lvis[r] = 0;
        lcross[r] = 0;
        lhit[r] = 0;
      }
      auto touch_levels = [&](double Bnow, bool at_stop) {
        for (std::size_t r = 0; r < nlev; ++r) {
          const double d = Bnow - lv[r];
          const int s = (d > -0.5 * dx) ? 1 : -1;
          if (s != lsgn[r]) {
            lsgn[r] = s;
            if (!at_stop) ++lcross[r];
          }
          if (!at_stop && d < 0.25 * dx && d > -0.25 * dx) {
            ++lvis[r];
            lhit[r] = 1;
          }
        }
      };

      if (T.n == 1) {
        // degenerate rule: everything stops immediately
        res.side = StopSide::terminal;
        res.B_T = T.terminal_location;
        res.L_T = 0.0;
        res.sup_B = sup_B;
        res.inf_B = inf_B;
        ens.paths[static_cast<std::size_t>(pi)] = res;
        continue;
      }

      for (;;) {
        if (k == 0) {
          l += dx;
          if (l >= T.l_max - 1e-9 * dx) {
            res.side = StopSide::terminal;
            res.B_T = T.terminal_location;
            B = T.terminal_location;
            if (B > sup_B) sup_B = B;
            if (B < inf_B) inf_B = B;
            touch_levels(B, true);
            break;
          }
          while (j + 1 < T.n && l > T.l[j] + eps_l) ++j;
          const double t = (l - T.l[j - 1]) / (T.l[j] - T.l[j - 1]);
          G_cur = T.G[j - 1] + std::min(1.0, std::max(0.0, t)) * (T.G[j] - T.G[j - 1]);
          alpha_cur = T.alpha[j];
          beta_cur = T.beta[j];
          p_cur = T.p[j];
          const double a_cur = alpha_cur - G_cur;
          const double b_cur = beta_cur - G_cur;
          kup = std::isfinite(a_cur)
                    ? std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                                    std::ceil(a_cur / dx - 1e-9)))
                    : std::numeric_limits<std::int64_t>::max();
          kdn = std::isfinite(b_cur)
                    ? std::min<std::int64_t>(-1, -static_cast<std::int64_t>(
                                                     std::ceil(-b_cur / dx - 1e-9)))
                    : std::numeric_limits<std::int64_t>::min();
          B = G_cur;
          if (B > sup_B) sup_B = B;
          if (B < inf_B) inf_B = B;
          touch_levels(B, false);
          k = (rng.uniform() < p_cur) ? 1 : -1;
        } else {
          k += rng.coin() ? 1 : -1;
        }
        ++steps;
        B = static_cast<double>(k) * dx + G_cur;
        if (B > sup_B) sup_B = B;
        if (B < inf_B) inf_B = B;

        if (k >= kup) {
          res.side = StopSide::upper;
          res.B_T = alpha_cur;
          touch_levels(B, true);
          break;
        }
        if (k <= kdn) {
          res.side = StopSide::lower;
          res.B_T = beta_cur;
          touch_levels(B, true);
          break;
        }
        touch_levels(B, false);
        if (steps >= config.max_steps) {
          res.side = StopSide::unfinished;
          res.B_T = B;
          break;
        }
      }
      res.L_T = l;
      res.sup_B = sup_B;
      res.inf_B = inf_B;
      res.steps = steps;
      ens.paths[static_cast<std::size_t>(pi)] = res;
      for (std::size_t r = 0; r < nlev; ++r) {
        ens.level_visits[static_cast<std::size_t>(pi) * nlev + r] = lvis[r];
        ens.level_crossings[static_cast<std::size_t>(pi) * nlev + r] = lcross[r];
        ens.level_hit[static_cast<std::size_t>(pi) * nlev + r] = lhit[r];
      }
    }
  });
  return ens;
}

double TimeChangeAux::y_at(double v) const {
  const std::size_t i = interval(v);
  return y[i] + yp[i] * (v - x[i]);
}
double TimeChangeAux::n_at(double v) const {
  const std::size_t i = interval(v);
  return n[i] + np[i] * (v - x[i]);
}
double TimeChangeAux::m_at(double v) const {
  const std::size_t i = interval(v);
  return m[i] + mp[i] * (v - x[i]);
}
std::size_t TimeChangeAux::interval(double v) const {
  auto it = std::upper_bound(x.begin(), x.end(), v);
  std::size_t i = static_cast<std::size_t>(it - x.begin());
  if (i > 0) --i;
  return std::min(i, x.size() - 2);
}

TimeChangeAux build_time_change_aux(const std::vector<double>& l_knots,
                                    const std::vector<double>& G_knots) {
  if (l_knots.size() < 2 || l_knots.size() != G_knots.size())
    throw Error(Errc::config_error, "G table needs matching knots");
  TimeChangeAux aux;
  const std::size_t n = l_knots.size();
  aux.x.resize(n);
  aux.y = l_knots;
  aux.n.resize(n);
  aux.m.resize(n);
  aux.yp.resize(n - 1);
  aux.np.resize(n - 1);
  aux.mp.resize(n - 1);
  aux.x[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    aux.n[i] = 0.5 * (l_knots[i] - G_knots[i]);
    aux.m[i] = 0.5 * (l_knots[i] + G_knots[i]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dl = l_knots[i + 1] - l_knots[i];
    if (!(dl > 0.0)) throw Error(Errc::config_error, "G table knots must increase");
    const double Gp = (G_knots[i + 1] - G_knots[i]) / dl;
    if (std::abs(Gp) > 1.0 + 1e-9)
      throw Error(Errc::config_error, "G must be 1-Lipschitz");
    const double vp = std::sqrt(2.0 / (1.0 + Gp * Gp));
    aux.x[i + 1] = aux.x[i] + vp * dl;
    aux.yp[i] = 1.0 / vp;
    aux.np[i] = 0.5 * (1.0 - Gp) / vp;
    aux.mp[i] = 0.5 * (1.0 + Gp) / vp;
  }
  return aux;
}

std::vector<std::pair<double, double>> simulate_time_change(const std::vector<double>& l_knots,
                                                            const std::vector<double>& G_knots,
                                                            const SimConfig& config,
                                                            double t_clock) {
  if (!(config.dx > 0.0) || config.n_paths <= 0)
    throw Error(Errc::config_error, "bad simulation config");
  if (!(t_clock > 0.0)) throw Error(Errc::config_error, "t_clock must be positive");
  const TimeChangeAux aux = build_time_change_aux(l_knots, G_knots);
  const double dx = config.dx;
  const double dt = dx * dx;
  std::vector<std::pair<double, double>> out(static_cast<std::size_t>(config.n_paths));

  parallel_chunks(config.n_paths, resolve_threads(config.threads), [&](std::int64_t lo,
                                                                       std::int64_t hi) {
    for (std::int64_t pi = lo; pi < hi; ++pi) {
      Xoshiro256pp rng(config.seed, static_cast<std::uint64_t>(pi));
      std::int64_t kb = 0;
      double Lt = 0.0;
      double A = 0.0;
      std::size_t iv = 0;
      double rate_pos = 4.0 * aux.np[0] * aux.np[0] * dt;
      double rate_neg = 4.0 * aux.mp[0] * aux.mp[0] * dt;
      std::int64_t steps = 0;
      for (;;) {
        if (kb == 0) {
          Lt += dx;
          while (iv + 1 < aux.x.size() - 1 && Lt > aux.x[iv + 1]) ++iv;
          rate_pos = 4.0 * aux.np[iv] * aux.np[iv] * dt;
          rate_neg = 4.0 * aux.mp[iv] * aux.mp[iv] * dt;
        }
        const double inc = (kb >= 0) ? rate_pos : rate_neg;
        if (A + inc >= t_clock) {
          const double slope = (kb >= 0) ? aux.np[iv] : aux.mp[iv];
          const double X = 2.0 * slope * static_cast<double>(kb) * dx;
          const double L = aux.n_at(Lt) + aux.m_at(Lt);
          out[static_cast<std::size_t>(pi)] = {X, L};
          break;
        }
        A += inc;
        kb += rng.coin() ? 1 : -1;
        if (++steps >= config.max_steps) {
          const double slope = (kb >= 0) ? aux.np[iv] : aux.mp[iv];
          out[static_cast<std::size_t>(pi)] = {2.0 * slope * static_cast<double>(kb) * dx,
                                               aux.n_at(Lt) + aux.m_at(Lt)};
          break;
        }
      }
    }
  });
  return out;
}

std::vector<std::pair<double, double>> simulate_skew_free(const std::vector<double>& l_knots,
                                                          const std::vector<double>& G_knots,
                                                          const SimConfig& config, double t_end) {
  if (!(config.dx > 0.0) || config.n_paths <= 0)
    throw Error(Errc::config_error, "bad simulation config");
  if (l_knots.size() < 2 || l_knots.size() != G_knots.size())
    throw Error(Errc::config_error, "G table needs matching knots");
  const double dx = config.dx;
  const std::int64_t nsteps = std::llround(t_end / (dx * dx));
  const std::size_t nk = l_knots.size();
  std::vector<double> pk(nk - 1);
  for (std::size_t i = 0; i + 1 < nk; ++i) {
    const double Gp = (G_knots[i + 1] - G_knots[i]) / (l_knots[i + 1] - l_knots[i]);
    if (std::abs(Gp) > 1.0 + 1e-9) throw Error(Errc::config_error, "G must be 1-Lipschitz");
    pk[i] = 0.5 * (1.0 - Gp);
  }
  std::vector<std::pair<double, double>> out(static_cast<std::size_t>(config.n_paths));

  parallel_chunks(config.n_paths, resolve_threads(config.threads), [&](std::int64_t lo,
                                                                       std::int64_t hi) {
    for (std::int64_t pi = lo; pi < hi; ++pi) {
      Xoshiro256pp rng(config.seed, static_cast<std::uint64_t>(pi));
      std::int64_t k = 0;
      double l = 0.0;
      std::size_t j = 0;
      double p_cur = pk[0];
      for (std::int64_t s = 0; s < nsteps; ++s) {
        if (k == 0) {
          l += dx;
          while (j + 1 < nk - 1 && l > l_knots[j + 1]) ++j;
          p_cur = pk[j];
          k = (rng.uniform() < p_cur) ? 1 : -1;
        } else {
          k += rng.coin() ? 1 : -1;
        }
      }
      out[static_cast<std::size_t>(pi)] = {static_cast<double>(k) * dx, l};
    }
  });
  return out;
}

StatsReport empirical_stats(const PathEnsemble& ensemble, const ExitLaw& law,
                            const EmbeddingSpec& spec, const TangentProfile& profile,
                            const CenteredAtomicMeasure& mu) {
  StatsReport rep;
  rep.unfinished_fraction = ensemble.unfinished_fraction();
  if (rep.unfinished_fraction > 0.01)
    throw Error(Errc::config_error, "more than 1% of paths did not finish");

  std::vector<double> bt, lt;
  bt.reserve(ensemble.paths.size());
  lt.reserve(ensemble.paths.size());
  for (const PathResult& p : ensemble.paths) {
    if (p.side == StopSide::unfinished) continue;
    bt.push_back(p.B_T);
    lt.push_back(p.L_T);
  }
  rep.n_finished = static_cast<std::int64_t>(bt.size());
  if (bt.empty()) throw Error(Errc::config_error, "no finished paths");

  // Reference exit CDF, truncation mass placed at its recorded location.
  std::vector<WeightedPoint> pts = law.combined();
  if (law.truncation_mass > 0.0) {
    pts.push_back({law.truncation_location, law.truncation_mass});
    std::sort(pts.begin(), pts.end(),
              [](const WeightedPoint& a, const WeightedPoint& b) { return a.location < b.location; });
  }
  std::vector<double> locs, cums;
  double acc = 0.0;
  for (const auto& w : pts) {
    acc += w.mass;
    locs.push_back(w.location);
    cums.push_back(acc);
  }
  for (double& cv : cums) cv /= std::max(acc, 1e-300);
  rep.ks_BT = ks_distance_discrete(bt, locs, cums);

  // Y = H^{-1}(L_T) against the survival Gamma: continuous on [0, s_end)
  // with a terminal atom closing the law at s_end.
  const double s_end = profile.s_end();
  std::vector<double> ys;
  ys.reserve(lt.size());
  for (double l : lt) ys.push_back(spec.invert_H(std::min(l, spec.l_max())));
  std::sort(ys.begin(), ys.end());
  {
    const double n = static_cast<double>(ys.size());
    const double atom_left = 1.0 - spec.terminal_mass();
    double d = 0.0;
    std::size_t i = 0;
    for (; i < ys.size(); ++i) {
      if (ys[i] >= s_end * (1.0 - 1e-12)) break;
      const double F = 1.0 - survival_Y(profile, ys[i]);
      d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - F,
                               F - static_cast<double>(i) / n));
    }
    d = std::max(d, std::abs(static_cast<double>(i) / n - atom_left));
    rep.ks_Y = d;
  }

  const MeanSE mb = mean_se(bt);
  rep.mean_BT = mb.mean;
  rep.se_BT = mb.se;
  std::vector<double> abt(bt.size());
  for (std::size_t i = 0; i < bt.size(); ++i) abt[i] = std::abs(bt[i]);
  const MeanSE ma = mean_se(abt);
  rep.mean_absBT = ma.mean;
  rep.se_absBT = ma.se;
  rep.c0_reference = mu.mean_abs();
  rep.mean_LT = mean_se(lt).mean;

  for (const Atom& atom : mu.atoms()) {
    const double tol = 1e-9 * std::max(1.0, std::abs(atom.location));
    std::size_t count = 0;
    for (double b : bt)
      if (std::abs(b - atom.location) <= tol) ++count;
    rep.atom_table.push_back(
        {atom.location, atom.mass, static_cast<double>(count) / static_cast<double>(bt.size())});
  }

  const std::size_t nlev = ensemble.levels.size();
  for (std::size_t r = 0; r < nlev; ++r) {
    LevelDiag d;
    d.x = ensemble.levels[r];
    std::size_t hits = 0, fin = 0;
    for (std::size_t i = 0; i < ensemble.paths.size(); ++i) {
      if (ensemble.paths[i].side == StopSide::unfinished) continue;
      ++fin;
      hits += ensemble.level_hit[i * nlev + r];
    }
    d.hit_fraction = fin ? static_cast<double>(hits) / static_cast<double>(fin) : 0.0;
    d.ui_value = d.x * d.hit_fraction;
    rep.ui.push_back(d);
  }
  return rep;
}

std::vector<double> estimate_level_local_time(const PathEnsemble& ensemble,
                                              const EmbeddingSpec& spec, double x,
                                              LevelEstimator method) {
  std::vector<double> out;
  out.reserve(ensemble.paths.size());
  if (method == LevelEstimator::identity) {
    if (spec.preset_tag() != CurvePreset::local_time_at_x ||
        std::abs(spec.preset_x() - x) > 1e-9 * std::max(1.0, std::abs(x)))
      throw Error(Errc::wrong_preset, "identity estimator needs the local_time_at_x preset");
    for (const PathResult& p : ensemble.paths)
      out.push_back(std::max(0.0, p.L_T - std::min(p.sup_B, x)));
  } else {
    const std::size_t r = ensemble.level_index(x);
    const std::size_t nlev = ensemble.levels.size();
    for (std::size_t i = 0; i < ensemble.paths.size(); ++i)
      out.push_back(ensemble.config.dx *
                    static_cast<double>(ensemble.level_crossings[i * nlev + r]));
  }
  return out;
}

}  // namespace skembed
