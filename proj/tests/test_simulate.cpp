#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "skembed/simulate.hpp"
#include "skembed/stats.hpp"

using namespace skembed;

namespace {

struct Built {
  CenteredAtomicMeasure mu;
  PotentialFunction c;
  EmbeddingCurve curve;
  TangentProfile profile;
  EmbeddingSpec spec;
  ExitLaw law;
};

Built make(const CenteredAtomicMeasure& mu, CurvePreset tag, double x = 0.0) {
  PotentialFunction c(mu);
  EmbeddingCurve curve = EmbeddingCurve::preset(tag, mu, x);
  TangentProfile profile = build_profile(c, curve);
  EmbeddingSpec spec = build_embedding(profile, curve);
  ExitLaw law = exit_law(profile, spec);
  return Built{mu, std::move(c), std::move(curve), std::move(profile), std::move(spec),
               std::move(law)};
}

SimConfig small_config(double dx = 0.02, std::int64_t n = 20000, std::uint64_t seed = 7) {
  SimConfig cfg;
  cfg.dx = dx;
  cfg.n_paths = n;
  cfg.seed = seed;
  cfg.max_steps = 4000000;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  const auto b = make(testutil::mu2(), CurvePreset::vallois);
  SimConfig cfg = small_config();
  cfg.dx = 0.2;  // barriers sit at distance 1
  CHECK_THROWS_WITH_AS(simulate_paths(b.spec, cfg), doctest::Contains("ConfigError"), Error);
  cfg = small_config();
  cfg.n_paths = 0;
  CHECK_THROWS_AS(simulate_paths(b.spec, cfg), Error);
}

TEST_CASE("determinism and worker independence") {
  const auto b = make(testutil::mu2(), CurvePreset::vallois);
  SimConfig cfg = small_config(0.05, 2000);
  cfg.threads = 1;
  const auto e1 = simulate_paths(b.spec, cfg);
  cfg.threads = 4;
  const auto e2 = simulate_paths(b.spec, cfg);
  REQUIRE(e1.paths.size() == e2.paths.size());
  for (std::size_t i = 0; i < e1.paths.size(); ++i) {
    CHECK(e1.paths[i].B_T == e2.paths[i].B_T);
    CHECK(e1.paths[i].L_T == e2.paths[i].L_T);
    CHECK(e1.paths[i].steps == e2.paths[i].steps);
  }
}

TEST_CASE("two-point vallois walk reproduces the exit and local-time laws") {
  const auto b = make(testutil::mu2(), CurvePreset::vallois);
  SimConfig cfg = small_config(0.02, 20000, 11);
  cfg.record_levels = {3.0};
  const auto ens = simulate_paths(b.spec, cfg);
  CHECK(ens.unfinished_fraction() == 0.0);

  const auto rep = empirical_stats(ens, b.law, b.spec, b.profile, b.mu);
  // exact halves, sampling noise ~ 0.0035
  for (const auto& a : rep.atom_table) CHECK(std::abs(a.actual - a.expected) < 0.012);
  CHECK(std::abs(rep.mean_BT) < 3.5 * rep.se_BT);
  CHECK(rep.mean_absBT == doctest::Approx(1.0).epsilon(0.02));
  // P(L >= 1) = exp(-1)
  std::size_t count = 0, fin = 0;
  for (const auto& p : ens.paths) {
    if (p.side == StopSide::unfinished) continue;
    ++fin;
    if (p.L_T >= 1.0) ++count;
  }
  CHECK(static_cast<double>(count) / static_cast<double>(fin) ==
        doctest::Approx(std::exp(-1.0)).epsilon(0.05));
  CHECK(rep.ks_Y < 0.03);
  CHECK(rep.ks_BT < 0.02);
  // beyond the support the hitting diagnostic is exactly zero
  CHECK(rep.ui.at(0).ui_value == 0.0);
}

TEST_CASE("reflected-maximum walk: local time equals the running maximum") {
  const auto b = make(testutil::mu2(), CurvePreset::azema_yor);
  SimConfig cfg = small_config(0.02, 4000, 3);
  const auto ens = simulate_paths(b.spec, cfg);
  std::size_t terminal = 0;
  for (const auto& p : ens.paths) {
    CHECK(p.sup_B == doctest::Approx(p.L_T).epsilon(1e-12));
    if (p.side == StopSide::terminal) {
      ++terminal;
      CHECK(p.B_T == doctest::Approx(1.0));
      CHECK(p.L_T <= b.spec.l_max() + cfg.dx + 1e-12);
    } else {
      CHECK(p.side == StopSide::lower);
      CHECK(p.B_T == doctest::Approx(-1.0));
    }
  }
  CHECK(static_cast<double>(terminal) / static_cast<double>(ens.paths.size()) ==
        doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("time-change identity case matches a standard normal") {
  SimConfig cfg = small_config(0.01, 8000, 5);
  const std::vector<double> lk{0.0, 100.0};
  const std::vector<double> gk{0.0, 0.0};
  auto samples = simulate_time_change(lk, gk, cfg, 1.0);
  std::vector<double> xs;
  xs.reserve(samples.size());
  for (const auto& [x, l] : samples) xs.push_back(x);
  const double d = ks_distance(xs, [](double v) { return normal_cdf(v); });
  // 1% critical value 1.628/sqrt(n) plus lattice discreteness
  CHECK(d < 1.628 / std::sqrt(8000.0) + 0.006);
}

TEST_CASE("time-change aux tables") {
  const std::vector<double> lk{0.0, 10.0};
  SUBCASE("pure drift-free case") {
    const auto aux = build_time_change_aux(lk, {0.0, 0.0});
    CHECK(aux.yp[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(aux.np[0] == doctest::Approx(0.5 / std::sqrt(2.0)));
    CHECK(aux.np[0] == doctest::Approx(aux.mp[0]));
  }
  SUBCASE("reflected case has no positive part") {
    const auto aux = build_time_change_aux(lk, {0.0, 10.0});
    CHECK(aux.np[0] == doctest::Approx(0.0));
    CHECK(aux.mp[0] == doctest::Approx(1.0));
    CHECK(aux.yp[0] == doctest::Approx(1.0));
  }
  SUBCASE("bounds hold for a generic slope") {
    const auto aux = build_time_change_aux(lk, {0.0, 5.0});
    CHECK(aux.yp[0] >= 1.0 / std::sqrt(2.0) - 1e-12);
    CHECK(aux.yp[0] <= 1.0 + 1e-12);
    CHECK(aux.n[1] + aux.m[1] == doctest::Approx(aux.y[1]));
  }
  CHECK_THROWS_AS(build_time_change_aux(lk, {0.0, 20.0}), Error);  // not 1-Lipschitz
}

TEST_CASE("cross-scheme agreement for a constant skew") {
  // G(l) = l/2: positive excursions with probability 1/4
  const std::vector<double> lk{0.0, 100.0};
  const std::vector<double> gk{0.0, 50.0};
  SimConfig cfg = small_config(0.02, 8000, 17);
  auto tc = simulate_time_change(lk, gk, cfg, 1.0);
  cfg.seed = 18;
  auto sw = simulate_skew_free(lk, gk, cfg, 1.0);
  std::vector<double> xa, xb, la, lb;
  for (const auto& [x, l] : tc) {
    xa.push_back(x);
    la.push_back(l);
  }
  for (const auto& [x, l] : sw) {
    xb.push_back(x);
    lb.push_back(l);
  }
  CHECK(ks_distance_two(xa, xb) < 0.03);
  CHECK(ks_distance_two(la, lb) < 0.03);
}

TEST_CASE("level local-time estimators") {
  const auto b = make(testutil::mu2(), CurvePreset::local_time_at_x, 0.5);
  SimConfig cfg = small_config(0.02, 20000, 23);
  cfg.record_levels = {0.5};
  const auto ens = simulate_paths(b.spec, cfg);

  const auto ident = estimate_level_local_time(ens, b.spec, 0.5, LevelEstimator::identity);
  const auto cross = estimate_level_local_time(ens, b.spec, 0.5, LevelEstimator::crossing);
  REQUIRE(ident.size() == ens.paths.size());

  // first-moment identity: E L_T^x = 2 E (B_T - x)+ = 0.5 for the two-point target
  double mean_id = 0.0, mean_cr = 0.0, dot = 0.0, sq_id = 0.0, sq_cr = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ident.size(); ++i) {
    if (ens.paths[i].side == StopSide::unfinished) continue;
    ++n;
    mean_id += ident[i];
    mean_cr += cross[i];
  }
  mean_id /= static_cast<double>(n);
  mean_cr /= static_cast<double>(n);
  CHECK(mean_id == doctest::Approx(0.5).epsilon(0.05));
  CHECK(mean_cr / mean_id == doctest::Approx(1.0).epsilon(0.05));

  // per-path correlation between the two estimators
  for (std::size_t i = 0; i < ident.size(); ++i) {
    if (ens.paths[i].side == StopSide::unfinished) continue;
    const double a = ident[i] - mean_id, c2 = cross[i] - mean_cr;
    dot += a * c2;
    sq_id += a * a;
    sq_cr += c2 * c2;
  }
  const double corr = dot / std::sqrt(sq_id * sq_cr);
  CHECK(corr > 0.99);

  SUBCASE("identity estimator rejects other presets") {
    const auto v = make(testutil::mu2(), CurvePreset::vallois);
    CHECK_THROWS_WITH_AS(estimate_level_local_time(ens, v.spec, 0.5, LevelEstimator::identity),
                         doctest::Contains("WrongPreset"), Error);
  }
  SUBCASE("crossing estimator needs a recorded level") {
    CHECK_THROWS_WITH_AS(estimate_level_local_time(ens, b.spec, 0.25, LevelEstimator::crossing),
                         doctest::Contains("ConfigError"), Error);
  }
  SUBCASE("identity at x = 0 returns the full local time") {
    const auto lt0 = make(testutil::mu2(), CurvePreset::local_time_at_x, 0.0);
    SimConfig c0 = small_config(0.05, 500, 9);
    const auto e0 = simulate_paths(lt0.spec, c0);
    const auto v0 = estimate_level_local_time(e0, lt0.spec, 0.0, LevelEstimator::identity);
    for (std::size_t i = 0; i < v0.size(); ++i) CHECK(v0[i] == doctest::Approx(e0.paths[i].L_T));
  }
}

TEST_CASE("degenerate spec stops all paths at the origin") {
  const CenteredAtomicMeasure d0({{0.0, 1.0}});
  const auto b = make(d0, CurvePreset::vallois);
  const auto ens = simulate_paths(b.spec, small_config(0.05, 100, 1));
  for (const auto& p : ens.paths) {
    CHECK(p.side == StopSide::terminal);
    CHECK(p.B_T == 0.0);
    CHECK(p.steps == 0);
  }
}
