#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "skembed/law.hpp"

using namespace skembed;

namespace {

struct Built {
  CenteredAtomicMeasure mu;
  PotentialFunction c;
  EmbeddingCurve curve;
  TangentProfile profile;
  EmbeddingSpec spec;
};

Built make(const CenteredAtomicMeasure& mu, CurvePreset tag, double x = 0.0,
           GridControl ctrl = {}) {
  PotentialFunction c(mu);
  EmbeddingCurve curve = EmbeddingCurve::preset(tag, mu, x);
  TangentProfile profile = build_profile(c, curve, ctrl);
  EmbeddingSpec spec = build_embedding(profile, curve);
  return Built{mu, std::move(c), std::move(curve), std::move(profile), std::move(spec)};
}

double law_mass_at(const ExitLaw& law, double loc) {
  double m = 0.0;
  for (const auto& w : law.combined())
    if (std::abs(w.location - loc) < 1e-9) m += w.mass;
  return m;
}

}  // namespace

TEST_CASE("survival of the curve position") {
  const auto v2 = make(testutil::mu2(), CurvePreset::vallois);
  CHECK(survival_Y(v2.profile, 0.25) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(survival_Y(v2.profile, 0.0) == doctest::Approx(1.0));

  const auto ay4 = make(testutil::mu4(), CurvePreset::azema_yor);
  // gambler's ruin: reach running maximum 0.5 before -2 from 0
  CHECK(survival_Y(ay4.profile, 0.5 * std::sqrt(2.0)) == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(survival_Y(v2.profile, 5.0), doctest::Contains("OutOfRange"), Error);
}

TEST_CASE("exit laws of the named constructions") {
  GridControl tight;
  tight.gamma_floor = 1e-12;

  SUBCASE("two-point vallois") {
    const auto b = make(testutil::mu2(), CurvePreset::vallois, 0.0, tight);
    const auto law = exit_law(b.profile, b.spec);
    CHECK(law_mass_at(law, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(law_mass_at(law, -1.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(law.truncation_mass <= 1e-12);
    CHECK(law.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two-point reflected maximum") {
    const auto b = make(testutil::mu2(), CurvePreset::azema_yor, 0.0, tight);
    const auto law = exit_law(b.profile, b.spec);
    CHECK(law.upper.empty());
    REQUIRE(law.lower.size() == 1);
    CHECK(law.lower[0].location == doctest::Approx(-1.0));
    CHECK(law.lower[0].mass == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(law.terminal.location == doctest::Approx(1.0));
    CHECK(law.terminal.mass == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("four-point vallois splits mass by pieces") {
    const auto b = make(testutil::mu4(), CurvePreset::vallois, 0.0, tight);
    const auto law = exit_law(b.profile, b.spec);
    for (double loc : {-2.0, -1.0, 1.0, 2.0})
      CHECK(law_mass_at(law, loc) == doctest::Approx(0.25).epsilon(1e-9));
  }
}

TEST_CASE("embedding verification") {
  GridControl tight;
  tight.gamma_floor = 1e-12;
  const auto b2 = make(testutil::mu2(), CurvePreset::vallois, 0.0, tight);
  const auto law2 = exit_law(b2.profile, b2.spec);
  CHECK(verify_embedding(law2, b2.mu).max_abs_discrepancy <= 1e-9);

  const auto b4 = make(testutil::mu4(), CurvePreset::azema_yor, 0.0, tight);
  const auto law4 = exit_law(b4.profile, b4.spec);
  CHECK(verify_embedding(law4, b4.mu).max_abs_discrepancy <= 1e-9);

  SUBCASE("negative control: dropping the terminal atom is detected") {
    const auto ay = make(testutil::mu2(), CurvePreset::azema_yor);
    ExitLaw broken = exit_law(ay.profile, ay.spec);
    broken.terminal.mass = 0.0;
    const auto res = verify_embedding(broken, b2.mu);
    CHECK(res.max_abs_discrepancy == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("local time law") {
  const auto v2 = make(testutil::mu2(), CurvePreset::vallois);
  CHECK(local_time_law(v2.spec, v2.profile, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
  CHECK(local_time_law(v2.spec, v2.profile, 0.0) == doctest::Approx(1.0));

  const auto ay2 = make(testutil::mu2(), CurvePreset::azema_yor);
  // G(l) = l, H(s) = s/sqrt(2): survival at l = 0.5 is Gamma at v = 0.5
  CHECK(local_time_law(ay2.spec, ay2.profile, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("expected convex functional of local time") {
  const auto v2 = make(testutil::mu2(), CurvePreset::vallois);
  // L_T is Exp(1): E L^2 = 2, E L = 1 (= 2 E (B_T)+)
  CHECK(expected_psi(v2.spec, v2.profile, psi_square()) == doctest::Approx(2.0).epsilon(2e-4));
  CHECK(expected_psi(v2.spec, v2.profile, psi_identity()) == doctest::Approx(1.0).epsilon(2e-5));
  Psi zero;
  zero.value = [](double) { return 0.0; };
  zero.deriv = [](double) { return 0.0; };
  zero.second = [](double) { return 0.0; };
  CHECK(expected_psi(v2.spec, v2.profile, zero) == doctest::Approx(0.0));

  SUBCASE("level variant needs the matching preset") {
    CHECK_THROWS_WITH_AS(expected_psi_level(v2.spec, v2.profile, psi_square(), 0.5),
                         doctest::Contains("WrongPreset"), Error);
  }
  SUBCASE("level variant at x = 0 agrees with the plain functional") {
    const auto lt0 = make(testutil::mu2(), CurvePreset::local_time_at_x, 0.0);
    CHECK(expected_psi_level(lt0.spec, lt0.profile, psi_square(), 0.0) ==
          doctest::Approx(expected_psi(lt0.spec, lt0.profile, psi_square())).epsilon(1e-12));
  }
}

TEST_CASE("joint law marginals") {
  const auto b = make(testutil::mu4(), CurvePreset::azema_yor);
  const auto law = exit_law(b.profile, b.spec);
  const auto joint = joint_exit_law(b.profile, b.spec);
  CHECK(joint.total_mass() == doctest::Approx(law.total_mass()).epsilon(1e-9));

  // B-marginal equals the exit law
  for (const auto& w : law.combined()) {
    double m = 0.0;
    for (const auto& e : joint.entries)
      if (std::abs(e.location - w.location) < 1e-9) m += e.mass;
    CHECK(m == doctest::Approx(w.mass).epsilon(1e-9));
  }
  // L-marginal survival matches Gamma o H^{-1} at a few levels
  for (double l : {0.3, 0.9, 1.4}) {
    double m = 0.0;
    for (const auto& e : joint.entries)
      if (e.l >= l) m += e.mass;
    CHECK(m == doctest::Approx(local_time_law(b.spec, b.profile, l)).epsilon(0.02));
  }
}

TEST_CASE("exit law properties on random admissible pairs") {
  std::mt19937_64 rng(88771);
  for (int rep = 0; rep < 12; ++rep) {
    const auto mu = testutil::random_measure(rng);
    const PotentialFunction c(mu);
    const auto curve = testutil::random_admissible_curve(rng, c);
    GridControl ctrl;
    ctrl.gamma_floor = 1e-10;
    const auto prof = build_profile(c, curve, ctrl);
    const auto spec = build_embedding(prof, curve);
    const auto law = exit_law(prof, spec);

    CHECK(law.total_mass() == doctest::Approx(1.0).epsilon(1e-9));
    const auto res = verify_embedding(law, mu);
    CHECK(res.max_abs_discrepancy <= 1e-8 + law.truncation_mass);

    double ebt = 0.0, eabs = 0.0;
    for (const auto& w : law.combined()) {
      ebt += w.location * w.mass;
      eabs += std::abs(w.location) * w.mass;
    }
    CHECK(std::abs(ebt) <= 1e-8 + 3.5 * law.truncation_mass);
    CHECK(eabs == doctest::Approx(c(0.0)).epsilon(1e-6));

    // monotone coupling: upper locations nonincreasing, lower nondecreasing
    for (std::size_t i = 1; i < law.upper.size(); ++i)
      CHECK(law.upper[i].location < law.upper[i - 1].location + 1e-12);
    for (std::size_t i = 1; i < law.lower.size(); ++i)
      CHECK(law.lower[i].location > law.lower[i - 1].location - 1e-12);
  }
}

TEST_CASE("dual certificate for the uniform density") {
  PiecewiseConstantDensity u;
  u.edges = {-1.0, 1.0};
  u.values = {0.5};

  DualOptions opts;
  opts.n_atoms = 400;
  const auto cert = dual_certificate(u, psi_square(), opts);

  CHECK(cert.delta == doctest::Approx(-1.0));
  // closed form for the uniform target: E (L_T)^2 = 1/3
  CHECK(cert.primal_value == doctest::Approx(1.0 / 3.0).epsilon(0.01));
  CHECK(std::abs(cert.dual_value - cert.primal_value) / cert.primal_value <= 0.05);
  CHECK(cert.bracket_max <= 1e-3);

  SUBCASE("identity payoff gives a null certificate") {
    const auto cid = dual_certificate(u, psi_identity(), opts);
    CHECK(cid.dual_value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cid.bracket_max <= 1e-9);
    for (double g : cid.gamma_l) CHECK(g == doctest::Approx(0.0));
  }
  SUBCASE("lambda is nonnegative on the negative side") {
    for (std::size_t i = 0; i < cert.b_grid.size(); ++i)
      if (cert.b_grid[i] < 0.0) CHECK(cert.lambda_b[i] >= -1e-12);
  }
  SUBCASE("coarse quantization is rejected") {
    DualOptions coarse;
    coarse.n_atoms = 8;
    CHECK_THROWS_WITH_AS(dual_certificate(u, psi_square(), coarse),
                         doctest::Contains("DegenerateBoundaries"), Error);
  }
  SUBCASE("off-centre densities are rejected") {
    PiecewiseConstantDensity off;
    off.edges = {-0.5, 1.0};
    off.values = {1.0 / 1.5};
    CHECK_THROWS_AS(dual_certificate(off, psi_square(), opts), Error);
  }
}
