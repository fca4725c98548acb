#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "skembed/measure.hpp"

using namespace skembed;

TEST_CASE("measure validation") {
  CHECK_NOTHROW(testutil::mu2());
  CHECK_NOTHROW(testutil::mu4());

  CHECK_THROWS_WITH_AS(CenteredAtomicMeasure({{-1.0, 0.5}, {2.0, 0.5}}), doctest::Contains("NotCentered"),
                       Error);
  CHECK_THROWS_WITH_AS(CenteredAtomicMeasure({{-1.0, 0.5}, {1.0, 0.6}}),
                       doctest::Contains("NotProbability"), Error);
  CHECK_THROWS_WITH_AS(CenteredAtomicMeasure({{-1.0, 0.5}, {-1.0, 0.5}}), doctest::Contains("BadAtom"),
                       Error);
  CHECK_THROWS_WITH_AS(CenteredAtomicMeasure({{0.0, -1.0}, {0.0, 2.0}}), doctest::Contains("BadAtom"),
                       Error);
  CHECK_THROWS_AS(CenteredAtomicMeasure({}), Error);

  const CenteredAtomicMeasure d0({{0.0, 1.0}});
  CHECK(d0.is_delta_zero());
}

TEST_CASE("potential values") {
  const auto m2 = testutil::mu2();
  const auto m4 = testutil::mu4();
  const PotentialFunction c2(m2), c4(m4);

  CHECK(c2(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c2(3.0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(c4(1.0) == doctest::Approx(1.5).epsilon(1e-15));

  SUBCASE("one-sided derivatives") {
    auto [l1, r1] = c2.derivatives(1.0);
    CHECK(l1 == doctest::Approx(0.0));
    CHECK(r1 == doctest::Approx(1.0));
    auto [l0, r0] = c2.derivatives(0.0);
    CHECK(l0 == doctest::Approx(0.0));
    CHECK(r0 == doctest::Approx(0.0));
    auto [lm, rm] = c4.derivatives(-2.0);
    CHECK(lm == doctest::Approx(-1.0));
    CHECK(rm == doctest::Approx(-0.5));
  }
}

TEST_CASE("barycenter inverse") {
  const auto m2 = testutil::mu2();
  const auto m4 = testutil::mu4();
  CHECK(barycenter_inverse(m2, 0.5) == doctest::Approx(-1.0));
  CHECK(barycenter_inverse(m4, 0.5) == doctest::Approx(-2.0));
  CHECK(barycenter_inverse(m4, 1.0) == doctest::Approx(-1.0));
  // essential-supremum convention at the top
  CHECK(barycenter_inverse(m4, 10.0) == doctest::Approx(2.0));
}

TEST_CASE("quantize uniform") {
  PiecewiseConstantDensity u;
  u.edges = {-1.0, 1.0};
  u.values = {0.5};

  const auto q2 = quantize(u, 2);
  REQUIRE(q2.size() == 2);
  CHECK(q2.atoms()[0].location == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(q2.atoms()[1].location == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(q2.atoms()[0].mass == doctest::Approx(0.5));

  const auto q4 = quantize(u, 4);
  REQUIRE(q4.size() == 4);
  CHECK(q4.atoms()[0].location == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK(q4.atoms()[1].location == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(q4.atoms()[2].location == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q4.atoms()[3].location == doctest::Approx(0.75).epsilon(1e-12));

  const auto q1 = quantize(u, 1);
  REQUIRE(q1.size() == 1);
  CHECK(q1.atoms()[0].location == doctest::Approx(0.0));
  CHECK(q1.is_delta_zero());

  SUBCASE("recentring is exact") {
    PiecewiseConstantDensity skew;
    skew.edges = {-2.0, 0.0, 1.0};
    skew.values = {0.2, 0.6};
    const auto q = quantize(skew, 7);
    double mean = 0.0;
    for (const Atom& a : q.atoms()) mean += a.location * a.mass;
    CHECK(std::abs(mean) < 1e-15);
  }

  SUBCASE("bad densities") {
    PiecewiseConstantDensity bad;
    bad.edges = {1.0, -1.0};
    bad.values = {0.5};
    CHECK_THROWS_WITH_AS(quantize(bad, 2), doctest::Contains("BadDensity"), Error);
    PiecewiseConstantDensity zero;
    zero.edges = {-1.0, 1.0};
    zero.values = {0.0};
    CHECK_THROWS_WITH_AS(quantize(zero, 2), doctest::Contains("BadDensity"), Error);
  }
}

TEST_CASE("potential properties on random measures") {
  std::mt19937_64 rng(20240811);
  for (int rep = 0; rep < 30; ++rep) {
    const auto mu = testutil::random_measure(rng);
    const PotentialFunction c(mu);

    // convexity of kink values and domination of |x|
    const auto& xs = c.kinks();
    const auto& cs = c.kink_values();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(cs[i] >= std::abs(xs[i]) - 1e-12);
      if (i + 2 < xs.size()) {
        const double s1 = (cs[i + 1] - cs[i]) / (xs[i + 1] - xs[i]);
        const double s2 = (cs[i + 2] - cs[i + 1]) / (xs[i + 2] - xs[i + 1]);
        CHECK(s2 >= s1 - 1e-12);
      }
    }
    // c equals |x| outside the support
    CHECK(c(mu.min_location() - 0.7) ==
          doctest::Approx(std::abs(mu.min_location() - 0.7)).epsilon(1e-12));
    CHECK(c(mu.max_location() + 1.3) == doctest::Approx(mu.max_location() + 1.3).epsilon(1e-12));

    // derivative formula vs finite differences away from atoms
    std::uniform_real_distribution<double> xd(mu.min_location() - 1.0, mu.max_location() + 1.0);
    for (int k = 0; k < 10; ++k) {
      const double x = xd(rng);
      if (mu.mass_at(x) > 0.0) continue;
      const double eps = 1e-7;
      bool near_atom = false;
      for (const Atom& a : mu.atoms())
        if (std::abs(a.location - x) < 10 * eps) near_atom = true;
      if (near_atom) continue;
      const double fd = (c(x + eps) - c(x - eps)) / (2 * eps);
      CHECK(c.left_derivative(x) == doctest::Approx(fd).epsilon(1e-6));
      CHECK(c.right_derivative(x) == doctest::Approx(fd).epsilon(1e-6));
    }
    // non-differentiability exactly at atoms
    for (const Atom& a : mu.atoms()) {
      CHECK(c.right_derivative(a.location) - c.left_derivative(a.location) ==
            doctest::Approx(2.0 * a.mass).epsilon(1e-12));
    }
  }
}
