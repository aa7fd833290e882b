#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nhqlif/experiments.hpp"

using namespace nhqlif;

namespace {

QlifSeries synthetic(double dt, double t_max, double (*f)(double)) {
  QlifSeries s;
  s.times = make_time_grid(dt, t_max);
  for (double t : s.times) s.values.push_back(f(t));
  return s;
}

}  // namespace

TEST_CASE("parallel_for covers every index once and rethrows") {
  for (unsigned jobs : {0u, 1u, 3u, 8u}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  std::atomic<int> calls{0};
  parallel_for(0, 4, [&](std::size_t) { ++calls; });
  CHECK(calls == 0);
}

TEST_CASE("gamma grid") {
  const auto g = gamma_grid();
  REQUIRE(g.size() == 39);
  CHECK(g.front() == doctest::Approx(-0.95));
  CHECK(g[19] == 0.0);
  CHECK(g.back() == doctest::Approx(0.95));
  CHECK_THROWS_AS(gamma_grid(0.0), InvalidParams);
}

TEST_CASE("onset time") {
  const QlifSeries zero = synthetic(0.05, 20.0, [](double) { return 0.0; });
  CHECK_FALSE(onset_time(zero).has_value());
  const QlifSeries step = synthetic(0.05, 20.0, [](double t) { return t >= 3.2 ? 1e-3 : 0.0; });
  REQUIRE(onset_time(step).has_value());
  CHECK(std::abs(*onset_time(step) - 3.2) <= 0.05);
  // Linear interpolation between the bracketing points.
  const QlifSeries ramp = synthetic(0.5, 5.0, [](double t) { return -1e-6 * t; });
  REQUIRE(onset_time(ramp, 2.2e-6).has_value());
  CHECK(*onset_time(ramp, 2.2e-6) == doctest::Approx(2.2));
}

TEST_CASE("least-squares fit") {
  const auto fit = fit_line({2, 4, 6, 8, 10}, {1.2, 2.2, 3.2, 4.2, 5.2});
  CHECK(fit.slope == doctest::Approx(0.5));
  CHECK(fit.intercept == doctest::Approx(0.2));
  const auto noisy = fit_line({0, 1, 2, 3}, {1, 3, 2, 4});  // numpy.polyfit: 0.8, 1.3
  CHECK(noisy.slope == doctest::Approx(0.8));
  CHECK(noisy.intercept == doctest::Approx(1.3));
  CHECK_THROWS_AS(fit_line({1, 1}, {0, 1}), InvalidParams);
  CHECK_THROWS_AS(fit_line({1}, {0}), InvalidParams);
}

TEST_CASE("oscillation analysis on synthetic input") {
  const QlifSeries s = synthetic(0.05, 40.0, [](double t) {
    return 0.1 + 0.25 * std::sin(2.0 * std::numbers::pi * t / 2.2);
  });
  const OscillationFit fit = analyze_oscillation(s.times, s.values);
  CHECK(std::abs(fit.period - 2.2) < 0.02);
  CHECK(fit.amplitude == doctest::Approx(0.5).epsilon(1e-3));
  for (double t : fit.peak_times) CHECK(t > 10.0);

  // Small ripples below the prominence threshold are ignored.
  const QlifSeries rippled = synthetic(0.01, 40.0, [](double t) {
    return std::sin(2.0 * std::numbers::pi * t / 3.0) + 0.01 * std::sin(40.0 * t);
  });
  CHECK(std::abs(analyze_oscillation(rippled.times, rippled.values).period - 3.0) < 0.02);

  const QlifSeries flat = synthetic(0.05, 40.0, [](double t) { return 0.01 * t; });
  CHECK_THROWS(analyze_oscillation(flat.times, flat.values));
}

TEST_CASE("sublattice configurations") {
  const auto c = default_sublattice_configs();
  REQUIRE(c.size() == 5);
  CHECK(c[0].label == "aaa");
  CHECK(c[0].j0 == 20);
  CHECK(c[1].label == "bbb");
  CHECK(c[1].j0 == 21);
  CHECK(c[2].label == "abb_d5");
  CHECK(c[3].label == "baa_d5");
  CHECK(c[4].label == "abb_d7");
}

TEST_CASE("scissors: Hermitian curves overlap early, signs at t = 10") {
  ExperimentSetup setup;
  const auto pairs = run_scissors(setup);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].gamma == -0.3);
  CHECK(pairs[2].gamma == 0.3);
  // Regime-I quiescence at d = 6.
  for (const auto& p : pairs) {
    for (std::size_t k = 0; k < p.t_rl.times.size() && p.t_rl.times[k] < 0.5; ++k) {
      CHECK(std::abs(p.t_rl.values[k]) < 1e-6);
      CHECK(std::abs(p.t_lr.values[k]) < 1e-6);
    }
  }
  const auto d0 = pairs[1].delta();
  for (std::size_t k = 0; k < d0.size() && pairs[1].t_rl.times[k] <= 8.0; ++k) {
    CHECK(std::abs(d0[k]) < 1e-12);
  }
  // scipy reference values at t = 10 (see test_qlif): Delta = +0.04748 and -0.02977.
  CHECK(pairs[2].delta()[200] == doctest::Approx(0.013904048110450262 + 0.03357579643402625));
  CHECK(pairs[0].delta()[200] == doctest::Approx(-0.019368880626482364 - 0.010404684645571094));
}

TEST_CASE("xi scan maps targets onto the requested branch") {
  ExperimentSetup setup;
  const auto res = run_xi_scan(setup, SkinDirection::right, {4.0, 2.0, 8.0});
  REQUIRE(res.xis.size() == 3);
  CHECK(res.xis[0] == 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(res.gammas[i] < 0.0);
    CHECK(skin_profile(ModelParams{}.with_gamma(res.gammas[i])).xi ==
          doctest::Approx(res.xis[i]).epsilon(1e-9));
  }
  CHECK_THROWS_AS(run_xi_scan(setup, SkinDirection::left, {0.0}), InvalidParams);
}

TEST_CASE("light cone: onsets increase with distance and respect the Lieb-Robinson bound") {
  ExperimentSetup setup;
  const auto curves = run_lightcone(setup);
  REQUIRE(curves.size() == 3);
  for (const auto& c : curves) {
    CHECK(c.max_biorth_residual < kBiorthTolerance);
    CHECK(c.v_eff_cells == doctest::Approx(c.v_eff / 2.0));
    for (std::size_t i = 0; i < c.distances.size(); ++i) {
      REQUIRE(c.onset_times[i].has_value());
      if (i > 0) CHECK(*c.onset_times[i] > *c.onset_times[i - 1]);
    }
  }
  ExperimentSetup narrow = setup;
  narrow.j0 = 30;
  CHECK_THROWS_AS(run_lightcone(narrow), InvalidParams);
}

TEST_CASE("tables") {
  const auto t1 = build_table1(ModelParams{});
  REQUIRE(t1.size() == 5);
  CHECK(t1[1].skin.r == doctest::Approx(1.2247448713915890).epsilon(1e-12));
  CHECK(t1[1].skin.xi == doctest::Approx(4.932606924751).epsilon(1e-10));
  CHECK(t1[1].skin.direction == SkinDirection::right);
  CHECK(t1[2].mean_ipr == doctest::Approx(0.034547323405710505).epsilon(1e-9));
  CHECK(t1[3].mean_ipr == doctest::Approx(0.1313119165592728).epsilon(1e-9));

  const auto t2 = build_table2();
  REQUIRE(t2.size() == 5);
  CHECK(t2[1].t2 == 0.8);
  CHECK(t2[1].v_max_numeric == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(t2[1].v_max_formula == 0.8);
  CHECK(t2[2].phase == Phase::critical);
  CHECK(t2[4].phase == Phase::trivial);
}
