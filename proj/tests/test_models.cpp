#include <gtest/gtest.h>

#include <numbers>

#include "lindstedt/lindstedt.hpp"

using namespace lindstedt;

namespace {

constexpr double kPi = std::numbers::pi;

RotationVector flow(std::vector<double> v) {
  RotationVector w;
  w.values = std::move(v);
  return w;
}

Model standard_map() {
  ModelSpec s;
  s.kind = ModelKind::standard_map;
  return Model(s, golden_map());
}

ModelSpec maximal_spec() {
  ModelSpec s;
  s.kind = ModelKind::maximal_torus;
  s.forcing = {{Mode{1, 1}, 0.5}, {Mode{-1, -1}, 0.5}, {Mode{1, 0}, 0.3}, {Mode{-1, 0}, 0.3}};
  return s;
}

Model maximal() { return Model(maximal_spec(), flow({1.0, (std::sqrt(5.0) - 1) / 2})); }

Model lower() {
  ModelSpec s;
  s.kind = ModelKind::lower_tori;
  s.r = 1;
  s.s = 1;
  s.beta0 = {0.0};
  s.forcing = {{Mode{1, 0}, 0.5}, {Mode{-1, 0}, 0.5}, {Mode{0, 1}, 0.5},
               {Mode{0, -1}, 0.5}, {Mode{1, 1}, 0.25}, {Mode{-1, -1}, 0.25}};
  return Model(s, flow({1.0}));
}

Model dissipative() {
  ModelSpec s;
  s.kind = ModelKind::dissipative;
  s.g_taylor = {0, 0, 0, 1};
  s.forcing = {{Mode{0}, 1.0}, {Mode{1}, 0.5}, {Mode{-1}, 0.5}};
  return Model(s, flow({1.0}));
}

}  // namespace

TEST(StandardMap, FirstOrderIsSineOverDivisor) {
  Model m = standard_map();
  SolveReport r = solve_lindstedt(m, 1);
  double w = m.omega().values[0];
  cplx expect = cplx(0, -0.5) / (2.0 * (std::cos(2 * kPi * w) - 1.0));
  EXPECT_NEAR(std::abs(r.series.coeff(1, Mode{1})[0] - expect), 0, 1e-15);
  EXPECT_NEAR(std::abs(r.series.coeff(1, Mode{-1})[0] + expect), 0, 1e-15);
  EXPECT_EQ(r.series.order(1).size(), 2u);
}

TEST(StandardMap, CoefficientsAreOddAndImaginary) {
  Model m = standard_map();
  SolveReport r = solve_lindstedt(m, 8);
  for (int k = 1; k <= 8; ++k) {
    for (const auto& [nu, c] : r.series.order(k)) {
      EXPECT_LE(std::abs(c[0].real()), 1e-12 * std::max(1.0, std::abs(c[0]))) << k << mode_to_string(nu);
      CVec partner = r.series.coeff(k, mode_neg(nu));
      EXPECT_NEAR(std::abs(partner[0] + c[0]), 0, 1e-12 * std::max(1.0, std::abs(c[0])));
      // support |nu| <= k, with the parity of k
      EXPECT_LE(l1(nu), k);
      EXPECT_EQ((l1(nu) - k) % 2, 0);
    }
  }
}

TEST(StandardMap, ResonantRotationNumberErrors) {
  ModelSpec s;
  s.kind = ModelKind::standard_map;
  RotationVector w;
  w.kind = Dynamics::map;
  w.values = {0.4};
  w.nu_max = 3;  // skip the stamp so the divisor itself is hit
  EXPECT_THROW(solve_lindstedt(Model(s, w), 6), InputError);
}

TEST(MaximalTorus, FirstOrderExample) {
  Model m = maximal();
  SolveReport r = solve_lindstedt(m, 1);
  double x = m.x_of(Mode{1, 1});
  CVec c = r.series.coeff(1, Mode{1, 1});
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(c[i] - cplx(0, 0.5 / (x * x))), 0, 1e-14);
  CVec e = r.series.coeff(1, Mode{1, 0});
  EXPECT_NEAR(std::abs(e[0] - cplx(0, 0.3)), 0, 1e-15);
  EXPECT_EQ(e[1], cplx(0));
}

TEST(MaximalTorus, SupportGrowsByForcingDegree) {
  Model m = maximal();
  SolveReport r = solve_lindstedt(m, 5);
  for (int k = 1; k <= 5; ++k)
    for (const auto& [nu, c] : r.series.order(k)) EXPECT_LE(l1(nu), 2 * k);
  EXPECT_LE(r.max_hermitian_violation, 1e-12);
}

TEST(MaximalTorus, CompatibilityHolds) {
  Model m = maximal();
  SolveReport r = solve_lindstedt(m, 5);
  for (const auto& e : r.compat) EXPECT_LE(e.rel, 1e-13) << e.k;
  EXPECT_NO_THROW(check_compatibility(m, compatibility_report(m, r.series, 5)));
}

TEST(MaximalTorus, PhaseCovariance) {
  const std::vector<double> theta{0.37, -1.2};
  ModelSpec shifted = maximal_spec();
  shifted.alpha0 = theta;
  Model m0 = maximal();
  Model m1(shifted, m0.omega());
  SolveReport r0 = solve_lindstedt(m0, 4), r1 = solve_lindstedt(m1, 4);
  for (int k = 1; k <= 4; ++k)
    for (const auto& [nu, c] : r0.series.order(k)) {
      cplx ph = std::polar(1.0, nu[0] * theta[0] + nu[1] * theta[1]);
      CVec c1 = r1.series.coeff(k, nu);
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(c1[i] - c[i] * ph), 0, 1e-12 * std::max(1.0, std::abs(c[i])));
    }
}

TEST(MaximalTorus, NonRealForcingErrors) {
  ModelSpec s = maximal_spec();
  s.forcing = {{Mode{1, 1}, 0.5}};
  EXPECT_THROW(Model(s, flow({1.0, 0.618})), InputError);
}

TEST(LowerTori, ZeroModesAreRealAndCompatible) {
  Model m = lower();
  SolveReport r = solve_lindstedt(m, 6);
  for (int k = 1; k <= 6; ++k) {
    ASSERT_EQ(r.zero_mode[k].size(), 2u);
    EXPECT_EQ(r.zero_mode[k][0], cplx(0));
    EXPECT_EQ(r.zero_mode[k][1].imag(), 0.0);
  }
  for (const auto& e : compatibility_report(m, r.series, 6)) EXPECT_LE(e.rel, 1e-12) << e.k;
}

TEST(LowerTori, CouplingIsMinusHessian) {
  Model m = lower();
  ASSERT_TRUE(m.stationary());
  // f0 = cos(beta): Hessian -1 at beta = 0
  EXPECT_NEAR(m.zero_coupling()(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(m.stationary()->a[0], 1.0, 1e-15);
}

TEST(LowerTori, DegenerateHessianErrors) {
  ModelSpec s;
  s.kind = ModelKind::lower_tori;
  s.r = 1;
  s.s = 1;
  s.beta0 = {0.0};
  s.forcing = {{Mode{1, 0}, 0.5}, {Mode{-1, 0}, 0.5}};
  EXPECT_THROW(Model(s, flow({1.0})), InputError);
}

TEST(Dissipative, RootAndDerivative) {
  Model m = dissipative();
  EXPECT_DOUBLE_EQ(m.c0(), 1.0);
  EXPECT_DOUBLE_EQ(m.a(), 3.0);
}

TEST(Dissipative, FirstOrderExample) {
  Model m = dissipative();
  SolveReport r = solve_lindstedt(m, 1);
  for (int s : {1, -1}) {
    cplx expect = 1.0 / cplx(0, 2.0 * s);
    EXPECT_NEAR(std::abs(r.series.coeff(1, Mode{s})[0] - expect), 0, 1e-15);
  }
  EXPECT_EQ(r.series.coeff(0, Mode{0})[0], cplx(1.0));
}

TEST(Dissipative, ZeroModeReevaluationVanishes) {
  Model m = dissipative();
  SolveReport r = solve_lindstedt(m, 6);
  for (const auto& e : compatibility_report(m, r.series, 6)) EXPECT_LE(e.rel, 1e-12) << e.k;
  for (int k = 1; k <= 6; ++k) EXPECT_EQ(r.zero_mode[k][0].imag(), 0.0);
}

TEST(Dissipative, ExplicitRootMustSolveEquation) {
  ModelSpec s;
  s.kind = ModelKind::dissipative;
  s.g_taylor = {0, 0, 0, 1};
  s.forcing = {{Mode{0}, 1.0}};
  s.c0 = 0.5;
  EXPECT_THROW(Model(s, flow({1.0})), InputError);
}

TEST(Dissipative, FlowKindRequired) {
  ModelSpec s;
  s.kind = ModelKind::dissipative;
  s.g_taylor = {0, 1};
  RotationVector w = golden_map();
  EXPECT_THROW(Model(s, w), InputError);
}

TEST(Residual, VanishesAtZeroEps) {
  for (const Model& m : {standard_map(), maximal(), lower(), dissipative()}) {
    SolveReport r = solve_lindstedt(m, 3);
    EXPECT_EQ(residual_eval(m, r.series, 0.0, default_grid(m.d(), 16)).residual, 0.0) << to_string(m.kind());
  }
}

TEST(Residual, OrderOneScalesQuadratically) {
  for (const Model& m : {standard_map(), maximal(), dissipative()}) {
    SolveReport r = solve_lindstedt(m, 1);
    OrderCheck oc = residual_order_check(m, r.series, 0.02, 0.01, default_grid(m.d(), 32));
    EXPECT_NEAR(oc.p, 2.0, 0.1) << to_string(m.kind());
  }
}

TEST(Residual, OrderKScalesAsKPlusOne) {
  for (const Model& m : {standard_map(), maximal(), lower(), dissipative()}) {
    for (int K : {2, 4}) {
      SolveReport r = solve_lindstedt(m, K);
      OrderCheck oc = residual_order_check(m, r.series, 0.1, 0.05, default_grid(m.d(), 32));
      EXPECT_GE(oc.p, K + 0.9) << to_string(m.kind()) << " K=" << K;
    }
  }
}

TEST(Residual, RoundoffFloorIsReported) {
  Model m = standard_map();
  SolveReport r = solve_lindstedt(m, 8);
  EXPECT_THROW(residual_order_check(m, r.series, 1e-3, 5e-4, default_grid(1)), InputError);
}

TEST(Stationary, CosineAtZero) {
  StationaryReport s = stationary_point_check({{Mode{1}, 0.5}, {Mode{-1}, 0.5}}, {0.0});
  EXPECT_NEAR(s.gradient_norm, 0, 1e-15);
  EXPECT_NEAR(s.hessian(0, 0), -1.0, 1e-15);
  ASSERT_EQ(s.a.size(), 1u);
  EXPECT_NEAR(s.a[0], 1.0, 1e-15);
  EXPECT_EQ(s.classification.rfind("maximum", 0), 0u);
}

TEST(Stationary, NonStationaryPointErrors) {
  EXPECT_THROW(stationary_point_check({{Mode{1}, 0.5}, {Mode{-1}, 0.5}}, {kPi / 2}), InputError);
}

TEST(Stationary, TwoDimensionalEigenvalues) {
  StationaryReport s = stationary_point_check(
      {{Mode{1, 0}, 0.5}, {Mode{-1, 0}, 0.5}, {Mode{0, 1}, 1.0}, {Mode{0, -1}, 1.0}}, {0.0, 0.0});
  ASSERT_EQ(s.a.size(), 2u);
  EXPECT_NEAR(s.a[0], 1.0, 1e-14);
  EXPECT_NEAR(s.a[1], 2.0, 1e-14);
  EXPECT_TRUE(s.distinct);
}

TEST(Stationary, MinimumClassification) {
  StationaryReport s = stationary_point_check({{Mode{1}, 0.5}, {Mode{-1}, 0.5}}, {kPi});
  EXPECT_NEAR(s.a[0], -1.0, 1e-14);
  EXPECT_EQ(s.classification.rfind("minimum", 0), 0u);
}

TEST(Stamping, DefaultsByDimension) {
  EXPECT_EQ(standard_map().omega().nu_max, 1000);
  EXPECT_EQ(maximal().omega().nu_max, 200);
  EXPECT_DOUBLE_EQ(maximal().omega().tau, 1.0);
  EXPECT_GT(maximal().omega().gamma, 0);
}
