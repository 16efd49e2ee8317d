#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include "lindstedt/lindstedt.hpp"

using namespace lindstedt;
using boost::multiprecision::cpp_int;

namespace {

// q_0 = 1, q_1 = a_1, q_{n+1} = a_{n+1} q_n + q_{n-1}; B = sum_{n>=1} log(q_{n+1})/q_n
double direct_bryuno(const std::vector<long long>& a, int n_terms) {
  std::vector<cpp_int> q{1, a[0]};
  for (std::size_t i = 1; i < a.size(); ++i) q.push_back(a[i] * q.back() + q[q.size() - 2]);
  double s = 0;
  for (int n = 1; n <= n_terms && n + 1 < static_cast<int>(q.size()); ++n) {
    long double lq = 0;
    cpp_int x = q[n + 1];
    int shifts = 0;
    while (x > cpp_int(1) << 60) {
      x >>= 1;
      ++shifts;
    }
    lq = std::log(static_cast<long double>(x.convert_to<long double>())) + shifts * std::log(2.0L);
    s += static_cast<double>(lq / q[n].convert_to<long double>());
  }
  return s;
}

std::vector<long long> ones_with(std::size_t len, std::size_t pos, long long value) {
  std::vector<long long> a(len, 1);
  if (pos > 0) a[pos - 1] = value;
  return a;
}

RotationVector flow(std::vector<double> v) {
  RotationVector w;
  w.values = std::move(v);
  return w;
}

}  // namespace

TEST(ContinuedFraction, GoldenMeanIsAllOnesWithFibonacciDenominators) {
  CFResult r = continued_fraction(golden_map(), 60);
  ASSERT_EQ(r.a.size(), 60u);
  for (const auto& a : r.a) EXPECT_EQ(a, 1);
  cpp_int f0 = 1, f1 = 1;
  EXPECT_EQ(r.q[0], 1);
  for (int n = 1; n <= 60; ++n) {
    EXPECT_EQ(r.q[n], f1) << n;
    cpp_int f2 = f0 + f1;
    f0 = f1;
    f1 = f2;
  }
}

TEST(ContinuedFraction, SilverMeanIsAllTwos) {
  CFResult r = continued_fraction(silver_map(), 40);
  ASSERT_EQ(r.a.size(), 40u);
  for (const auto& a : r.a) EXPECT_EQ(a, 2);
}

TEST(ContinuedFraction, DenominatorRecurrenceIsExact) {
  CFSpec spec{{3, 7, 15}, {1, 292}};
  CFResult r = continued_fraction(spec, 50);
  for (std::size_t n = 1; n + 1 < r.q.size(); ++n) {
    EXPECT_EQ(r.q[n + 1], r.a[n] * r.q[n] + r.q[n - 1]);
    EXPECT_GT(r.q[n + 1], r.q[n]);
  }
}

TEST(ContinuedFraction, FloatMatchesExactRationalPrefix) {
  // exact CF of 123456789 / 10^9 by Euclid
  std::vector<long long> exact;
  long long p = 123456789, q = 1000000000;
  while (p != 0) {
    exact.push_back(q / p);
    long long t = q % p;
    q = p;
    p = t;
  }
  CFResult r = continued_fraction(0.123456789, 30);
  EXPECT_TRUE(r.truncated);
  ASSERT_GE(r.a.size(), 5u);
  for (std::size_t i = 0; i < r.a.size() && i + 1 < exact.size(); ++i) EXPECT_EQ(r.a[i], exact[i]) << i;
}

TEST(ContinuedFraction, FloatTruncationIsSignalled) {
  CFResult r = continued_fraction((std::sqrt(5.0) - 1) / 2, 200);
  EXPECT_TRUE(r.truncated);
  EXPECT_LT(r.a.size(), 60u);
  for (const auto& a : r.a) EXPECT_EQ(a, 1);
}

TEST(Bryuno, GoldenMatchesDirectFibonacciSum) {
  BryunoReport b = bryuno_function(golden_map(), 40);
  double direct = direct_bryuno(std::vector<long long>(120, 1), 119);
  EXPECT_NEAR(b.value, direct, 1e-12);
  EXPECT_FALSE(b.converged);
  EXPECT_GT(b.tail, 0);
  EXPECT_TRUE(bryuno_function(golden_map(), 80).converged);
  for (std::size_t i = 1; i < b.partial_sums.size(); ++i) EXPECT_GE(b.partial_sums[i], b.partial_sums[i - 1]);
}

TEST(Bryuno, LargeQuotientRaisesSum) {
  const std::size_t pos = 6;
  CFSpec spec{ones_with(pos, pos, 1000000), {1}};
  BryunoReport big = bryuno_function(from_cf(spec), 40);
  BryunoReport gold = bryuno_function(golden_map(), 40);
  double direct = direct_bryuno(ones_with(200, pos, 1000000), 199);
  EXPECT_NEAR(big.value, direct, 1e-9);
  // the jump is carried by the term log(q_pos)/q_{pos-1}; the golden terms
  // from n = pos-1 on are displaced, so they bound the discrepancy
  cpp_int f0 = 1, f1 = 1;
  for (std::size_t n = 1; n < pos - 1; ++n) {
    cpp_int f2 = f0 + f1;
    f0 = f1;
    f1 = f2;
  }
  double qk = f1.convert_to<double>();
  double jump = std::log(1e6) / qk;
  std::vector<long long> ones(200, 1);
  double gold_tail = direct_bryuno(ones, 199) - direct_bryuno(ones, static_cast<int>(pos) - 2);
  EXPECT_GT(big.value - gold.value, 0);
  EXPECT_NEAR(big.value - gold.value, jump, gold_tail + std::log(qk) / qk);
}

TEST(Bryuno, InsertingLargerQuotientNeverDecreasesOnceLarge) {
  // small quotients can lower B because they shrink the later terms
  double prev = -1;
  for (long long a : {20LL, 30LL, 100LL, 1000LL, 10000LL, 1000000LL}) {
    CFSpec spec{{1, 1, a}, {1}};
    double b = bryuno_function(from_cf(spec), 40).value;
    EXPECT_GE(b, prev) << a;
    prev = b;
  }
}

TEST(Bryuno, FloatInputWithTooFewTermsErrors) {
  RotationVector w;
  w.kind = Dynamics::map;
  w.values = {0.123456789};
  EXPECT_THROW(bryuno_function(w, 40), InputError);
}

TEST(BryunoOmega, ScalarRatioStaysInABand) {
  RotationVector w = golden_map();
  double B = bryuno_function(w, 40).value;
  double lo = 1e300, hi = 0;
  for (int n = 8; n <= 14; ++n) {
    double r = bryuno_omega(w, n).value / B;
    EXPECT_TRUE(std::isfinite(r));
    EXPECT_GT(r, 0);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  EXPECT_LT(hi / lo, 1.5);
}

TEST(BryunoOmega, MinimizersMatchBruteForce) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  RotationVector w = flow({1.0, g});
  BryunoReport b = bryuno_omega(w, 10);
  for (int n = 1; n <= 10; ++n) {
    int R = 1 << n;
    double best = 1e300;
    for (int a = -R; a <= R; ++a)
      for (int c = -(R - std::abs(a)); c <= R - std::abs(a); ++c)
        if (a || c) best = std::min(best, std::fabs(a + c * g));
    EXPECT_NEAR(b.alpha_n[n - 1], best, 1e-12) << n;
    // minimizers are Fibonacci pairs
    const Mode& nu = b.alpha_argmin[n - 1];
    cpp_int f0 = 0, f1 = 1;
    bool fib = false;
    for (int i = 0; i < 40; ++i) {
      if (std::abs(nu[0]) == f0 && std::abs(nu[1]) == f1) fib = true;
      cpp_int f2 = f0 + f1;
      f0 = f1;
      f1 = f2;
    }
    EXPECT_TRUE(fib) << mode_to_string(nu);
  }
  for (std::size_t i = 1; i < b.alpha_n.size(); ++i) EXPECT_LE(b.alpha_n[i], b.alpha_n[i - 1]);
}

TEST(BryunoOmega, RationalVectorErrors) { EXPECT_THROW(bryuno_omega(flow({1.0, 0.5}), 6), InputError); }

TEST(BryunoOmega, BudgetIsEnforced) { EXPECT_THROW(bryuno_omega(flow({1.0, 0.3, 0.7}), 14), BudgetExceeded); }

TEST(DiophantineConstant, GoldenNonincreasingInRadius) {
  RotationVector w = golden_map();
  double prev = 1e300;
  for (int R : {10, 100, 1000, 10000}) {
    double g = diophantine_constant(w, 1.0, R);
    EXPECT_LE(g, prev);
    prev = g;
    // brute force oracle
    double best = 1e300;
    for (int v = 1; v <= R; ++v) {
      double x = v * w.values[0];
      best = std::min(best, std::fabs(x - std::round(x)) * v);
    }
    EXPECT_DOUBLE_EQ(g, best);
  }
  EXPECT_GT(prev, 0.3);
}

TEST(DiophantineConstant, RadiusOneGivesSmallestComponent) {
  EXPECT_DOUBLE_EQ(diophantine_constant(flow({1.0, 0.618, -0.3}), 2.0, 1), 0.3);
}

TEST(DiophantineConstant, NondecreasingInTau) {
  RotationVector w = flow({1.0, (std::sqrt(5.0) - 1) / 2});
  double prev = 0;
  for (double tau : {1.0, 1.5, 2.0, 3.0}) {
    double g = diophantine_constant(w, tau, 200);
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(DiophantineConstant, FlowShortcutAgreesWithExhaustiveSearch) {
  RotationVector w = flow({1.0, std::sqrt(2.0) - 1});
  double best = 1e300;
  for (int a = -60; a <= 60; ++a)
    for (int c = -(60 - std::abs(a)); c <= 60 - std::abs(a); ++c)
      if (a || c) best = std::min(best, std::fabs(a + c * w.values[1]) * (std::abs(a) + std::abs(c)));
  EXPECT_DOUBLE_EQ(diophantine_constant(w, 1.0, 60), best);
}

TEST(Independence, WitnessIsNamed) {
  try {
    check_independence(flow({1.0, 0.25}), 10);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,-4)"), std::string::npos) << e.what();
  }
}

TEST(Scale, BoundaryAndBrackets) {
  const double gamma = 0.4;
  EXPECT_EQ(scale_of_value(gamma, gamma), 0);
  EXPECT_EQ(scale_of_value(0.6 * std::ldexp(gamma, -3), gamma), 4);
  EXPECT_EQ(scale_of_value(std::ldexp(gamma, -3), gamma), 3);
  EXPECT_EQ(scale_of(Mode{0, 0}, flow({1.0, 0.5}), gamma), -1);
}

TEST(Scale, IsAPartition) {
  RotationVector w = golden_map();
  const double gamma = 0.38;
  for (int v = 1; v <= 500; ++v) {
    int n = scale_of(Mode{v}, w, gamma);
    double x = divisor_size(w, Mode{v});
    if (n == 0) {
      EXPECT_GE(x, gamma);
    } else {
      EXPECT_GE(x, std::ldexp(gamma, -n));
      EXPECT_LT(x, std::ldexp(gamma, -(n - 1)));
    }
  }
}

TEST(Bryuno, SmallQuotientsCanLowerB) {
  CFSpec two{{1, 1, 2}, {1}};
  EXPECT_LT(bryuno_function(from_cf(two), 40).value, bryuno_function(golden_map(), 40).value);
}
