#include "rapt/rff.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace rapt;

TEST(SampleRff, DeterministicFromSeed) {
  const auto a = sample_rff(16, 123);
  const auto b = sample_rff(16, 123);
  EXPECT_EQ(a.r.omegas, b.r.omegas);
  EXPECT_EQ(a.r.phis, b.r.phis);
  EXPECT_EQ(a.s.omegas, b.s.omegas);
  EXPECT_EQ(a.s.phis, b.s.phis);
}

TEST(SampleRff, BanksAreDistinct) {
  const auto p = sample_rff(8, 5);
  EXPECT_NE(p.r.omegas, p.s.omegas);
}

TEST(SampleRff, OmegaMomentsMatchStandardNormal) {
  const auto p = sample_rff(100000, 7);
  double mean = 0.0;
  for (double w : p.r.omegas) mean += w;
  mean /= p.r.omegas.size();
  double var = 0.0;
  for (double w : p.r.omegas) var += (w - mean) * (w - mean);
  var /= p.r.omegas.size();
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SampleRff, PhisInRange) {
  const auto p = sample_rff(100000, 9);
  for (const auto* bank : {&p.r, &p.s}) {
    for (double phi : bank->phis) {
      EXPECT_GE(phi, 0.0);
      EXPECT_LT(phi, 2.0 * std::numbers::pi);
    }
  }
}

TEST(ApplyRff, ZeroFrequencyZeroPhase) {
  RFFBank bank;
  bank.omegas = {0.0};
  bank.phis = {0.0};
  const auto v = apply_rff(bank, 3.7);
  EXPECT_NEAR(v[0], std::numbers::sqrt2, 1e-12);
}

TEST(ApplyRff, PiPhaseFlipsSign) {
  RFFBank bank;
  bank.omegas = {1.0};
  bank.phis = {std::numbers::pi};
  const auto v = apply_rff(bank, 0.0);
  EXPECT_NEAR(v[0], -std::numbers::sqrt2, 1e-12);
}

TEST(ApplyRff, BoundedBySqrt2) {
  const auto p = sample_rff(64, 31);
  for (double x : {-5.0, -1.0, 0.0, 0.3, 2.0, 100.0}) {
    for (double v : apply_rff(p.r, x)) {
      EXPECT_LE(std::abs(v), std::numbers::sqrt2 + 1e-12);
    }
  }
}
