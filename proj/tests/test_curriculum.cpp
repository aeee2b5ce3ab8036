#include <gtest/gtest.h>

#include <cmath>

#include "cpt/curriculum.hpp"

namespace {

using namespace cpt;

CompetenceConfig make(double c0, double p, std::int64_t T, double beta_max = 1.0) {
  CompetenceConfig cfg;
  cfg.c0 = c0;
  cfg.p = p;
  cfg.max_steps = T;
  cfg.beta_max = beta_max;
  return cfg;
}

TEST(Competence, PinnedSquareRootValue) {
  // p=2, c0=0.1, T=2000, t=500: sqrt(500*(1-0.01)/2000 + 0.01) = sqrt(0.2575)
  const CompetenceConfig cfg = make(0.1, 2.0, 2000);
  EXPECT_NEAR(competence(500, cfg), std::sqrt(0.2575), 1e-12);
  EXPECT_NEAR(competence(500, cfg), 0.50744457825461098, 1e-12);
}

TEST(Competence, LinearFormWhenPIsOne) {
  const CompetenceConfig cfg = make(0.2, 1.0, 1000);
  for (std::int64_t t : {0, 1, 10, 250, 500, 999, 1000}) {
    const double linear = 0.2 + static_cast<double>(t) * (1.0 - 0.2) / 1000.0;
    EXPECT_NEAR(competence(t, cfg), std::min(1.0, linear), 1e-12) << "t=" << t;
  }
}

TEST(Competence, StartsAtC0) {
  for (double c0 : {0.01, 0.1, 0.5, 1.0})
    for (double p : {1.0, 2.0, 4.0})
      EXPECT_NEAR(competence(0, make(c0, p, 500)), c0, 1e-12);
}

TEST(Competence, ExactlyOneAtAndBeyondHorizon) {
  const CompetenceConfig cfg = make(0.01, 2.0, 777);
  EXPECT_EQ(competence(777, cfg), 1.0);
  EXPECT_EQ(competence(778, cfg), 1.0);
  EXPECT_EQ(competence(100000, cfg), 1.0);
}

TEST(Competence, NondecreasingOnDenseGrid) {
  for (double p : {1.0, 2.0, 4.0}) {
    const CompetenceConfig cfg = make(0.05, p, 300);
    double prev = -1.0;
    for (std::int64_t t = 0; t <= 600; ++t) {
      const double c = competence(t, cfg);
      EXPECT_GE(c, prev) << "p=" << p << " t=" << t;
      EXPECT_GT(c, 0.0);
      EXPECT_LE(c, 1.0);
      prev = c;
    }
  }
}

TEST(Competence, HigherPRampsFasterEarly) {
  // x^(1/p) grows with p for x in (0,1), so a larger exponent front-loads
  // the ramp: at t=100/1000 the quartic root sits well above the square root
  const std::int64_t t = 100;
  const double c2 = competence(t, make(0.01, 2.0, 1000));
  const double c4 = competence(t, make(0.01, 4.0, 1000));
  EXPECT_GT(c4, c2);
}

TEST(Competence, RejectsInvalidConfigAndNegativeStep) {
  EXPECT_THROW(competence(0, make(0.0, 2.0, 100)), config_error);
  EXPECT_THROW(competence(0, make(1.5, 2.0, 100)), config_error);
  EXPECT_THROW(competence(0, make(0.1, 0.5, 100)), config_error);
  EXPECT_THROW(competence(0, make(0.1, 2.0, 0)), config_error);
  EXPECT_THROW(competence(0, make(0.1, 2.0, 100, 1.5)), config_error);
  EXPECT_THROW(competence(0, make(0.1, 2.0, 100, -0.1)), config_error);
  EXPECT_THROW(competence(-1, make(0.1, 2.0, 100)), config_error);
}

TEST(BetaForEpoch, CapsAtBetaMax) {
  const CompetenceConfig cfg = make(0.1, 2.0, 100, 0.4);
  for (std::int64_t t : {0, 10, 50, 100, 200}) {
    const double b = beta_for_epoch(t, cfg);
    EXPECT_LE(b, 0.4);
    CompetenceConfig uncapped = cfg;
    uncapped.beta_max = 1.0;
    EXPECT_EQ(b, std::min(competence(t, uncapped), 0.4));
  }
  EXPECT_EQ(beta_for_epoch(100, cfg), 0.4);
}

}  // namespace
