#include "vpe/simulate.hpp"

#include "gtest/gtest.h"
#include "vpe/bench.hpp"

namespace vpe {

void PrintTo(Policy p, std::ostream* os) { *os << (p == Policy::CorruptMin ? "corrupt-min" : "random-consistent"); }

namespace {

TEST(SimulateTest, CorruptMinMatchesClosedForm) {
  SimulationConfig cfg;
  cfg.degree = 4;
  cfg.eta = 2;
  cfg.c_eta = 4;
  cfg.strategy = WrongClaim{1, Policy::CorruptMin, 0};
  cfg.trials = 20000;
  cfg.seed = 2024;
  auto rep = simulate(cfg);
  EXPECT_EQ(rep.r, 2u);
  EXPECT_EQ(rep.m, 4u);
  EXPECT_EQ(rep.experiments, 80000u);
  EXPECT_NEAR(rep.experiment_rate(), 7.0 / 16, 0.02);
  EXPECT_NEAR(rep.protocol_rate(), std::pow(7.0 / 16, 4), 0.01);
  EXPECT_DOUBLE_EQ(rep.soundness_bound(), 0.75);
  EXPECT_DOUBLE_EQ(rep.tight_bound(), 7.0 / 16);
  EXPECT_LE(rep.experiment_rate(), rep.soundness_bound());
  EXPECT_LT(rep.protocol_rate(), 0.5);
  EXPECT_LE(rep.experiment_sigma(), 0.005);
}

TEST(SimulateTest, DeterministicAndSchedulingIndependent) {
  SimulationConfig cfg;
  cfg.degree = 16;
  cfg.eta = 2;
  cfg.c_eta = 3;
  cfg.strategy = WrongClaim{4, Policy::RandomConsistent, 0};
  cfg.trials = 1500;
  cfg.seed = 9;
  auto a = simulate(cfg);
  cfg.threads = 3;
  auto b = simulate(cfg);
  EXPECT_EQ(a.experiment_accepts, b.experiment_accepts);
  EXPECT_EQ(a.protocol_accepts, b.protocol_accepts);
  EXPECT_EQ(a.to_text(), b.to_text());
}

TEST(SimulateTest, HonestAlwaysAccepted) {
  SimulationConfig cfg;
  cfg.degree = 16;
  cfg.strategy = HonestStrategy{};
  cfg.trials = 200;
  auto rep = simulate(cfg);
  EXPECT_EQ(rep.protocol_accepts, 200u);
  EXPECT_EQ(rep.experiment_accepts, rep.experiments);
}

struct Case {
  u64 d, eta, ceta;
};

void PrintTo(const Case& c, std::ostream* os) { *os << "d" << c.d << "_eta" << c.eta << "_ceta" << c.ceta; }

class BoundMatrix : public ::testing::TestWithParam<std::tuple<Case, Policy>> {};

TEST_P(BoundMatrix, NeverAboveSoundnessBound) {
  auto [c, policy] = GetParam();
  SimulationConfig cfg;
  cfg.degree = c.d;
  cfg.eta = c.eta;
  cfg.c_eta = c.ceta;
  cfg.strategy = WrongClaim{1, policy, 0};
  cfg.trials = 1000;
  cfg.seed = c.d * 100 + c.ceta;
  cfg.modulus = 97;
  auto rep = simulate(cfg);
  EXPECT_LE(rep.experiment_rate(), rep.soundness_bound() + 3 * rep.experiment_sigma()) << rep.to_text();
  if (policy == Policy::CorruptMin) {
    EXPECT_NEAR(rep.experiment_rate(), rep.tight_bound(), 5 * rep.experiment_sigma() + 1e-9) << rep.to_text();
  }
}

INSTANTIATE_TEST_SUITE_P(Matrix, BoundMatrix,
                         ::testing::Combine(::testing::Values(Case{4, 2, 3}, Case{4, 2, 4}, Case{16, 2, 3},
                                                              Case{16, 4, 8}, Case{27, 3, 4}, Case{64, 4, 5}),
                                            ::testing::Values(Policy::CorruptMin, Policy::RandomConsistent)),
                         [](const auto& info) {
                           const Case& c = std::get<0>(info.param);
                           const Policy policy = std::get<1>(info.param);
                           return "d" + std::to_string(c.d) + "_eta" + std::to_string(c.eta) + "_ceta" +
                                  std::to_string(c.ceta) + (policy == Policy::CorruptMin ? "_min" : "_random");
                         });

TEST(SimulateTest, Guards) {
  SimulationConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(simulate(cfg), ValidationError);
  cfg.trials = 10;
  cfg.degree = 1 << 12;
  EXPECT_THROW(simulate(cfg), ValidationError);
}

TEST(BenchTest, ScalingRatios) {
  auto rep = bench({16, 32, 64, 128, 256}, 2, 4, 5);
  ASSERT_EQ(rep.rows.size(), 5u);
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    EXPECT_TRUE(b.accepted);
    EXPECT_NEAR(OpCountReport::ratio(b.init.mul, a.init.mul), 4.0, 1.2);
    EXPECT_NEAR(OpCountReport::ratio(b.prover.mul, a.prover.mul), 4.0, 1.2);
  }
  for (const auto& row : rep.rows) EXPECT_LE(row.verifier_per_round(), 4.0 * 2);
  EXPECT_NE(rep.to_text().find("ver/(m*r)"), std::string::npos);
  EXPECT_THROW(bench({24}, 2, 4, 1), ValidationError);
}

}  // namespace
}  // namespace vpe
