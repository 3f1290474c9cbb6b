#include <gtest/gtest.h>

#include <cmath>

#include "fedams/client.hpp"
#include "fedams/errors.hpp"

using fedams::LocalRunConfig;
using fedams::Objective;
using fedams::ParamVector;

namespace {

// F(x) = 0.5 x^2 for one client: a single identity row with target 0.
Objective half_square() {
  fedams::ClientDataset c;
  c.features = 1;
  c.design = {1.0};
  c.targets = {0.0};
  return Objective::from_datasets({}, {c});
}

fedams::RandomStream stream() { return fedams::RandomStream(1, {fedams::StreamPurpose::local_sgd, 0, 1}); }

}  // namespace

TEST(LocalSgd, GeometricContraction) {
  auto obj = half_square();
  auto rng = stream();
  auto delta = fedams::local_sgd(obj, 0, {1.0}, {3, 0.1, 1}, rng);
  EXPECT_NEAR(delta[0], std::pow(0.9, 3) - 1.0, 1e-15);
  EXPECT_NEAR(delta[0], -0.271, 1e-15);
}

TEST(LocalSgd, SingleDeterministicStep) {
  fedams::ObjectiveSpec s;
  s.dim = 4;
  s.num_clients = 2;
  s.heterogeneity = 1;
  s.samples_per_client = 12;
  auto obj = Objective::build(s);
  ParamVector x{1, -1, 0.5, 2};
  auto rng = stream();
  auto delta = fedams::local_sgd(obj, 1, x, {1, 0.05, 12}, rng);
  auto g = obj.client_gradient(1, x);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(delta[j], -0.05 * g[j]);

  auto rng2 = stream();
  auto delta2 = fedams::local_sgd(obj, 1, x, {1, 0.1, 12}, rng2);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(delta2[j], 2 * delta[j], 1e-15);
}

TEST(LocalSgd, ClippedStepsRespectBound) {
  fedams::ObjectiveSpec s;
  s.dim = 8;
  s.num_clients = 3;
  s.heterogeneity = 5;
  s.noise = 2;
  s.clip_threshold = 0.5;
  auto obj = Objective::build(s);
  LocalRunConfig cfg{7, 0.2, 2};
  for (std::uint64_t t = 0; t < 20; ++t) {
    fedams::RandomStream rng(3, {fedams::StreamPurpose::local_sgd, t % 3, t});
    auto delta = fedams::local_sgd(obj, t % 3, ParamVector(8, 3.0), cfg, rng);
    EXPECT_TRUE(fedams::delta_norm_check(delta, cfg, 0.5));
  }
}

TEST(DeltaNormCheck, TightAndZeroCases) {
  LocalRunConfig cfg{1, 0.1, 1};
  EXPECT_TRUE(fedams::delta_norm_check({0.1 * 0.6, 0.1 * 0.8}, cfg, 1.0));
  EXPECT_FALSE(fedams::delta_norm_check({0.2, 0.0}, cfg, 1.0));
  EXPECT_TRUE(fedams::delta_norm_check(ParamVector(3), cfg, 1.0));
}

TEST(LocalSgd, ZeroGradientGivesZeroDelta) {
  auto obj = half_square();
  auto rng = stream();
  EXPECT_EQ(fedams::local_sgd(obj, 0, {0.0}, {5, 0.3, 1}, rng), ParamVector{0.0});
}

TEST(LocalRunConfig, Validation) {
  EXPECT_THROW((LocalRunConfig{0, 0.1, 1}).validate(), fedams::ConfigError);
  EXPECT_THROW((LocalRunConfig{1, 0.0, 1}).validate(), fedams::ConfigError);
  EXPECT_THROW((LocalRunConfig{1, 0.1, 0}).validate(), fedams::ConfigError);
}
