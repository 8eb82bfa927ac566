#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "platoon/commnet.hpp"
#include "platoon/params.hpp"
#include "platoon/rng.hpp"

using namespace platoon;
using comm::CommNetConfig;
using comm::CommNetPolicy;

namespace {

comm::JointObservation random_obs(int agents, int obs_dim, num::Rng& rng) {
  comm::JointObservation obs(static_cast<std::size_t>(agents));
  for (auto& o : obs) {
    o.resize(static_cast<std::size_t>(obs_dim));
    for (double& v : o) v = rng.uniform(-1.0, 1.0);
  }
  return obs;
}

}  // namespace

TEST(CommMean, PairSwapsHiddenStates) {
  const std::vector<num::Vector> h{{1.0, 2.0}, {3.0, -1.0}};
  EXPECT_EQ(comm::comm_mean(h, 0), (num::Vector{3.0, -1.0}));
  EXPECT_EQ(comm::comm_mean(h, 1), (num::Vector{1.0, 2.0}));
}

TEST(CommMean, ThreeAgentAverage) {
  const std::vector<num::Vector> h{{1.0}, {2.0}, {3.0}};
  EXPECT_DOUBLE_EQ(comm::comm_mean(h, 0)[0], 2.5);
  EXPECT_DOUBLE_EQ(comm::comm_mean(h, 1)[0], 2.0);
  EXPECT_DOUBLE_EQ(comm::comm_mean(h, 2)[0], 1.5);
}

TEST(CommMean, IdenticalHiddenStatesAreFixedPoint) {
  const std::vector<num::Vector> h(5, num::Vector{0.4, -0.7});
  for (std::size_t i = 0; i < h.size(); ++i)
    EXPECT_EQ(comm::comm_mean(h, i), h[0]);
}

TEST(CommMean, SingleAgentGetsZeroVector) {
  const std::vector<num::Vector> h{{1.0, 2.0, 3.0}};
  EXPECT_EQ(comm::comm_mean(h, 0), (num::Vector{0.0, 0.0, 0.0}));
}

TEST(CommMean, HandFormulaOnSeveralSizes) {
  num::Rng rng(3);
  for (int n : {2, 3, 5}) {
    std::vector<num::Vector> h(static_cast<std::size_t>(n));
    for (auto& v : h) {
      v.resize(4);
      for (double& x : v) x = rng.uniform(-2.0, 2.0);
    }
    for (int i = 0; i < n; ++i) {
      const auto c = comm::comm_mean(h, static_cast<std::size_t>(i));
      for (std::size_t t = 0; t < 4; ++t) {
        double expect = 0.0;
        for (int j = 0; j < n; ++j)
          if (j != i) expect += h[static_cast<std::size_t>(j)][t];
        expect /= (n - 1);
        EXPECT_NEAR(c[t], expect, 1e-12);
      }
    }
  }
}

TEST(CommMean, SumOfMessagesMatchesSumOfStates) {
  // For n = 2 the identity is exact; each state appears once.
  const std::vector<num::Vector> h{{0.3, 1.1}, {-0.2, 0.9}};
  const auto c0 = comm::comm_mean(h, 0);
  const auto c1 = comm::comm_mean(h, 1);
  for (std::size_t t = 0; t < 2; ++t)
    EXPECT_DOUBLE_EQ(c0[t] + c1[t], h[0][t] + h[1][t]);
}

TEST(Forward, IdenticalObservationsGiveIdenticalDistributions) {
  num::Rng rng(5);
  const CommNetConfig cfg{3, 4, 8, 2, 5};
  for (int trial = 0; trial < 50; ++trial) {
    CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
    // Nontrivial decoder so the distributions are not uniform.
    for (double& v : policy.decoder.values()) v = rng.uniform(-1.0, 1.0);
    num::Vector one(4);
    for (double& v : one) v = rng.uniform(-1.0, 1.0);
    const comm::JointObservation obs(3, one);
    const auto dists = comm::forward(policy, obs);
    EXPECT_EQ(dists[0], dists[1]);
    EXPECT_EQ(dists[1], dists[2]);
  }
}

TEST(Forward, PermutationEquivariantBitForBit) {
  num::Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(4));  // 2..5 agents
    CommNetConfig cfg{n, 3, 6, 2, 4};
    CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
    for (double& v : policy.decoder.values()) v = rng.uniform(-1.0, 1.0);
    const auto obs = random_obs(n, 3, rng);

    std::vector<std::size_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.uniform_int(i)]);

    comm::JointObservation permuted(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i) permuted[i] = obs[perm[i]];

    const auto base = comm::forward(policy, obs);
    const auto shuffled = comm::forward(policy, permuted);
    for (std::size_t i = 0; i < perm.size(); ++i)
      ASSERT_EQ(shuffled[i], base[perm[i]]);
  }
}

TEST(Forward, ZeroWeightsGiveUniformDistributions) {
  CommNetConfig cfg{2, 3, 4, 2, 5};
  num::Rng rng(9);
  CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
  for (double& v : policy.encoder.values()) v = 0.0;
  for (auto& m : policy.self_weight)
    for (double& v : m.values()) v = 0.0;
  for (auto& m : policy.comm_weight)
    for (double& v : m.values()) v = 0.0;
  const auto dists = comm::forward(policy, random_obs(2, 3, rng));
  for (const auto& d : dists)
    for (double p : d) EXPECT_DOUBLE_EQ(p, 0.2);
}

TEST(Forward, OutputsAreProbabilityVectors) {
  num::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(4));
    CommNetConfig cfg{n, 2, 5, 1 + static_cast<int>(rng.uniform_int(3)), 3};
    CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
    for (double& v : policy.decoder.values()) v = rng.uniform(-2.0, 2.0);
    const auto dists = comm::forward(policy, random_obs(n, 2, rng));
    for (const auto& d : dists) {
      double sum = 0.0;
      for (double p : d) {
        EXPECT_GE(p, 0.0);
        sum += p;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Forward, DimensionMismatchThrows) {
  CommNetConfig cfg{2, 3, 4, 1, 2};
  num::Rng rng(13);
  const CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
  EXPECT_THROW(comm::forward(policy, comm::JointObservation{{1.0, 2.0, 3.0}}),
               std::invalid_argument);
  EXPECT_THROW(
      comm::forward(policy, comm::JointObservation{{1.0, 2.0}, {1.0, 2.0}}),
      std::invalid_argument);
}

TEST(SampleJointAction, DegenerateCategorical) {
  num::Rng rng(15);
  const std::vector<num::Vector> dists{{0.0, 1.0, 0.0}};
  const auto joint = comm::sample_joint_action(dists, rng);
  EXPECT_EQ(joint.actions[0], 1);
  EXPECT_DOUBLE_EQ(joint.log_probs[0], 0.0);
}

TEST(SampleJointAction, UniformFrequencies) {
  num::Rng rng(17);
  const std::vector<num::Vector> dists{{0.25, 0.25, 0.25, 0.25}};
  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 100000; ++i)
    ++counts[comm::sample_joint_action(dists, rng).actions[0]];
  for (int a = 0; a < 4; ++a)
    EXPECT_NEAR(counts[a] / 100000.0, 0.25, 0.01);
}

TEST(SampleJointAction, FixedSeedReproduces) {
  const std::vector<num::Vector> dists{{0.5, 0.5}, {0.1, 0.9}};
  num::Rng a(19), b(19);
  for (int i = 0; i < 200; ++i) {
    EXPECT_EQ(comm::sample_joint_action(dists, a).actions,
              comm::sample_joint_action(dists, b).actions);
  }
}

TEST(Reinforce, ZeroAdvantageBatchLeavesParametersUnchanged) {
  CommNetConfig cfg{2, 2, 4, 2, 3};
  num::Rng rng(21);
  CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
  const num::ParamStore before = comm::to_params(policy);

  // Two one-step trajectories with identical rewards: every return equals
  // the batch baseline.
  comm::Trajectory t1(1), t2(1);
  t1[0] = {random_obs(2, 2, rng), {0, 1}, 1.0, {0.0, 0.0}};
  t2[0] = {random_obs(2, 2, rng), {2, 0}, 1.0, {0.0, 0.0}};
  const std::vector<comm::Trajectory> batch{t1, t2};
  comm::reinforce_update(policy, batch, 0.5, 0.99);

  const num::ParamStore after = comm::to_params(policy);
  for (const auto& [name, p] : before) EXPECT_EQ(p.value, after.at(name).value);
}

TEST(Reinforce, GradientMatchesFiniteDifferences) {
  num::Rng rng(23);
  int done = 0;
  while (done < 100) {
    const int n = 2 + static_cast<int>(rng.uniform_int(2));
    CommNetConfig cfg{n, 3, 4, 2, 3};
    CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
    for (double& v : policy.decoder.values()) v = rng.uniform(-0.5, 0.5);

    // Fixed trajectories with sampled actions and varying rewards.
    std::vector<comm::Trajectory> batch(2);
    for (auto& traj : batch) {
      traj.resize(1 + rng.uniform_int(3));
      for (auto& step : traj) {
        step.obs = random_obs(n, 3, rng);
        const auto dists = comm::forward(policy, step.obs);
        auto joint = comm::sample_joint_action(dists, rng);
        step.actions = std::move(joint.actions);
        step.log_probs = std::move(joint.log_probs);
        step.reward = rng.uniform(-1.0, 1.0);
      }
    }
    const double gamma = 0.9;

    num::ParamStore store = comm::to_params(policy);
    store.zero_grads();
    comm::reinforce_gradient(policy, batch, gamma, store);

    CommNetPolicy probe = policy;
    auto fd = num::finite_diff_grad(
        [&]() {
          comm::load_params(probe, store);
          return comm::reinforce_surrogate(probe, batch, gamma);
        },
        store, 1e-5);

    EXPECT_LT(testutil::global_rel_error(store, fd), 1e-4) << "case " << done;
    ++done;
  }
}

TEST(Reinforce, SurrogateLossConsistentWithGradientPath) {
  num::Rng rng(29);
  CommNetConfig cfg{2, 2, 4, 1, 3};
  CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
  std::vector<comm::Trajectory> batch(1);
  batch[0].resize(2);
  for (auto& step : batch[0]) {
    step.obs = random_obs(2, 2, rng);
    const auto dists = comm::forward(policy, step.obs);
    auto joint = comm::sample_joint_action(dists, rng);
    step.actions = std::move(joint.actions);
    step.reward = rng.uniform(0.0, 2.0);
  }
  num::ParamStore store = comm::to_params(policy);
  const auto diag = comm::reinforce_gradient(policy, batch, 0.99, store);
  EXPECT_NEAR(diag.surrogate_loss, comm::reinforce_surrogate(policy, batch, 0.99),
              1e-12);
}

TEST(Checkpoints, ParamRoundTripPreservesPolicy) {
  num::Rng rng(31);
  CommNetConfig cfg{3, 4, 6, 2, 5};
  CommNetPolicy policy = CommNetPolicy::init(cfg, rng);
  num::ParamStore store = comm::to_params(policy);
  CommNetPolicy copy = CommNetPolicy::init(cfg, rng);  // different weights
  comm::load_params(copy, store);
  const auto obs = random_obs(3, 4, rng);
  EXPECT_EQ(comm::forward(policy, obs), comm::forward(copy, obs));
}
