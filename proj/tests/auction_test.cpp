#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "platoon/auction.hpp"
#include "platoon/params.hpp"
#include "platoon/rng.hpp"

using namespace platoon;
using auction::MonotonicNet;
using testutil::profile_margins_ok;

namespace {

MonotonicNet random_net(num::Rng& rng, int max_groups = 3, int max_units = 4,
                        bool shared = true, int bidders = 1) {
  const int K = 1 + static_cast<int>(rng.uniform_int(static_cast<std::size_t>(max_groups)));
  const int J = 1 + static_cast<int>(rng.uniform_int(static_cast<std::size_t>(max_units)));
  return MonotonicNet::random_init(K, J, shared, bidders, rng);
}

}  // namespace

TEST(TransformBids, IdentityNet) {
  const auto net = MonotonicNet::identity();
  const auto out = auction::transform_bids(net, {0.3, 0.9});
  EXPECT_DOUBLE_EQ(out[0], 0.3);
  EXPECT_DOUBLE_EQ(out[1], 0.9);
}

TEST(TransformBids, UniformVirtualValue) {
  const auto net = MonotonicNet::uniform01_preset();
  const auto out = auction::transform_bids(net, {0.75});
  EXPECT_NEAR(out[0], 0.5, 1e-15);
}

TEST(TransformBids, MonotoneForAnyPositiveWeights) {
  num::Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto net = random_net(rng);
    double v1 = rng.uniform(0.0, 2.0), v2 = rng.uniform(0.0, 2.0);
    if (v1 > v2) std::swap(v1, v2);
    const double b1 = net.transform(v1), b2 = net.transform(v2);
    EXPECT_LE(b1, b2);
    if (v2 - v1 > 1e-9) EXPECT_LT(b1, b2);
  }
}

TEST(TransformBids, RejectsNegativeAndNonFiniteBids) {
  const auto net = MonotonicNet::identity();
  EXPECT_THROW(auction::transform_bids(net, {-0.1}), std::invalid_argument);
  EXPECT_THROW(auction::transform_bids(net, {std::nan("")}), std::invalid_argument);
  EXPECT_THROW(auction::transform_bids(net, {}), std::invalid_argument);
}

TEST(InverseTransform, IdentityNet) {
  const auto net = MonotonicNet::identity();
  EXPECT_DOUBLE_EQ(auction::inverse_transform(net, 0.42), 0.42);
}

TEST(InverseTransform, UniformReservePrice) {
  const auto net = MonotonicNet::uniform01_preset();
  EXPECT_NEAR(auction::inverse_transform(net, 0.0), 0.5, 1e-15);
}

TEST(InverseTransform, RoundTripOnRandomNets) {
  num::Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto net = random_net(rng);
    const double y = rng.uniform(-3.0, 3.0);
    EXPECT_NEAR(net.transform(net.inverse(y)), y, 1e-9);
    const double v = rng.uniform(0.0, 2.0);
    EXPECT_NEAR(net.inverse(net.transform(v)), v, 1e-9);
  }
}

TEST(Allocate, SymmetryWithDummy) {
  const auto g = auction::allocate({0.0, 0.0}, 7.0);
  ASSERT_EQ(g.size(), 3u);
  for (double v : g) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Allocate, DirectFormulaEvaluation) {
  const auto g = auction::allocate({1.0, 0.0}, 10.0);
  const double e10 = std::exp(10.0);
  EXPECT_NEAR(g[0], e10 / (e10 + 2.0), 1e-12);
}

TEST(Allocate, AllNegativeGoesToDummy) {
  const auto g = auction::allocate({-5.0, -7.0}, 100.0);
  EXPECT_GT(g[2], 1.0 - 1e-12);
}

TEST(Allocate, SoftConvergesToHardAsTemperatureGrows) {
  const std::vector<double> transformed{0.4, 0.401, -0.2};
  double prev_gap = 2.0;
  for (double k : {1e2, 1e3, 1e4, 1e6}) {
    const auto g = auction::allocate(transformed, k);
    // unique max at index 1, separated by 1e-3
    double gap = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      gap = std::max(gap, std::abs(g[i] - (i == 1 ? 1.0 : 0.0)));
    EXPECT_LE(gap, prev_gap + 1e-15);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 1e-9);
}

TEST(PaymentRaw, SecondHighestInTransformedSpace) {
  const auto p0 = auction::payment_raw({0.7, 0.3});
  EXPECT_DOUBLE_EQ(p0[0], 0.3);
  EXPECT_DOUBLE_EQ(p0[1], 0.7);
}

TEST(PaymentRaw, ReluClampAtReserve) {
  const auto p0 = auction::payment_raw({-0.2, -0.5});
  EXPECT_DOUBLE_EQ(p0[0], 0.0);
  EXPECT_DOUBLE_EQ(p0[1], 0.0);
}

TEST(PaymentRaw, SingleBidderDummyFloor) {
  const auto p0 = auction::payment_raw({0.9});
  ASSERT_EQ(p0.size(), 1u);
  EXPECT_DOUBLE_EQ(p0[0], 0.0);
}

TEST(RunAuction, HardModeMyersonRule) {
  const auto net = MonotonicNet::uniform01_preset();
  const auto a = auction::run_auction(net, {0.8, 0.6}, 500.0,
                                      auction::AllocationMode::hard);
  ASSERT_TRUE(a.winner.has_value());
  EXPECT_EQ(*a.winner, 0);
  EXPECT_NEAR(a.payments[0], 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(a.payments[1], 0.0);
}

TEST(RunAuction, HardModeReserveBinds) {
  const auto net = MonotonicNet::uniform01_preset();
  const auto a = auction::run_auction(net, {0.8, 0.2}, 500.0,
                                      auction::AllocationMode::hard);
  ASSERT_TRUE(a.winner.has_value());
  EXPECT_EQ(*a.winner, 0);
  EXPECT_NEAR(a.payments[0], 0.5, 1e-12);
}

TEST(RunAuction, HardModeNoSale) {
  const auto net = MonotonicNet::uniform01_preset();
  const auto a = auction::run_auction(net, {0.4, 0.3}, 500.0,
                                      auction::AllocationMode::hard);
  EXPECT_FALSE(a.winner.has_value());
  EXPECT_DOUBLE_EQ(a.payments[0], 0.0);
  EXPECT_DOUBLE_EQ(a.payments[1], 0.0);
}

TEST(RunAuction, HardWinnerIndependentOfTemperature) {
  num::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto net = random_net(rng);
    auction::BidProfile bids(2 + rng.uniform_int(3));
    for (double& b : bids) b = rng.uniform(0.0, 1.0);
    const auto lo = auction::run_auction(net, bids, 1.0, auction::AllocationMode::hard);
    const auto hi = auction::run_auction(net, bids, 1000.0, auction::AllocationMode::hard);
    EXPECT_EQ(lo.winner, hi.winner);
  }
}

TEST(RunAuction, EqualBidsGetEqualAllocation) {
  num::Rng rng(9);
  const auto net = random_net(rng);
  const auto a = auction::run_auction(net, {0.6, 0.6, 0.6}, 50.0,
                                      auction::AllocationMode::soft);
  EXPECT_EQ(a.allocation[0], a.allocation[1]);
  EXPECT_EQ(a.allocation[1], a.allocation[2]);
}

TEST(RunAuction, HardModeIsIndividuallyRational) {
  num::Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const auto net = random_net(rng);
    auction::BidProfile bids(1 + rng.uniform_int(4));
    for (double& b : bids) b = rng.uniform(0.0, 1.5);
    const auto a = auction::run_auction(net, bids, 100.0,
                                        auction::AllocationMode::hard);
    if (a.winner) {
      EXPECT_LE(a.payments[static_cast<std::size_t>(*a.winner)],
                bids[static_cast<std::size_t>(*a.winner)] + 1e-9);
    }
    for (std::size_t i = 0; i < bids.size(); ++i)
      if (!a.winner || static_cast<int>(i) != *a.winner)
        EXPECT_DOUBLE_EQ(a.payments[i], 0.0);
  }
}

TEST(RevenueLoss, HandEvaluatedIdentityNet) {
  const auto net = MonotonicNet::identity();
  EXPECT_NEAR(auction::revenue_loss(net, {{1.0, 0.0}}, 500.0), 0.0, 1e-9);
  EXPECT_NEAR(auction::revenue_loss(net, {{1.0, 0.5}}, 500.0), -0.5, 1e-9);
}

TEST(RevenueLoss, BatchAveraged) {
  const auto net = MonotonicNet::identity();
  const double single = auction::revenue_loss(net, {{1.0, 0.5}}, 500.0);
  const double doubled =
      auction::revenue_loss(net, {{1.0, 0.5}, {1.0, 0.5}}, 500.0);
  EXPECT_NEAR(single, doubled, 1e-15);
}

TEST(RevenueLoss, GradientMatchesFiniteDifferences) {
  num::Rng rng(101);
  const double margin = 1e-3;
  int accepted = 0;
  while (accepted < 100) {
    const bool shared = rng.uniform() < 0.7;
    const int n = 2 + static_cast<int>(rng.uniform_int(2));
    MonotonicNet net = random_net(rng, 3, 4, shared, n);
    std::vector<auction::BidProfile> batch(1 + rng.uniform_int(3));
    for (auto& bids : batch) {
      bids.resize(static_cast<std::size_t>(n));
      for (double& b : bids) b = rng.uniform(0.0, 1.2);
    }
    bool ok = true;
    for (const auto& bids : batch)
      ok = ok && profile_margins_ok(net, bids, margin);
    if (!ok) continue;
    const double temp = rng.uniform() < 0.5 ? 1.0 : 5.0;

    num::ParamStore store = auction::to_params(net);
    store.zero_grads();
    auction::revenue_loss(net, batch, temp, &store);

    MonotonicNet probe = net;
    auto fd = num::finite_diff_grad(
        [&]() {
          auction::load_params(probe, store);
          return auction::revenue_loss(probe, batch, temp);
        },
        store);

    EXPECT_LT(testutil::global_rel_error(store, fd), 1e-4)
        << "trial " << accepted;
    ++accepted;
  }
}

TEST(TrainAuction, ZeroLearningRateFreezesParameters) {
  auction::AuctionTrainConfig cfg;
  cfg.bidders = 2;
  cfg.groups = 2;
  cfg.units = 3;
  cfg.learning_rate = 0.0;
  cfg.batch = 16;
  cfg.iterations = 10;
  cfg.seed = 77;
  const auction::ValuationSampler sampler(
      auction::ValuationDist::make_uniform(0.0, 1.0), 2, cfg.seed);

  num::Rng init_rng(cfg.seed);
  const MonotonicNet init = MonotonicNet::random_init(
      cfg.groups, cfg.units, cfg.shared, cfg.bidders, init_rng);
  const auto result = auction::train_auction(cfg, sampler);
  EXPECT_EQ(result.net.log_weight[0], init.log_weight[0]);
  EXPECT_EQ(result.net.bias[0], init.bias[0]);

  // Loss is a fixed function of the frozen parameters.
  const std::vector<auction::BidProfile> probe{{0.9, 0.4}, {0.2, 0.7}};
  EXPECT_DOUBLE_EQ(auction::revenue_loss(result.net, probe, cfg.temp_train),
                   auction::revenue_loss(init, probe, cfg.temp_train));
}

TEST(TrainAuction, ZeroIterationsReturnsInitialisedNet) {
  auction::AuctionTrainConfig cfg;
  cfg.bidders = 2;
  cfg.iterations = 0;
  const auction::ValuationSampler sampler(
      auction::ValuationDist::make_uniform(0.0, 1.0), 2, cfg.seed);
  const auto result = auction::train_auction(cfg, sampler);
  EXPECT_TRUE(result.metrics.empty());
  EXPECT_EQ(result.net.groups, cfg.groups);
}

// Training identifies the induced mechanism, not the transform's
// parametrisation: any increasing reparametrisation of the transform that
// fixes zero induces the same hard auction, so the objective pins the
// reserve and the payment rule rather than the pointwise shape of phi.
TEST(TrainAuction, LearnsTheUniformOptimalMechanism) {
  auction::AuctionTrainConfig cfg;
  cfg.bidders = 2;
  cfg.seed = 424;
  const auction::ValuationSampler sampler(
      auction::ValuationDist::make_uniform(0.0, 1.0), 2, cfg.seed);
  const auto result = auction::train_auction(cfg, sampler);

  // The analytic reserve for uniform[0,1] is 1/2.
  EXPECT_NEAR(result.net.inverse(0.0), 0.5, 0.05);

  // Induced sales and payments track the analytic rule.
  const auto neural = auction::as_mechanism(result.net);
  const auto oracle = mech::myerson_uniform01();
  num::Rng rng(777);
  int winner_match = 0;
  double mean_abs_dp = 0.0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const auction::BidProfile bids{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const auto a = neural(bids), b = oracle(bids);
    if (a.winner == b.winner) ++winner_match;
    for (int i = 0; i < 2; ++i)
      mean_abs_dp += std::abs(a.payments[static_cast<std::size_t>(i)] -
                              b.payments[static_cast<std::size_t>(i)]);
  }
  mean_abs_dp /= trials;
  EXPECT_GT(winner_match, static_cast<int>(0.97 * trials));
  EXPECT_LT(mean_abs_dp, 0.02);

  // Hard revenue within 2% of the analytic optimum.
  const auction::ValuationSampler eval(
      auction::ValuationDist::make_uniform(0.0, 1.0), 2, 9090);
  const auto net_rev = mech::monte_carlo_revenue(neural, eval, 200000);
  const auto oracle_rev = mech::monte_carlo_revenue(oracle, eval, 200000);
  EXPECT_NEAR(net_rev.mean, oracle_rev.mean, 0.02 * oracle_rev.mean);
}

TEST(TrainAuction, DeterministicPerSeed) {
  auction::AuctionTrainConfig cfg;
  cfg.bidders = 2;
  cfg.groups = 2;
  cfg.units = 2;
  cfg.iterations = 25;
  cfg.batch = 8;
  cfg.seed = 5;
  const auction::ValuationSampler sampler(
      auction::ValuationDist::make_uniform(0.0, 1.0), 2, cfg.seed);
  const auto a = auction::train_auction(cfg, sampler);
  const auto b = auction::train_auction(cfg, sampler);
  EXPECT_EQ(a.net.log_weight[0], b.net.log_weight[0]);
  EXPECT_EQ(a.net.bias[0], b.net.bias[0]);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
    EXPECT_EQ(a.metrics[i].revenue_hard, b.metrics[i].revenue_hard);
  }
}
