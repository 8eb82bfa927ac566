#include <gtest/gtest.h>

#include <cmath>

#include "platoon/numeric.hpp"
#include "platoon/rng.hpp"

using namespace platoon;

TEST(AffineEval, IdentityCase) {
  num::Matrix I = num::Matrix::identity(2);
  num::Vector y = num::affine_eval(I, {1.0, 2.0}, {0.0, 0.0});
  EXPECT_EQ(y, (num::Vector{1.0, 2.0}));
}

TEST(AffineEval, ScalarAffine) {
  num::Matrix W(1, 1, 2.0);
  num::Vector y = num::affine_eval(W, {0.75}, {-1.0});
  ASSERT_EQ(y.size(), 1u);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(AffineEval, RowSum) {
  num::Matrix W(1, 2, 1.0);
  num::Vector y = num::affine_eval(W, {3.0, 4.0}, {0.0});
  EXPECT_DOUBLE_EQ(y[0], 7.0);
}

TEST(AffineEval, DimensionMismatchThrows) {
  num::Matrix W(2, 3);
  EXPECT_THROW(num::affine_eval(W, {1.0, 2.0}, {0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(num::affine_eval(W, {1.0, 2.0, 3.0}, {0.0}), std::invalid_argument);
}

TEST(Activation, ReluClampsNegatives) {
  num::Vector y = num::apply_activation(num::Activation::relu, {-0.5, 0.5});
  EXPECT_EQ(y, (num::Vector{0.0, 0.5}));
}

TEST(Activation, TanhOddAtOrigin) {
  EXPECT_DOUBLE_EQ(num::apply_activation(num::Activation::tanh, 0.0), 0.0);
}

TEST(Activation, SigmoidSymmetryPoint) {
  EXPECT_DOUBLE_EQ(num::apply_activation(num::Activation::sigmoid, 0.0), 0.5);
}

TEST(Activation, SlopesMatchDefinitions) {
  EXPECT_DOUBLE_EQ(num::activation_slope(num::Activation::relu, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(num::activation_slope(num::Activation::relu, -2.0), 0.0);
  EXPECT_DOUBLE_EQ(num::activation_slope(num::Activation::relu, 0.0), 0.0);
  const double t = std::tanh(0.3);
  EXPECT_NEAR(num::activation_slope(num::Activation::tanh, 0.3), 1.0 - t * t, 1e-15);
}

TEST(SoftmaxTemp, SymmetricInput) {
  for (double k : {0.5, 1.0, 1000.0}) {
    num::Vector g = num::softmax_temp({0.0, 0.0, 0.0}, k);
    for (double v : g) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  }
}

TEST(SoftmaxTemp, DirectFormulaEvaluation) {
  num::Vector g = num::softmax_temp({1.0, 0.0}, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(g[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(g[1], 1.0 / (e + 1.0), 1e-15);
}

TEST(SoftmaxTemp, LargeTemperatureApproachesArgmax) {
  num::Vector g = num::softmax_temp({1.0, 0.0}, 1000.0);
  EXPECT_GT(g[0], 1.0 - 1e-12);
  EXPECT_LT(g[1], 1e-12);
}

TEST(SoftmaxTemp, RejectsNonPositiveTemperature) {
  EXPECT_THROW(num::softmax_temp({1.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(num::softmax_temp({1.0}, -2.0), std::invalid_argument);
}

// Probability vector for all finite inputs, including magnitudes that would
// overflow a naive exponential.
TEST(SoftmaxTemp, ProbabilityVectorUnderExtremeInputs) {
  num::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(6);
    num::Vector x(n);
    for (double& v : x) v = rng.uniform(-700.0, 700.0);
    const double k = std::exp(rng.uniform(std::log(1e-2), std::log(1e3)));
    num::Vector g = num::softmax_temp(x, k);
    double sum = 0.0;
    for (double v : g) {
      EXPECT_GE(v, 0.0);
      ASSERT_TRUE(std::isfinite(v));
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(GroupMaxOfMin, SinglePieceIdentity) {
  num::Matrix w(1, 1, 1.0), theta(1, 1, 0.0);
  EXPECT_DOUBLE_EQ(num::group_max_of_min(0.3, w, theta).value, 0.3);
}

TEST(GroupMaxOfMin, HandEvaluatedTwoGroups) {
  // groups {2x - 1} and {x}
  num::Matrix w(2, 1), theta(2, 1);
  w(0, 0) = 2.0;
  theta(0, 0) = -1.0;
  w(1, 0) = 1.0;
  theta(1, 0) = 0.0;
  EXPECT_DOUBLE_EQ(num::group_max_of_min(0.4, w, theta).value, 0.4);
  EXPECT_DOUBLE_EQ(num::group_max_of_min(1.5, w, theta).value, 2.0);
}

TEST(GroupMaxOfMin, EmptyGroupThrows) {
  num::Matrix empty;
  EXPECT_THROW(num::group_max_of_min(0.0, empty, empty), std::invalid_argument);
}

TEST(GroupMaxOfMin, NonDecreasingWithPositiveWeights) {
  num::Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 1 + rng.uniform_int(4);
    const std::size_t J = 1 + rng.uniform_int(4);
    num::Matrix w(K, J), theta(K, J);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < J; ++j) {
        w(k, j) = std::exp(rng.uniform(-2.0, 2.0));
        theta(k, j) = rng.uniform(-2.0, 2.0);
      }
    double x1 = rng.uniform(-3.0, 3.0);
    double x2 = rng.uniform(-3.0, 3.0);
    if (x1 > x2) std::swap(x1, x2);
    EXPECT_LE(num::group_max_of_min(x1, w, theta).value,
              num::group_max_of_min(x2, w, theta).value);
  }
}

TEST(GroupMaxOfMin, TiesPickFirstAttainingIndex) {
  // Both groups evaluate to x at the crossing point.
  num::Matrix w(2, 1, 1.0), theta(2, 1, 0.0);
  const auto piece = num::group_max_of_min(0.9, w, theta);
  EXPECT_EQ(piece.group, 0u);
  EXPECT_EQ(piece.unit, 0u);
}

TEST(Rng, SeededStreamsReproduce) {
  num::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformStaysInRange) {
  num::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(2.0, 5.0);
    EXPECT_GE(u, 2.0);
    EXPECT_LT(u, 5.0);
  }
}

TEST(Rng, TruncatedExponentialRespectsCap) {
  num::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.truncated_exponential(2.0, 0.75);
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 0.75);
  }
}

TEST(Rng, SubstreamsDiffer) {
  num::Rng a = num::Rng::substream(9, 0);
  num::Rng b = num::Rng::substream(9, 1);
  EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(Rng, CategoricalMatchesWeights) {
  num::Rng rng(17);
  const num::Vector w{0.2, 0.0, 0.8};
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[rng.categorical(w)];
  EXPECT_EQ(counts[1], 0);
  EXPECT_NEAR(counts[0] / 20000.0, 0.2, 0.02);
  EXPECT_NEAR(counts[2] / 20000.0, 0.8, 0.02);
}
