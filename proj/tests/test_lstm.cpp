#include <gtest/gtest.h>

#include <cmath>

#include "earmotion/lstm.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace earmotion;
namespace nn = earmotion::nn;

namespace {

nn::Mat<double> random_input(int d, int t, Rng& rng) {
  nn::Mat<double> x(d, t);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

std::vector<std::vector<double>> rows_of(const nn::Mat<double>& x) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index t = 0; t < x.cols(); ++t)
    for (Eigen::Index d = 0; d < x.rows(); ++d) out[t].push_back(x(d, t));
  return out;
}

/// Random weights spread wider than the default init so gates saturate differently.
nn::LstmParams<double> random_params(const nn::NetShape& shape, Rng& rng, double scale) {
  auto p = nn::LstmParams<double>::zeros(shape);
  for (auto s : p.tensors())
    for (auto& v : s) v = rng.uniform(-scale, scale);
  return p;
}

}  // namespace

TEST(Lstm, ZeroParametersGiveOneHalf) {
  const nn::NetShape shape{768, 16, 2};
  const auto p = nn::LstmParams<double>::zeros(shape);
  Rng rng(1);
  const auto x = random_input(768, 7, rng);
  EXPECT_EQ(nn::forward(x, p, nullptr, nullptr), 0.5);
}

TEST(Lstm, OutputIsAProbability) {
  Rng rng(2);
  const nn::NetShape shape{768, 32, 3};
  const auto p = nn::init_params<double>(shape, rng);
  for (int t : {1, 5, 20}) {
    const double y = nn::forward(random_input(768, t, rng), p, nullptr, nullptr);
    EXPECT_GT(y, 0.0);
    EXPECT_LT(y, 1.0);
  }
}

TEST(Lstm, HandComputedSingleUnit) {
  // one layer, H = 1, D = 1, inputs 1 then -1
  auto p = nn::LstmParams<double>::zeros({1, 1, 1});
  auto& L = p.layers[0];
  L.w_in << 0.5, -0.3, 0.8, 0.1;
  L.w_rec << 0.2, 0.4, -0.6, 0.7;
  L.bias << 0.1, 1.0, 0.0, -0.2;
  p.fc_weight << 1.5;
  p.fc_bias = -0.25;
  auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
  double h = 0, c = 0;
  for (double x : {1.0, -1.0}) {
    const double i = sig(0.5 * x + 0.2 * h + 0.1);
    const double f = sig(-0.3 * x + 0.4 * h + 1.0);
    const double g = std::tanh(0.8 * x - 0.6 * h);
    const double o = sig(0.1 * x + 0.7 * h - 0.2);
    c = f * c + i * g;
    h = o * std::tanh(c);
  }
  const double expected = sig(1.5 * h - 0.25);
  nn::Mat<double> x(1, 2);
  x << 1.0, -1.0;
  EXPECT_NEAR(nn::forward(x, p, nullptr, nullptr), expected, 1e-12);
}

TEST(Lstm, MatchesPlainLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const nn::NetShape shape{5, 3 + trial % 3, 1 + trial % 3};
    const auto p = random_params(shape, rng, 1.0);
    const auto x = random_input(5, 1 + trial, rng);
    EXPECT_NEAR(nn::forward(x, p, nullptr, nullptr), oracle::lstm_probability(rows_of(x), p), 1e-12);
    const auto masks = nn::DropoutMasks<double>::draw(shape, x.cols(), 0.3, rng);
    EXPECT_NEAR(nn::forward(x, p, &masks, nullptr), oracle::lstm_probability(rows_of(x), p, &masks), 1e-12);
  }
}

TEST(Lstm, FloatAgreesWithDouble) {
  Rng rng(4);
  const nn::NetShape shape{32, 8, 2};
  const auto p = nn::init_params<double>(shape, rng);
  const auto x = random_input(32, 6, rng);
  const nn::Mat<float> xf = x.cast<float>();
  EXPECT_NEAR(nn::forward(xf, p.cast<float>(), nullptr, nullptr), nn::forward(x, p, nullptr, nullptr), 1e-5);
}

TEST(Lstm, DimensionMismatchRejected) {
  const auto p = nn::LstmParams<double>::zeros({8, 4, 2});
  EXPECT_ERRC(nn::forward(nn::Mat<double>::Zero(9, 3), p, nullptr, nullptr), Errc::dimension_mismatch);
}

TEST(Lstm, InitialisationBounds) {
  Rng rng(5);
  const nn::NetShape shape{10, 16, 2};
  const auto p = nn::init_params<double>(shape, rng);
  for (const auto& l : p.layers) {
    EXPECT_LE(l.w_in.cwiseAbs().maxCoeff(), 0.25);
    EXPECT_LE(l.w_rec.cwiseAbs().maxCoeff(), 0.25);
    EXPECT_EQ(l.bias.segment(16, 16), nn::Vec<double>::Ones(16));
    EXPECT_EQ(l.bias.head(16), nn::Vec<double>::Zero(16));
    EXPECT_EQ(l.bias.tail(32), nn::Vec<double>::Zero(32));
  }
  EXPECT_EQ(p.parameter_count(), static_cast<std::size_t>(64 * 10 + 64 * 16 + 64 + 64 * 16 + 64 * 16 + 64 + 16 + 1));
}

TEST(Lstm, DropoutMasksAreInverted) {
  Rng rng(6);
  const auto m = nn::DropoutMasks<double>::draw({4, 50, 3}, 40, 0.2, rng);
  ASSERT_EQ(m.masks.size(), 2u);
  double sum = 0;
  for (const auto& mat : m.masks)
    for (Eigen::Index i = 0; i < mat.size(); ++i) {
      const double v = mat.data()[i];
      EXPECT_TRUE(v == 0.0 || v == 1.25);
      sum += v;
    }
  EXPECT_NEAR(sum / (2 * 50 * 40), 1.0, 0.05);
}

TEST(Bce, KnownValues) {
  EXPECT_NEAR(nn::bce(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(nn::bce(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(nn::bce(1.0 - 1e-12, 1), 0.0, 1e-6);
  EXPECT_NEAR(nn::bce(0.1, 1), 2.302585, 1e-6);
  EXPECT_TRUE(std::isfinite(nn::bce(0.0, 1)));
  EXPECT_TRUE(std::isfinite(nn::bce(1.0, 0)));
}

TEST(Gradients, MatchFiniteDifferences) {
  Rng rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    const nn::NetShape shape{8, 4, 2 + trial % 2};
    const auto p = random_params(shape, rng, 0.6);
    const auto x = random_input(8, 5, rng);
    const auto r = oracle::gradient_check(x, p, nullptr, trial % 2);
    EXPECT_LT(r.max_relative_error, 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, MatchFiniteDifferencesWithDropout) {
  Rng rng(8);
  for (int trial = 0; trial < 4; ++trial) {
    const nn::NetShape shape{8, 4, 3};
    const auto p = random_params(shape, rng, 0.6);
    const auto x = random_input(8, 5, rng);
    const auto masks = nn::DropoutMasks<double>::draw(shape, 5, 0.2, rng);
    EXPECT_LT(oracle::gradient_check(x, p, &masks, 1).max_relative_error, 1e-4);
  }
}

TEST(Gradients, BiasGradientAtZeroIsResidual) {
  const nn::NetShape shape{3, 2, 2};
  const auto p = nn::LstmParams<double>::zeros(shape);
  Rng rng(9);
  const auto x = random_input(3, 4, rng);
  for (int y : {0, 1}) {
    nn::ForwardCache<double> cache;
    nn::forward(x, p, nullptr, &cache);
    auto g = nn::LstmParams<double>::zeros(shape);
    const double loss = nn::backward(cache, p, nullptr, y, g);
    EXPECT_NEAR(loss, std::log(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(g.fc_bias, 0.5 - y);
  }
}

TEST(Gradients, SingleStepIsFinite) {
  Rng rng(10);
  const nn::NetShape shape{8, 4, 2};
  const auto p = random_params(shape, rng, 0.6);
  const auto x = random_input(8, 1, rng);
  nn::ForwardCache<double> cache;
  nn::forward(x, p, nullptr, &cache);
  auto g = nn::LstmParams<double>::zeros(shape);
  nn::backward(cache, p, nullptr, 1, g);
  EXPECT_TRUE(g.all_finite());
  EXPECT_EQ(g.layers[0].w_rec, nn::Mat<double>::Zero(16, 4));
  EXPECT_LT(oracle::gradient_check(x, p, nullptr, 1).max_relative_error, 1e-4);
}

TEST(Gradients, AccumulateAcrossCalls) {
  Rng rng(11);
  const nn::NetShape shape{4, 3, 2};
  const auto p = random_params(shape, rng, 0.5);
  const auto x = random_input(4, 3, rng);
  nn::ForwardCache<double> cache;
  nn::forward(x, p, nullptr, &cache);
  auto once = nn::LstmParams<double>::zeros(shape), twice = once;
  nn::backward(cache, p, nullptr, 1, once);
  nn::backward(cache, p, nullptr, 1, twice);
  nn::backward(cache, p, nullptr, 1, twice);
  EXPECT_NEAR(twice.fc_bias, 2 * once.fc_bias, 1e-15);
  EXPECT_TRUE(twice.layers[0].w_in.isApprox(2 * once.layers[0].w_in));
}
