#include <gtest/gtest.h>

#include <cmath>

#include "earmotion/optflow.hpp"
#include "earmotion/rng.hpp"
#include "earmotion/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace earmotion;

namespace {

Plane from_function(int rows, int cols, double (*f)(double, double)) {
  Plane p(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) p(r, c) = f(c, r);
  return p;
}

FlowField constant_field(int rows, int cols, double u, double v) {
  return {Plane(rows, cols, 1, u), Plane(rows, cols, 1, v)};
}

double mean_endpoint_error(const FlowField& f, double dx, double dy, int margin) {
  double sum = 0;
  int n = 0;
  for (int r = margin; r < f.rows() - margin; ++r)
    for (int c = margin; c < f.cols() - margin; ++c, ++n) sum += std::hypot(f.u(r, c) - dx, f.v(r, c) - dy);
  return sum / n;
}

}  // namespace

TEST(PolyExpansion, ConstantFrame) {
  const Plane p(20, 20, 1, 7.5);
  const auto e = polynomial_expansion(p, 7, 1.5);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) {
      EXPECT_NEAR(e.c(r, c), 7.5, 1e-9);
      EXPECT_NEAR(e.bx(r, c), 0, 1e-9);
      EXPECT_NEAR(e.by(r, c), 0, 1e-9);
      EXPECT_NEAR(e.axx(r, c), 0, 1e-9);
      EXPECT_NEAR(e.axy(r, c), 0, 1e-9);
      EXPECT_NEAR(e.ayy(r, c), 0, 1e-9);
    }
}

TEST(PolyExpansion, RampGivesLinearTerm) {
  const Plane p = from_function(24, 24, [](double x, double) { return 2 * x; });
  const auto e = polynomial_expansion(p, 11, 1.5);
  for (int r = 5; r < 19; ++r)
    for (int c = 5; c < 19; ++c) {
      EXPECT_NEAR(e.bx(r, c), 2.0, 1e-6);
      EXPECT_NEAR(e.by(r, c), 0.0, 1e-6);
      EXPECT_NEAR(e.axx(r, c), 0.0, 1e-6);
      EXPECT_NEAR(e.ayy(r, c), 0.0, 1e-6);
      EXPECT_NEAR(e.axy(r, c), 0.0, 1e-6);
      EXPECT_NEAR(e.c(r, c), 2.0 * c, 1e-6);
    }
}

TEST(PolyExpansion, ParabolaGivesQuadraticTerm) {
  const Plane p = from_function(24, 24, [](double x, double) { return x * x; });
  const auto e = polynomial_expansion(p, 11, 1.5);
  for (int r = 5; r < 19; ++r)
    for (int c = 5; c < 19; ++c) {
      EXPECT_NEAR(e.axx(r, c), 1.0, 1e-6);
      EXPECT_NEAR(e.bx(r, c), 2.0 * c, 1e-6);
      EXPECT_NEAR(e.ayy(r, c), 0.0, 1e-6);
    }
}

TEST(PolyExpansion, CrossTermStoredAsHalfCoefficient) {
  // f = 3xy -> A = [[0, 1.5], [1.5, 0]]
  const Plane p = from_function(24, 24, [](double x, double y) { return 3 * x * y; });
  const auto e = polynomial_expansion(p, 9, 1.2);
  EXPECT_NEAR(e.axy(12, 12), 1.5, 1e-6);
  EXPECT_NEAR(e.bx(12, 12), 36.0, 1e-6);
  EXPECT_NEAR(e.by(12, 12), 36.0, 1e-6);
}

TEST(PolyExpansion, MatchesDenseLeastSquaresEverywhere) {
  Rng rng(12);
  Plane p(17, 23);
  for (auto& v : p.pixels()) v = rng.uniform(0, 255);
  for (int window : {3, 7, 11}) {
    const auto e = polynomial_expansion(p, window, 1.5);
    for (int r = 0; r < p.rows(); ++r)
      for (int c = 0; c < p.cols(); ++c) {
        const auto q = oracle::fit_quadratic(p, r, c, window, 1.5);
        ASSERT_NEAR(e.c(r, c), q.c, 1e-7) << r << "," << c << " window " << window;
        ASSERT_NEAR(e.bx(r, c), q.bx, 1e-7);
        ASSERT_NEAR(e.by(r, c), q.by, 1e-7);
        ASSERT_NEAR(e.axx(r, c), q.axx, 1e-7);
        ASSERT_NEAR(e.axy(r, c), q.axy, 1e-7);
        ASSERT_NEAR(e.ayy(r, c), q.ayy, 1e-7);
      }
  }
}

TEST(PolyExpansion, WindowLargerThanFrameRejected) {
  EXPECT_ERRC(polynomial_expansion(Plane(8, 20), 11, 1.5), Errc::validation);
  EXPECT_ERRC(polynomial_expansion(Plane(20, 20), 4, 1.5), Errc::validation);
}

TEST(Flow, IdenticalFramesGiveZero) {
  const Plane p = band_limited_noise(48, 48, 3);
  for (const FlowParams& params : {FlowParams{}, FlowParams{1, 0.5, 5, 1, 1.1, 1e-3, 5}, FlowParams{4, 0.7, 7, 5, 2.0, 1e-2, 21}}) {
    EXPECT_LT(mean_flow_magnitude(farneback_flow(p, p, params)), 1e-3);
  }
}

TEST(Flow, RecoversTwoPixelShift) {
  const auto pair = generate_translated_pair(64, 64, 2, 0, 5);
  const auto f = farneback_flow(pair.prev, pair.next);
  EXPECT_LT(mean_endpoint_error(f, 2, 0, 8), 0.25);
}

TEST(Flow, AgreesWithBlockMatching) {
  const auto pair = generate_translated_pair(64, 64, -3, 2, 8);
  const auto f = farneback_flow(pair.prev, pair.next);
  int agree = 0, total = 0;
  for (int r = 10; r < 54; r += 2)
    for (int c = 10; c < 54; c += 2, ++total) {
      const auto m = oracle::block_match(pair.prev, pair.next, r, c, 3, 5);
      ASSERT_EQ(m.dx, -3);
      ASSERT_EQ(m.dy, 2);
      agree += std::hypot(f.u(r, c) - m.dx, f.v(r, c) - m.dy) <= 1.0;
    }
  EXPECT_GE(agree, 0.9 * total);
}

TEST(Flow, TextureLessFramesStayFinite) {
  const Plane a(32, 32, 1, 100.0), b(32, 32, 1, 140.0);
  const auto f = farneback_flow(a, b);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      ASSERT_TRUE(std::isfinite(f.u(r, c)) && std::isfinite(f.v(r, c)));
      EXPECT_NEAR(f.u(r, c), 0, 1e-9);
      EXPECT_NEAR(f.v(r, c), 0, 1e-9);
    }
}

TEST(Flow, ReversingFramesNegatesFlow) {
  const auto pair = generate_translated_pair(64, 64, 1, -2, 21);
  const auto fw = farneback_flow(pair.prev, pair.next);
  const auto bw = farneback_flow(pair.next, pair.prev);
  double sum = 0;
  int n = 0;
  for (int r = 8; r < 56; ++r)
    for (int c = 8; c < 56; ++c, ++n) sum += std::hypot(fw.u(r, c) + bw.u(r, c), fw.v(r, c) + bw.v(r, c));
  EXPECT_LT(sum / n, 0.5);
}

TEST(Flow, FiniteOnRandomEightBitInput) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Image8 a(24, 30), b(24, 30);
    for (auto& v : a.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
    for (auto& v : b.pixels()) v = trial % 2 ? static_cast<std::uint8_t>(rng.below(256)) : std::uint8_t{255};
    const auto f = farneback_flow(a, b);
    for (auto v : f.u.pixels()) ASSERT_TRUE(std::isfinite(v));
    for (auto v : f.v.pixels()) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Flow, RgbUsesLumaWeights) {
  Image8 rgb(16, 16, 3);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      rgb(r, c, 0) = 10;
      rgb(r, c, 1) = 20;
      rgb(r, c, 2) = 30;
    }
  const Plane g = to_gray_plane(rgb);
  EXPECT_DOUBLE_EQ(g(3, 3), 0.299 * 10 + 0.587 * 20 + 0.114 * 30);
}

TEST(Flow, ShapeMismatchRejected) {
  EXPECT_ERRC(farneback_flow(Plane(32, 32), Plane(32, 33)), Errc::validation);
  FlowParams bad;
  bad.expansion_window = 4;
  EXPECT_ERRC(farneback_flow(Plane(32, 32), Plane(32, 32), bad), Errc::validation);
}

TEST(Flow, Deterministic) {
  const auto pair = generate_translated_pair(40, 40, 1, 1, 2);
  const auto a = farneback_flow(pair.prev, pair.next);
  const auto b = farneback_flow(pair.prev, pair.next);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.v, b.v);
}

TEST(FlowMagnitude, ConstantField) {
  EXPECT_DOUBLE_EQ(mean_flow_magnitude(constant_field(5, 6, 3, 4)), 5.0);
  EXPECT_DOUBLE_EQ(mean_flow_magnitude(constant_field(5, 6, 0, 0)), 0.0);
}

TEST(FlowMagnitude, HalfMovingField) {
  FlowField f = constant_field(4, 8, 0, 0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      f.u(r, c) = 3;
      f.v(r, c) = 4;
    }
  EXPECT_DOUBLE_EQ(mean_flow_magnitude(f), 2.5);
  EXPECT_DOUBLE_EQ(mean_flow_magnitude(f, Rect{0, 0, 4, 4}), 5.0);
  EXPECT_DOUBLE_EQ(mean_flow_magnitude(f, Rect{4, 1, 4, 2}), 0.0);
}

TEST(FlowMagnitude, EmptyOrOutsideRoiRejected) {
  const auto f = constant_field(4, 4, 1, 1);
  EXPECT_ERRC(mean_flow_magnitude(f, Rect{0, 0, 0, 3}), Errc::validation);
  EXPECT_ERRC(mean_flow_magnitude(f, Rect{2, 2, 3, 3}), Errc::validation);
}
