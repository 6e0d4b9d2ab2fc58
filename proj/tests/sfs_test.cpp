#include <gtest/gtest.h>

#include "test_support.hpp"

namespace dmff {
namespace {

using testing::random_tensor;

Tensor<double> pool_with(const Tensor<double>& m, std::size_t s, double lambda_raw) {
  Tape<double> tape;
  return shrink_pool(tape.constant(m), s, tape.constant(Tensor<double>::scalar(lambda_raw))).value();
}

TEST(MixedPool, LambdaFromRaw) {
  MixedPoolParam<double> p;
  EXPECT_EQ(p.lambda(), 0.5);
  for (double raw : {-50.0, -3.0, 0.7, 30.0}) {
    p.lambda_raw[0] = raw;
    EXPECT_GE(p.lambda(), 0.0);
    EXPECT_LE(p.lambda(), 1.0);
  }
}

TEST(MixedPool, EvenBlendOfOneWindow) {
  EXPECT_EQ(pool_with(Tensor<double>({2, 2, 1}, {1, 3, 5, 7}), 2, 0.0)[0], 5.5);
}

TEST(MixedPool, SaturatedEndpointsMatchPureKinds) {
  Rng rng(1);
  const auto m = random_tensor({6, 4, 3}, rng);
  const auto avg = kernels::pool2d(m, 2, kernels::PoolKind::kAvg);
  const auto mx = kernels::pool2d(m, 2, kernels::PoolKind::kMax);
  EXPECT_LT(max_abs_diff(pool_with(m, 2, 20.0), avg), 1e-6);
  EXPECT_LT(max_abs_diff(pool_with(m, 2, -20.0), mx), 1e-6);
}

TEST(MixedPool, OutputBetweenAverageAndMax) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_tensor({4, 4, 2}, rng);
    const double raw = rng.uniform(-6, 6);
    const auto y = pool_with(m, 2, raw);
    const auto avg = kernels::pool2d(m, 2, kernels::PoolKind::kAvg);
    const auto mx = kernels::pool2d(m, 2, kernels::PoolKind::kMax);
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_GE(y[i], std::min(avg[i], mx[i]) - 1e-15);
      EXPECT_LE(y[i], std::max(avg[i], mx[i]) + 1e-15);
    }
  }
}

TEST(MixedPool, WindowOneIsIdentity) {
  Rng rng(3);
  const auto m = random_tensor({3, 5, 2}, rng);
  for (double raw : {-4.0, 0.0, 2.5}) EXPECT_LT(max_abs_diff(pool_with(m, 1, raw), m), 1e-15);
}

TEST(MixedPool, TokenCountShrinksBySquaredWindow) {
  Rng rng(4);
  const auto m = random_tensor({8, 12, 2}, rng);
  for (std::size_t s : {1u, 2u, 4u}) {
    const auto y = pool_with(m, s, 0.0);
    EXPECT_EQ(y.dim(0) * y.dim(1), 8 * 12 / (s * s));
  }
}

TEST(MixedPool, NonDivisibleIsConfigError) {
  EXPECT_THROW(pool_with(Tensor<double>({5, 4, 1}), 2, 0.0), ConfigError);
}

TEST(MixedPool, LambdaGradientMatchesFiniteDifferences) {
  Rng rng(5);
  const auto m = random_tensor({4, 4, 3}, rng);
  for (double raw : {-1.5, 0.0, 0.8}) {
    const double err = testing::op_gradient_error(Tensor<double>::scalar(raw), [&](auto& t, auto lam) {
      using T = std::remove_cvref_t<decltype(lam.value()[0])>;
      return shrink_pool(t.constant(m.template cast<T>()), 2, lam);
    });
    EXPECT_LT(err, 1e-4) << "raw " << raw;
  }
}

TEST(MixedPool, MapGradientMatchesFiniteDifferences) {
  Rng rng(6);
  const auto m = random_tensor({4, 4, 2}, rng);
  const double err = testing::op_gradient_error(m, [](auto& t, auto x) {
    using T = std::remove_cvref_t<decltype(x.value()[0])>;
    return shrink_pool(x, 2, t.constant(Tensor<T>::scalar(T(0.3))));
  });
  EXPECT_LT(err, 1e-4);
}

Tensor<double> conv_with(const Tensor<double>& m, std::size_t s, const Tensor<double>& w, const Tensor<double>& b) {
  Tape<double> tape;
  return shrink_conv(tape.constant(m), s, tape.constant(w), tape.constant(b)).value();
}

TEST(ConvShrink, IdentityWeightsWithWindowOne) {
  Rng rng(7);
  const auto m = random_tensor({3, 4, 3}, rng);
  Tensor<double> eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1;
  EXPECT_EQ(conv_with(m, 1, eye, Tensor<double>({3})), m);
}

TEST(ConvShrink, QuarterOnesIsAveragePooling) {
  Rng rng(8);
  const auto m = random_tensor({4, 6, 1}, rng);
  const auto y = conv_with(m, 2, Tensor<double>({4, 1}, 0.25), Tensor<double>({1}));
  EXPECT_LT(max_abs_diff(y, kernels::pool2d(m, 2, kernels::PoolKind::kAvg)), 1e-15);
}

TEST(ConvShrink, MatchesPerPixelDotProduct) {
  Rng rng(9);
  const std::size_t s = 2, c = 2;
  const auto m = random_tensor({4, 4, c}, rng);
  const auto w = random_tensor({s * s * c, c}, rng);
  const auto b = random_tensor({c}, rng);
  const auto y = conv_with(m, s, w, b);
  for (std::size_t oi = 0; oi < 2; ++oi)
    for (std::size_t oj = 0; oj < 2; ++oj)
      for (std::size_t o = 0; o < c; ++o) {
        double acc = b[o];
        for (std::size_t di = 0; di < s; ++di)
          for (std::size_t dj = 0; dj < s; ++dj)
            for (std::size_t ch = 0; ch < c; ++ch)
              acc += m(oi * s + di, oj * s + dj, ch) * w((di * s + dj) * c + ch, o);
        EXPECT_NEAR(y(oi, oj, o), acc, 1e-12);
      }
}

TEST(ConvShrink, WeightShapeMismatchIsDimensionError) {
  EXPECT_THROW(conv_with(Tensor<double>({4, 4, 2}), 2, Tensor<double>({4, 2}), Tensor<double>({2})), DimensionError);
}

TEST(ConvShrink, GradientsMatchFiniteDifferences) {
  Rng rng(10);
  const auto m = random_tensor({4, 4, 2}, rng);
  const auto w = random_tensor({8, 2}, rng);
  const auto b = random_tensor({2}, rng);
  EXPECT_LT(testing::op_gradient_error(m, [&](auto& t, auto x) {
              using T = std::remove_cvref_t<decltype(x.value()[0])>;
              return shrink_conv(x, 2, t.constant(w.template cast<T>()), t.constant(b.template cast<T>()));
            }),
            1e-4);
  EXPECT_LT(testing::op_gradient_error(w, [&](auto& t, auto x) {
              using T = std::remove_cvref_t<decltype(x.value()[0])>;
              return shrink_conv(t.constant(m.template cast<T>()), 2, x, t.constant(b.template cast<T>()));
            }),
            1e-4);
}

}  // namespace
}  // namespace dmff
