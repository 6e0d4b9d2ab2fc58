#pragma once

// Spatial feature shrinking: reduces an H x W x C map to (H/s) x (W/s) x C
// before attention, by learnable mixed pooling or by space-to-depth followed
// by a 1x1 convolution.

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>

#include "dmff/ops.hpp"
#include "dmff/rng.hpp"

namespace dmff {

enum class ShrinkVariant { kPool, kConv };

/// Mixing weight lambda = sigmoid(lambda_raw); raw 0 gives an even blend.
template <class T>
struct MixedPoolParam {
  Tensor<T> lambda_raw = Tensor<T>::scalar(T(0));

  T lambda() const { return T(1) / (T(1) + std::exp(-lambda_raw[0])); }

  template <class F>
  void visit(const std::string& prefix, F&& f) { f(prefix + "lambda_raw", lambda_raw); }
  template <class F>
  void visit(const std::string& prefix, F&& f) const { f(prefix + "lambda_raw", lambda_raw); }
};

/// 1x1 convolution from s*s*C packed channels back to C.
template <class T>
struct ConvShrinkParam {
  Tensor<T> w;  // (s*s*C) x C
  Tensor<T> b;  // C

  static ConvShrinkParam init(std::size_t window, std::size_t channels, Rng& rng) {
    const std::size_t in = window * window * channels;
    ConvShrinkParam p{Tensor<T>({in, channels}), Tensor<T>({channels})};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : p.w.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    return p;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "w", w);
    f(prefix + "b", b);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + "w", w);
    f(prefix + "b", b);
  }
};

template <class T>
using ShrinkParams = std::variant<MixedPoolParam<T>, ConvShrinkParam<T>>;

template <class T>
ShrinkParams<T> init_shrink(ShrinkVariant variant, std::size_t window, std::size_t channels, Rng& rng) {
  if (variant == ShrinkVariant::kPool) return MixedPoolParam<T>{};
  return ConvShrinkParam<T>::init(window, channels, rng);
}

/// lambda * avg_pool + (1 - lambda) * max_pool with lambda = sigmoid(lambda_raw).
template <class T>
Var<T> shrink_pool(Var<T> map, std::size_t s, Var<T> lambda_raw) {
  Var<T> avg = ops::pool2d(map, s, kernels::PoolKind::kAvg);
  Var<T> mx = ops::pool2d(map, s, kernels::PoolKind::kMax);
  Var<T> lambda = ops::sigmoid(lambda_raw);
  Var<T> one_minus = ops::affine(lambda, T(-1), T(1));
  return ops::add(ops::scale_by(avg, lambda), ops::scale_by(mx, one_minus));
}

/// Packs each s x s block into channels (row-major block order) and maps the
/// s*s*C vector through `w` plus `b`.
template <class T>
Var<T> shrink_conv(Var<T> map, std::size_t s, Var<T> w, Var<T> b) {
  kernels::require_pool_divisible(map.shape(), s, "shrink_conv");
  const std::size_t c = map.dim(2);
  const std::size_t packed = s * s * c;
  if (w.shape() != Shape{packed, c} || b.shape() != Shape{c}) {
    throw DimensionError("shrink_conv: expected weight [" + std::to_string(packed) + "x" + std::to_string(c) +
                         "] and bias [" + std::to_string(c) + "], got " + shape_str(w.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t ho = map.dim(0) / s, wo = map.dim(1) / s;
  Var<T> blocks = ops::reshape(ops::space_to_depth(map, s), {ho * wo, packed});
  Var<T> y;
  {
    ScopedCostTag tag(CostTag::kShrink);
    y = ops::matmul(blocks, w);
  }
  return ops::reshape(ops::add_row_bias(y, b), {ho, wo, c});
}

/// Applies whichever shrink variant `p` holds, registering its tensors on
/// the map's tape under `prefix`.
template <class T>
Var<T> shrink(Var<T> map, std::size_t s, const ShrinkParams<T>& p, const std::string& prefix) {
  auto& tape = map.tape();
  if (const auto* pool = std::get_if<MixedPoolParam<T>>(&p)) {
    return shrink_pool(map, s, tape.parameter(prefix + "lambda_raw", pool->lambda_raw));
  }
  const auto& conv = std::get<ConvShrinkParam<T>>(p);
  return shrink_conv(map, s, tape.parameter(prefix + "w", conv.w), tape.parameter(prefix + "b", conv.b));
}

template <class T, class F>
void visit_shrink(ShrinkParams<T>& p, const std::string& prefix, F&& f) {
  std::visit([&](auto& q) { q.visit(prefix, f); }, p);
}
template <class T, class F>
void visit_shrink(const ShrinkParams<T>& p, const std::string& prefix, F&& f) {
  std::visit([&](const auto& q) { q.visit(prefix, f); }, p);
}

}  // namespace dmff
