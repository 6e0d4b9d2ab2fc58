#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>

#include "dmff/ops.hpp"
#include "dmff/rng.hpp"

namespace dmff {

/// T x C token matrix plus the spatial extents it was flattened from.
template <class T>
struct TokenSeq {
  Var<T> tokens;
  std::size_t origin_h = 0;
  std::size_t origin_w = 0;

  std::size_t count() const { return tokens.dim(0); }
  std::size_t channels() const { return tokens.dim(1); }
};

/// Learnable (T x C) table, uniform in [-0.02, 0.02] at initialization.
template <class T>
Tensor<T> init_positional_embedding(std::size_t tokens, std::size_t channels, Rng& rng) {
  Tensor<T> pe({tokens, channels});
  for (auto& v : pe.data()) v = static_cast<T>(rng.uniform(-0.02, 0.02));
  return pe;
}

/// Flattens an H x W x C map into row-major tokens, optionally adding a
/// positional embedding of shape (H*W) x C.
template <class T>
TokenSeq<T> tokenize(Var<T> map, std::optional<Var<T>> pe = std::nullopt) {
  kernels::require_rank(map.shape(), 3, "tokenize");
  const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  Var<T> tokens = ops::reshape(map, {h * w, c});
  if (pe) {
    if (pe->shape() != Shape{h * w, c}) {
      throw DimensionError("tokenize: positional embedding " + shape_str(pe->shape()) + " vs tokens " +
                           shape_str({h * w, c}));
    }
    tokens = ops::add(tokens, *pe);
  }
  return {tokens, h, w};
}

template <class T>
Var<T> detokenize(const TokenSeq<T>& seq) {
  kernels::require_rank(seq.tokens.shape(), 2, "detokenize");
  if (seq.origin_h == 0 || seq.origin_w == 0 || seq.count() != seq.origin_h * seq.origin_w) {
    throw DimensionError("detokenize: " + std::to_string(seq.count()) + " tokens cannot form a " +
                         std::to_string(seq.origin_h) + "x" + std::to_string(seq.origin_w) + " map");
  }
  return ops::reshape(seq.tokens, {seq.origin_h, seq.origin_w, seq.channels()});
}

}  // namespace dmff
